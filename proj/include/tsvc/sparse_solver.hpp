#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tsvc/dictionary.hpp"

namespace tsvc {

// Norm threshold below which an atom updated by the one-step
// orthonormalization is considered inside the chosen span and dropped.
inline constexpr double kAtomDropThreshold = 1e-6;

struct SolverConfig {
    double epsilon_sq = 0.0;        // per-sample squared fidelity target
    double termination_ratio = 0.0; // t: relative residual-norm reduction floor; 0 disables
    int max_atoms = 0;              // 0 means "dimension of x"
    double mean_tolerance = 1e-9;   // |mean(x)| allowed before rejecting the input
    bool keep_remaining = false;    // expose the surviving updated atoms (tests)

    void validate() const {
        if (epsilon_sq < 0) throw std::invalid_argument("solver: epsilon_sq must be non-negative");
        if (termination_ratio < 0 || termination_ratio >= 1)
            throw std::invalid_argument("solver: termination ratio must lie in [0, 1)");
    }
};

template <typename Scalar>
struct SparseSolution {
    std::vector<int> chosen;             // atom indices in selection order
    MatrixX<Scalar> basis;               // orthonormalized chosen atoms, one column per pick
    VectorX<Scalar> coeffs;              // inner products, selection order
    VectorX<Scalar> residual;
    bool terminated_early = false;
    std::vector<Scalar> residual_norms;  // ||r|| after 0,1,...,K picks

    // Populated only when SolverConfig::keep_remaining is set. Updates happen
    // lazily at the top of the next search step, so at exit the survivors are
    // orthonormal to every basis column except the most recent pick.
    MatrixX<Scalar> remaining;
    std::vector<int> remaining_indices;

    int atom_count() const { return static_cast<int>(chosen.size()); }
};

// One-step orthonormalization: project the previously chosen atom b out of a,
// then renormalize. Returns false (leaving a unnormalized) when the update
// degenerates. Shared by the solver and the decoder-side basis replay so both
// produce bit-identical vectors.
template <typename Scalar>
bool one_step_orthonormalize(VectorX<Scalar>& a, const VectorX<Scalar>& b) {
    a -= b.dot(a) * b;
    const Scalar norm = a.norm();
    if (norm < Scalar(kAtomDropThreshold)) return false;
    a /= norm;
    return true;
}

// Replays the recursive orthonormalization over atoms in selection order.
// Column j of the result is atoms.col(j) passed through the same
// project-renormalize steps the solver applied before choosing it.
template <typename Scalar>
MatrixX<Scalar> rebuild_orthonormal_basis(const MatrixX<Scalar>& atoms) {
    const int k = static_cast<int>(atoms.cols());
    MatrixX<Scalar> basis(atoms.rows(), k);
    VectorX<Scalar> a;
    for (int j = 0; j < k; ++j) {
        a = atoms.col(j);
        for (int p = 0; p < j; ++p) {
            VectorX<Scalar> b = basis.col(p);
            if (!one_step_orthonormalize(a, b))
                throw std::invalid_argument("rebuild_orthonormal_basis: degenerate atom sequence");
        }
        basis.col(j) = a;
    }
    return basis;
}

namespace detail {

template <typename Scalar>
void check_input_mean(const VectorX<Scalar>& x, double tolerance) {
    const Scalar mean = x.size() > 0 ? Scalar(x.sum() / Scalar(x.size())) : Scalar(0);
    if (std::abs(static_cast<double>(mean)) > tolerance)
        throw std::invalid_argument("sparse solver: input block is not mean-removed");
}

inline int resolved_max_atoms(const SolverConfig& cfg, int n) { return cfg.max_atoms > 0 ? cfg.max_atoms : n; }

}  // namespace detail

// eOMP: orthogonal matching pursuit with embedded one-step orthonormalization.
// Every remaining atom is kept orthonormal to all chosen atoms, so the best
// pick is the max |<r, a_i>| and its coefficient is that inner product.
template <typename Scalar>
SparseSolution<Scalar> eomp(const VectorX<Scalar>& x, const Dictionary<Scalar>& dict, const SolverConfig& config) {
    config.validate();
    detail::check_input_mean(x, config.mean_tolerance);
    const int n = static_cast<int>(x.size());
    if (dict.dim() != n) throw std::invalid_argument("eomp: dictionary dimension mismatch");

    SparseSolution<Scalar> sol;
    sol.residual = x;
    sol.residual_norms.push_back(x.norm());

    const int max_atoms = detail::resolved_max_atoms(config, n);
    const Scalar fidelity = Scalar(n) * Scalar(config.epsilon_sq);
    const Scalar t = Scalar(config.termination_ratio);

    const int m = dict.atom_count();
    MatrixX<Scalar> work = dict.atoms;  // updated in place as atoms are orthonormalized
    std::vector<std::uint8_t> alive(dict.valid.begin(), dict.valid.end());
    int alive_count = dict.valid_count();

    std::vector<VectorX<Scalar>> basis_cols;
    std::vector<Scalar> coeffs;

    while (true) {
        if (sol.residual.squaredNorm() <= fidelity) break;
        if (static_cast<int>(sol.chosen.size()) >= max_atoms) break;

        if (!sol.chosen.empty()) {
            // One-step recursion: orthonormalize every remaining atom against
            // the last chosen one, dropping atoms that collapse into the span.
            const VectorX<Scalar>& b = basis_cols.back();
            VectorX<Scalar> proj = work.transpose() * b;  // <a_i, b> per remaining atom
            for (int i = 0; i < m; ++i) {
                if (!alive[i]) continue;
                work.col(i) -= proj[i] * b;
                const Scalar norm = work.col(i).norm();
                if (norm < Scalar(kAtomDropThreshold)) {
                    alive[i] = 0;
                    --alive_count;
                } else {
                    work.col(i) /= norm;
                }
            }
        }
        if (alive_count == 0) break;

        VectorX<Scalar> corr = work.transpose() * sol.residual;
        int best = -1;
        Scalar best_mag = Scalar(-1);
        for (int i = 0; i < m; ++i) {
            if (!alive[i]) continue;
            const Scalar mag = std::abs(corr[i]);
            if (mag > best_mag) {  // strict: ties resolve to the smallest index
                best_mag = mag;
                best = i;
            }
        }

        const Scalar prev_norm = sol.residual_norms.back();
        const Scalar c = corr[best];
        basis_cols.push_back(work.col(best));
        coeffs.push_back(c);
        sol.chosen.push_back(best);
        alive[best] = 0;
        --alive_count;

        sol.residual -= c * basis_cols.back();
        const Scalar new_norm = sol.residual.norm();
        sol.residual_norms.push_back(new_norm);

        if (prev_norm > Scalar(0) && (prev_norm - new_norm) / prev_norm < t) {
            sol.terminated_early = true;  // the triggering atom is kept
            break;
        }
    }

    const int k = static_cast<int>(sol.chosen.size());
    sol.basis.resize(n, k);
    sol.coeffs.resize(k);
    for (int j = 0; j < k; ++j) {
        sol.basis.col(j) = basis_cols[j];
        sol.coeffs[j] = coeffs[j];
    }
    if (config.keep_remaining) {
        std::vector<int> idx;
        for (int i = 0; i < m; ++i)
            if (alive[i]) idx.push_back(i);
        sol.remaining.resize(n, static_cast<int>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) sol.remaining.col(static_cast<int>(j)) = work.col(idx[j]);
        sol.remaining_indices = std::move(idx);
    }
    return sol;
}

// Classic OMP baseline: correlate against the original atoms, refit all
// coefficients by least squares each iteration. Output is converted to the
// orthonormal (B, c) form by post-hoc Gram-Schmidt in selection order.
template <typename Scalar>
SparseSolution<Scalar> omp_baseline(const VectorX<Scalar>& x, const Dictionary<Scalar>& dict,
                                    const SolverConfig& config) {
    config.validate();
    detail::check_input_mean(x, config.mean_tolerance);
    const int n = static_cast<int>(x.size());
    if (dict.dim() != n) throw std::invalid_argument("omp_baseline: dictionary dimension mismatch");

    SparseSolution<Scalar> sol;
    sol.residual = x;
    sol.residual_norms.push_back(x.norm());

    const int max_atoms = detail::resolved_max_atoms(config, n);
    const Scalar fidelity = Scalar(n) * Scalar(config.epsilon_sq);
    const Scalar t = Scalar(config.termination_ratio);
    const int m = dict.atom_count();
    std::vector<std::uint8_t> alive(dict.valid.begin(), dict.valid.end());
    int alive_count = dict.valid_count();

    MatrixX<Scalar> selected(n, 0);
    while (true) {
        if (sol.residual.squaredNorm() <= fidelity) break;
        if (static_cast<int>(sol.chosen.size()) >= max_atoms) break;
        if (alive_count == 0) break;

        VectorX<Scalar> corr = dict.atoms.transpose() * sol.residual;
        int best = -1;
        Scalar best_mag = Scalar(-1);
        for (int i = 0; i < m; ++i) {
            if (!alive[i]) continue;
            const Scalar mag = std::abs(corr[i]);
            if (mag > best_mag) {
                best_mag = mag;
                best = i;
            }
        }

        sol.chosen.push_back(best);
        alive[best] = 0;
        --alive_count;
        selected.conservativeResize(Eigen::NoChange, selected.cols() + 1);
        selected.col(selected.cols() - 1) = dict.atoms.col(best);

        const VectorX<Scalar> w = selected.colPivHouseholderQr().solve(x);
        const Scalar prev_norm = sol.residual_norms.back();
        sol.residual = x - selected * w;
        const Scalar new_norm = sol.residual.norm();
        sol.residual_norms.push_back(new_norm);

        if (prev_norm > Scalar(0) && (prev_norm - new_norm) / prev_norm < t) {
            sol.terminated_early = true;
            break;
        }
    }

    // (B, c) form: orthonormalize the selected atoms in selection order and
    // read coefficients off as inner products with x.
    const int k = static_cast<int>(sol.chosen.size());
    sol.basis = rebuild_orthonormal_basis<Scalar>(selected.leftCols(k));
    sol.coeffs.resize(k);
    for (int j = 0; j < k; ++j) sol.coeffs[j] = x.dot(sol.basis.col(j));
    return sol;
}

}  // namespace tsvc
