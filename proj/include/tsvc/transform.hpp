#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tsvc/dictionary.hpp"
#include "tsvc/sparse_solver.hpp"

namespace tsvc {

// JPEG-style zig-zag scan over a block_size x block_size frequency grid:
// anti-diagonals of increasing u+v, even diagonals walked bottom-left to
// top-right, odd ones the other way. Returned pairs are (u, v) = (vertical,
// horizontal) frequency.
inline std::vector<std::pair<int, int>> zigzag_order(int block_size) {
    if (block_size <= 0) throw std::invalid_argument("zigzag_order: block size must be positive");
    std::vector<std::pair<int, int>> order;
    order.reserve(static_cast<std::size_t>(block_size) * block_size);
    for (int d = 0; d <= 2 * (block_size - 1); ++d) {
        const int lo = std::max(0, d - block_size + 1);
        const int hi = std::min(d, block_size - 1);
        if (d % 2 == 0) {
            for (int u = hi; u >= lo; --u) order.emplace_back(u, d - u);
        } else {
            for (int u = lo; u <= hi; ++u) order.emplace_back(u, d - u);
        }
    }
    return order;
}

// Orthonormal 2-D DCT-II basis, one column per frequency in zig-zag order.
// Columns are vectorized raster-style (y * block_size + x), matching the
// block vectorization used by the dictionary. Column 0 is the constant
// 1/sqrt(N) vector.
template <typename Scalar>
MatrixX<Scalar> dct_basis(int block_size) {
    const auto order = zigzag_order(block_size);
    const int n = block_size * block_size;
    const Scalar pi = Scalar(3.14159265358979323846L);
    const Scalar a0 = std::sqrt(Scalar(1) / Scalar(block_size));
    const Scalar a1 = std::sqrt(Scalar(2) / Scalar(block_size));

    MatrixX<Scalar> basis(n, n);
    for (int k = 0; k < n; ++k) {
        const auto [u, v] = order[static_cast<std::size_t>(k)];
        const Scalar au = u == 0 ? a0 : a1;
        const Scalar av = v == 0 ? a0 : a1;
        for (int y = 0; y < block_size; ++y) {
            const Scalar cy = std::cos(pi * Scalar(2 * y + 1) * Scalar(u) / Scalar(2 * block_size));
            for (int x = 0; x < block_size; ++x) {
                const Scalar cx = std::cos(pi * Scalar(2 * x + 1) * Scalar(v) / Scalar(2 * block_size));
                basis(y * block_size + x, k) = au * av * cy * cx;
            }
        }
    }
    return basis;
}

template <typename Scalar>
struct AlteredBasis {
    MatrixX<Scalar> vectors;       // orthonormal, one column per survivor
    std::vector<int> kept;         // zig-zag indices of the surviving columns

    int count() const { return static_cast<int>(vectors.cols()); }
};

// Gram-Schmidt of the full DCT basis against a (possibly empty) orthonormal
// set of chosen atoms: each DCT vector is stripped of its components along
// the chosen basis and the survivors accepted so far, then renormalized.
// Vectors whose remainder drops below the atom threshold have no independent
// direction left and are dropped. Runs identically on encoder and decoder,
// which is what keeps the second stage bit-exact.
template <typename Scalar>
AlteredBasis<Scalar> orthonormalize_against(const MatrixX<Scalar>& dct, const MatrixX<Scalar>& chosen) {
    const int n = static_cast<int>(dct.rows());
    if (chosen.cols() > 0 && chosen.rows() != n)
        throw std::invalid_argument("orthonormalize_against: dimension mismatch");

    AlteredBasis<Scalar> out;
    if (chosen.cols() == 0) {
        // Nothing to strip: the DCT is orthonormal already, keep it verbatim.
        out.vectors = dct;
        out.kept.resize(static_cast<std::size_t>(dct.cols()));
        std::iota(out.kept.begin(), out.kept.end(), 0);
        return out;
    }
    out.vectors.resize(n, static_cast<int>(dct.cols()));
    int survivors = 0;
    VectorX<Scalar> w(n);
    for (int k = 0; k < dct.cols(); ++k) {
        w = dct.col(k);
        for (int j = 0; j < chosen.cols(); ++j) w -= chosen.col(j).dot(w) * chosen.col(j);
        for (int j = 0; j < survivors; ++j) w -= out.vectors.col(j).dot(w) * out.vectors.col(j);
        const Scalar norm = w.norm();
        if (norm < Scalar(kAtomDropThreshold)) continue;
        out.vectors.col(survivors) = w / norm;
        out.kept.push_back(k);
        ++survivors;
    }
    out.vectors.conservativeResize(Eigen::NoChange, survivors);
    return out;
}

// Residual coefficients in the altered basis.
template <typename Scalar>
VectorX<Scalar> project_residual(const AlteredBasis<Scalar>& basis, const VectorX<Scalar>& residual) {
    if (basis.vectors.rows() != residual.size())
        throw std::invalid_argument("project_residual: residual length does not match the basis dimension");
    return basis.vectors.transpose() * residual;
}

}  // namespace tsvc
