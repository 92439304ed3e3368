#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tsvc/frame.hpp"

namespace tsvc {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Integer displacement window for motion-search candidates.
struct SearchRange {
    int lo = -24;
    int hi = 23;

    int side() const { return hi - lo + 1; }
    int count() const { return side() * side(); }
    void validate() const {
        if (lo >= hi) throw std::invalid_argument("search range: lo must be < hi");
    }
};

struct MotionVector {
    int dx = 0;
    int dy = 0;
    bool operator==(const MotionVector&) const = default;
};

// Atom index <-> displacement, raster order over the side x side grid
// (dy rows, dx columns, top-left = (lo, lo)).
inline int atom_index_of(const SearchRange& r, MotionVector mv) {
    return (mv.dy - r.lo) * r.side() + (mv.dx - r.lo);
}
inline MotionVector motion_vector_of(const SearchRange& r, int index) {
    return MotionVector{r.lo + index % r.side(), r.lo + index / r.side()};
}

// Extracts the candidate block at block_origin + mv from the reference frame
// (border-replicated outside the frame), removes its mean, and normalizes it
// to unit L2 norm. Returns false for degenerate (near-constant) candidates,
// which are left as written (mean-removed, unnormalized).
//
// This is the single code path that materializes atoms; encoder and decoder
// both rely on it producing bit-identical vectors for a given index.
template <typename Scalar>
bool candidate_atom(const Frame& ref, int origin_x, int origin_y, MotionVector mv, int block_size,
                    VectorX<Scalar>& out) {
    const int n = block_size * block_size;
    out.resize(n);
    int k = 0;
    for (int y = 0; y < block_size; ++y)
        for (int x = 0; x < block_size; ++x)
            out[k++] = static_cast<Scalar>(ref.at_clamped(origin_x + mv.dx + x, origin_y + mv.dy + y));
    const Scalar mean = out.sum() / Scalar(n);
    out.array() -= mean;
    const Scalar norm = out.norm();
    if (norm < Scalar(1e-9) * std::sqrt(Scalar(n))) return false;
    out /= norm;
    return true;
}

// The per-block self-adaptive dictionary: every integer-displacement
// candidate in the search window, mean-removed and unit-normalized.
template <typename Scalar>
struct Dictionary {
    MatrixX<Scalar> atoms;            // N x M, column per candidate
    std::vector<std::uint8_t> valid;  // degenerate candidates flagged 0
    SearchRange range;
    int block_size = 0;

    int atom_count() const { return static_cast<int>(atoms.cols()); }
    int dim() const { return static_cast<int>(atoms.rows()); }
    int valid_count() const {
        int c = 0;
        for (auto v : valid) c += v;
        return c;
    }
};

template <typename Scalar>
Dictionary<Scalar> build_dictionary(const Frame& ref, int origin_x, int origin_y, const SearchRange& range,
                                    int block_size) {
    range.validate();
    if (block_size <= 0) throw std::invalid_argument("build_dictionary: block size must be positive");
    if (block_size > ref.width || block_size > ref.height)
        throw std::invalid_argument("build_dictionary: block size exceeds frame dimensions");

    const int n = block_size * block_size;
    const int m = range.count();
    Dictionary<Scalar> dict;
    dict.range = range;
    dict.block_size = block_size;
    dict.atoms.resize(n, m);
    dict.valid.assign(m, 0);

    VectorX<Scalar> atom;
    for (int idx = 0; idx < m; ++idx) {
        const bool ok = candidate_atom<Scalar>(ref, origin_x, origin_y, motion_vector_of(range, idx), block_size, atom);
        dict.atoms.col(idx) = atom;
        dict.valid[idx] = ok ? 1 : 0;
    }
    return dict;
}

// Builds only the named candidates (decoder path). Throws if any candidate
// is degenerate: a conforming encoder never selects one.
template <typename Scalar>
MatrixX<Scalar> build_atoms(const Frame& ref, int origin_x, int origin_y, const SearchRange& range, int block_size,
                            const std::vector<int>& indices) {
    range.validate();
    if (block_size <= 0 || block_size > ref.width || block_size > ref.height)
        throw std::invalid_argument("build_atoms: bad block size");
    const int n = block_size * block_size;
    MatrixX<Scalar> atoms(n, static_cast<int>(indices.size()));
    VectorX<Scalar> atom;
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const int idx = indices[j];
        if (idx < 0 || idx >= range.count()) throw std::invalid_argument("build_atoms: atom index out of range");
        if (!candidate_atom<Scalar>(ref, origin_x, origin_y, motion_vector_of(range, idx), block_size, atom))
            throw std::invalid_argument("build_atoms: degenerate candidate selected");
        atoms.col(static_cast<int>(j)) = atom;
    }
    return atoms;
}

}  // namespace tsvc
