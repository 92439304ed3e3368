#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tsvc/dictionary.hpp"
#include "tsvc/entropy.hpp"
#include "tsvc/frame.hpp"
#include "tsvc/quantize.hpp"
#include "tsvc/sparse_solver.hpp"
#include "tsvc/transform.hpp"

namespace tsvc {

struct CodecConfig {
    int block_size = 16;
    SearchRange range;           // candidate window; [-r, r-1] with 2r a multiple of 16
    double q1 = 8.0;             // stage-1 / mean / intra stepsize
    double q2 = 8.0;             // stage-2 stepsize for inter blocks
    double t = 0.05;             // early-termination ratio, [0, 1); 0 disables
    double epsilon_factor = 1.2; // epsilon_sq = factor * q1^2 / 12
    int max_atoms = 0;           // per-block cap; 0 means the block dimension
    bool one_stage = false;      // inter blocks skip the residual stage
    int threads = 0;             // worker threads; 0 picks hardware concurrency

    double epsilon_sq() const { return epsilon_factor * q1 * q1 / 12.0; }

    // Headers carry q1/q2 in 1/16 steps and t in 1/1024 steps; returns a copy
    // with those fields snapped to what the header will say, so the encoder
    // works with the exact values the decoder will read. Validates everything.
    CodecConfig canonicalized() const;
    void validate() const;
};

struct FrameStats {
    bool intra = false;
    std::uint64_t bits = 0;       // frame header plus framed block payloads
    std::uint64_t bins = 0;
    double estimated_bits = 0.0;  // information content per the coding contexts
    double psnr_db = 0.0;         // display region, source vs reconstruction
};

struct EncodeResult {
    std::vector<std::uint8_t> stream;
    std::vector<Frame> reconstruction;  // padded frames, display dimensions kept
    std::vector<FrameStats> frames;
    std::uint64_t header_bits = 0;

    std::uint64_t total_bits() const { return 8 * static_cast<std::uint64_t>(stream.size()); }
    double mean_psnr_db() const;
};

struct DecodeResult {
    std::vector<Frame> frames;  // padded; crop_to_display recovers the content
    int block_size = 0;
};

// IPPP coding: the first frame is intra, every later frame predicts from the
// previous reconstruction. Input frames may be unpadded; dimensions must
// match across frames.
EncodeResult encode_sequence(const std::vector<Frame>& frames, const CodecConfig& config);

// Inverse of encode_sequence. Throws StreamError on malformed input.
DecodeResult decode_sequence(const std::vector<std::uint8_t>& stream, int threads = 0);

// ---------------------------------------------------------------------------
// Block-level entry points, shared by the frame loops and exercised directly
// by tests. Configs must already be canonicalized; ref == nullptr means
// intra coding.
// ---------------------------------------------------------------------------

VectorX<double> extract_block(const Frame& f, int origin_x, int origin_y, int block_size);

// Rounds to the nearest integer, clamps to [0, 255], and writes the block.
void store_block(Frame& f, int origin_x, int origin_y, int block_size, const VectorX<double>& values);

struct BlockCode {
    std::vector<std::uint8_t> payload;
    BlockSyntax syntax;
    VectorX<double> recon;  // assembled samples before rounding
    EntropyStats stats;
};

BlockCode encode_block_data(const VectorX<double>& block, const Frame* ref, int origin_x, int origin_y,
                            const CodecConfig& cfg, const MatrixX<double>& dct);

VectorX<double> decode_block_data(const std::uint8_t* data, std::size_t size, const Frame* ref, int origin_x,
                                  int origin_y, const CodecConfig& cfg, const MatrixX<double>& dct);

namespace detail {

// Runs fn(0), ..., fn(count-1) on a worker pool of `threads` threads (0 picks
// hardware concurrency); the first exception thrown wins and is rethrown on
// the caller's thread. Used for blocks within a frame and for sweep points.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace detail

}  // namespace tsvc
