#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsvc/codec.hpp"

namespace tsvc {

struct SweepPoint {
    double q1 = 0.0;
    double q2 = 0.0;
    double t = 0.0;
    std::uint64_t bits = 0;
    double bits_per_frame = 0.0;
    double mean_psnr_db = 0.0;
    bool pareto = false;
};

// Cartesian sweep axes; every axis must be non-empty.
struct SweepGrid {
    std::vector<double> q1;
    std::vector<double> q2;
    std::vector<double> t;
};

// Encodes the sequence once per grid point and records rate and distortion.
// Reported q1/q2/t are the canonical (header fixed-point) values actually
// used. Grid points run concurrently on the thread budget (0 picks hardware
// concurrency); leftover budget parallelizes blocks inside each encode.
std::vector<SweepPoint> rd_sweep(const std::vector<Frame>& frames, const CodecConfig& base, const SweepGrid& grid,
                                 int threads = 0);

// Flags the non-dominated subset: a point survives unless another point is
// at least as good on both axes and strictly better on one.
void mark_pareto(std::vector<SweepPoint>& points);

std::string sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace tsvc
