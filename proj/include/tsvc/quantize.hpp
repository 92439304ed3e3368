#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace tsvc {

// Stepsizes for the two coding stages. The deadzone rounding offset is the
// HEVC inter recommendation of 1/6, i.e. the zero bin is widened to
// [-5q/6, 5q/6].
struct QuantParams {
    double q1 = 8.0;
    double q2 = 8.0;
    static constexpr double deadzone_offset = 1.0 / 6.0;
};

// Uniform deadzone scalar quantizer: level = sign(c) * floor(|c|/q + 1/6).
template <typename Scalar>
std::int64_t quantize(Scalar c, Scalar q) {
    if (!(q > Scalar(0))) throw std::invalid_argument("quantize: stepsize must be positive");
    if (!std::isfinite(static_cast<double>(c))) throw std::invalid_argument("quantize: non-finite coefficient");
    const Scalar mag = std::abs(c) / q + Scalar(QuantParams::deadzone_offset);
    const auto level = static_cast<std::int64_t>(std::floor(static_cast<double>(mag)));
    return c < Scalar(0) ? -level : level;
}

// Reconstruction at the bin center: level * q.
template <typename Scalar>
Scalar dequantize(std::int64_t level, Scalar q) {
    if (!(q > Scalar(0))) throw std::invalid_argument("dequantize: stepsize must be positive");
    return static_cast<Scalar>(level) * q;
}

}  // namespace tsvc
