#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nie/tensor.hpp"

namespace nie {

/// Int8 storage form of a weight tensor: dequantize(q) = scale * (q - zero_point).
struct QuantizedTensor {
    std::vector<std::size_t> shape;
    std::vector<std::int8_t> q;
    double scale = 1.0;
    std::int32_t zero_point = 0;
};

namespace detail {

inline std::int8_t clamp_i8(long v) {
    if (v < -128) return -128;
    if (v > 127) return 127;
    return static_cast<std::int8_t>(v);
}

/// Smallest power of two s with 127 * s >= x (x > 0).
inline double pow2_scale_for(double max_abs) {
    int exp = 0;
    double m = std::frexp(max_abs / 127.0, &exp);  // max_abs/127 = m * 2^exp, m in [0.5, 1)
    if (m == 0.5) exp -= 1;
    return std::ldexp(1.0, exp);
}

}  // namespace detail

/// Per-tensor 8-bit quantization calibrated from the tensor's own min/max.
/// The scale is the smallest power of two covering max|v| with 127 codes,
/// which makes quantize(dequantize(quantize(x))) reproduce codes and scale
/// exactly: s*q is exact in double arithmetic and the re-derived scale is
/// bit-identical. A degenerate tensor (all values equal) gets scale 1 and
/// zero_point = the common value's code.
inline QuantizedTensor quantize_tensor(const Tensor& t) {
    QuantizedTensor out;
    out.shape = t.shape;
    out.q.resize(t.size());

    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (double v : t.data) {
        if (!std::isfinite(v)) throw std::invalid_argument("quantize_tensor: non-finite value");
        if (first) {
            lo = hi = v;
            first = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    if (t.size() == 0 || lo == hi) {
        out.scale = 1.0;
        out.zero_point = static_cast<std::int32_t>(std::lround(t.size() == 0 ? 0.0 : lo));
        for (std::size_t i = 0; i < t.size(); ++i)
            out.q[i] = detail::clamp_i8(std::lround(t.data[i]) + out.zero_point);
        return out;
    }

    const double max_abs = std::max(std::fabs(lo), std::fabs(hi));
    out.scale = detail::pow2_scale_for(max_abs);
    out.zero_point = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        out.q[i] = detail::clamp_i8(std::lround(t.data[i] / out.scale));
    return out;
}

inline Tensor dequantize_tensor(const QuantizedTensor& qt) {
    Tensor t(qt.shape);
    if (t.size() != qt.q.size()) throw std::invalid_argument("dequantize_tensor: shape/payload mismatch");
    for (std::size_t i = 0; i < qt.q.size(); ++i)
        t.data[i] = qt.scale * (static_cast<double>(qt.q[i]) - static_cast<double>(qt.zero_point));
    return t;
}

}  // namespace nie
