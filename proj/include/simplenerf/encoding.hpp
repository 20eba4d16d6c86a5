// Copyright 2026 The simplenerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "simplenerf/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace snerf {

/// Frequency band [lo, hi) of the sin/cos ladder. Every band also carries the
/// raw input, so an empty band (lo == hi) encodes x as [x].
struct EncodingBand {
    int lo = 0;
    int hi = 0;

    void validate() const { require(lo >= 0 && lo <= hi, "encoding band requires 0 <= lo <= hi"); }

    int per_scalar() const { return 1 + 2 * (hi - lo); }
    int output_size(int n) const { return n * per_scalar(); }
};

/// Calls f(freq, sin(freq x), cos(freq x)) for freq = 2^lo ... 2^(hi-1).
/// Octaves above the first come from the double-angle identities.
template <typename F>
inline void sincos_ladder(double x, EncodingBand band, F&& f) {
    if (band.hi <= band.lo) return;
    double freq = std::ldexp(1.0, band.lo);
    double s = std::sin(freq * x);
    double c = std::cos(freq * x);
    for (int k = band.lo; k < band.hi; ++k, freq *= 2.0) {
        f(freq, s, c);
        const double s2 = 2.0 * s * c;
        c = (c - s) * (c + s);
        s = s2;
    }
}

/// Writes the encoding of `n` scalars into `out`, one contiguous block per
/// scalar: [x, sin(2^lo x), cos(2^lo x), ..., sin(2^(hi-1) x), cos(2^(hi-1) x)].
inline void encode_into(const double* x, int n, EncodingBand band, double* out) {
    for (int i = 0; i < n; ++i) {
        *out++ = x[i];
        sincos_ladder(x[i], band, [&out](double, double s, double c) {
            *out++ = s;
            *out++ = c;
        });
    }
}

inline std::vector<double> positional_encode(std::span<const double> x, EncodingBand band) {
    band.validate();
    std::vector<double> out(static_cast<std::size_t>(band.output_size(static_cast<int>(x.size()))));
    encode_into(x.data(), static_cast<int>(x.size()), band, out.data());
    return out;
}

/// Accumulates d(loss)/dx given d(loss)/d(encoding) for the block written by
/// encode_into. `upstream` and `x` must describe the same n scalars.
inline void encode_backward(const double* x, int n, EncodingBand band, const double* upstream, double* grad_x) {
    for (int i = 0; i < n; ++i) {
        double g = *upstream++;
        sincos_ladder(x[i], band, [&](double freq, double s, double c) {
            g += freq * (upstream[0] * c - upstream[1] * s);
            upstream += 2;
        });
        grad_x[i] += g;
    }
}

/// Dense Jacobian of positional_encode, shape (n * per_scalar) x n.
inline Eigen::MatrixXd encode_gradient(std::span<const double> x, EncodingBand band) {
    band.validate();
    const int n = static_cast<int>(x.size());
    const int per = band.per_scalar();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(per * n, n);
    for (int i = 0; i < n; ++i) {
        int row = i * per;
        jac(row++, i) = 1.0;
        double freq = std::ldexp(1.0, band.lo);
        for (int k = band.lo; k < band.hi; ++k, freq *= 2.0) {
            jac(row++, i) = freq * std::cos(freq * x[i]);
            jac(row++, i) = -freq * std::sin(freq * x[i]);
        }
    }
    return jac;
}

}  // namespace snerf
