#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "chromcc/error.hpp"

namespace chromcc {

// Raw per-channel intensity (or gain) triple. Not normalized.
struct RGB {
    double r = 0.0, g = 0.0, b = 0.0;
};

// Unit-L2 direction of an RGB vector, restricted to the non-negative
// octant of the sphere.
struct Chromaticity {
    double r = 0.0, g = 0.0, b = 0.0;

    friend bool operator==(const Chromaticity&, const Chromaticity&) = default;
};

constexpr int kIllumRes = 64;    // u-theta resolution for illuminant candidates
constexpr int kPixelRes = 128;   // u-theta resolution for pixel chromaticities
constexpr int kPixelBins = kPixelRes * kPixelRes;  // 16384
constexpr int kLumBins = 20;
constexpr double kLumClip = 4.0;
constexpr int kTableCells = kPixelBins * kLumBins;

struct ChromaBin {
    int u_idx = 0, theta_idx = 0;

    friend bool operator==(const ChromaBin&, const ChromaBin&) = default;
};

// Flat layout is u_idx*res + theta_idx; fixed for serialization stability.
constexpr int flat_index(ChromaBin bin, int res) { return bin.u_idx * res + bin.theta_idx; }
constexpr ChromaBin unflatten_bin(int flat, int res) { return {flat / res, flat % res}; }

namespace detail {

// atan(x)*(2/pi) = x*h(x^2) on |x| <= tan(pi/8); Chebyshev fit of h,
// max abs error 1.8e-17. Shared by the scalar and AVX2 binning paths,
// which must agree bit-for-bit (both evaluate this exact fma chain).
inline constexpr double kAtanCoeff[13] = {
    0.6366197723675814,    -0.2122065907891937,   0.12732395447349726,
    -0.09094568176434904,  0.07073553009888671,   -0.05787451819155048,
    0.048970582428298146,  -0.04243838075161829,  0.03741308726259528,
    -0.0332144434326961,   0.028644711298535807,  -0.021255349233810308,
    0.009621721695415177,
};

inline constexpr double kTanPiOver8 = 0.41421356237309503;

inline double atan_norm_poly(double x) {
    const double z = x * x;
    double acc = kAtanCoeff[12];
    for (int i = 11; i >= 0; --i) acc = std::fma(acc, z, kAtanCoeff[i]);
    return x * acc;
}

}  // namespace detail

// atan2(b, r) / (pi/2) for b, r >= 0. Exactly 0.5 when b == r, 0 when
// b == 0, 1 when r == 0 (and clamped into the last bin by the caller).
// Both arguments zero yields 0 by convention.
inline double octant_theta_norm(double b, double r) {
    const bool swap = b > r;
    const double mn = swap ? r : b;
    const double mx = swap ? b : r;
    const double q = mx > 0.0 ? mn / mx : 0.0;
    double base;
    if (q > detail::kTanPiOver8) {
        base = 0.5 + detail::atan_norm_poly((q - 1.0) / (q + 1.0));
    } else {
        base = detail::atan_norm_poly(q);
    }
    return swap ? 1.0 - base : base;
}

// v / ||v||_2. Throws Errc::zero_vector when the norm vanishes;
// callers skip such pixels.
inline Chromaticity chromaticity_of(const RGB& v) {
    const double n2 = (v.r * v.r + v.g * v.g) + v.b * v.b;
    if (n2 == 0.0) throw Error(Errc::zero_vector, "cannot normalize the zero intensity vector");
    const double n = std::sqrt(n2);
    return {v.r / n, v.g / n, v.b / n};
}

// Angle between two unit vectors, in degrees. Dot product clamped
// against rounding; symmetric; <= 90 on the non-negative octant.
inline double angular_error_deg(const Chromaticity& a, const Chromaticity& b) {
    const double dot = a.r * b.r + a.g * b.g + a.b * b.b;
    return std::acos(std::clamp(dot, -1.0, 1.0)) * (180.0 / 3.14159265358979323846);
}

inline int quantize_axis(double t, int res) {
    const int idx = static_cast<int>(std::floor(t * static_cast<double>(res)));
    return std::min(std::max(idx, 0), res - 1);
}

// Uniform quantization of (u, theta) = (g component, atan2(b, r)) over
// [0,1] x [0, pi/2]. Bins are half-open with the top boundary folded
// into the last bin.
inline ChromaBin quantize_chroma(const Chromaticity& x, int res) {
    return {quantize_axis(x.g, res), quantize_axis(octant_theta_norm(x.b, x.r), res)};
}

// Chromaticity at the (u, theta) midpoint of a bin; unit length by
// construction. Every channel is strictly positive for interior midpoints.
Chromaticity bin_center(ChromaBin bin, int res);

// min(floor(min(y,4)*5), 19). The 1/0.2 bin width is applied as an exact
// multiply by 5 so the scalar and SIMD paths agree bit-for-bit.
inline int quantize_luminance(double y) {
    const double clipped = std::min(y, kLumClip);
    const int idx = static_cast<int>(std::floor(clipped * 5.0));
    return std::min(std::max(idx, 0), kLumBins - 1);
}

}  // namespace chromcc
