#pragma once

#include "chromcc/kernels.hpp"

namespace chromcc::kernels::detail {

// Reference per-pixel cell computation. The AVX2 kernels mirror this
// expression tree exactly (same operation order, fma only inside the
// atan polynomial), which is what makes the backends bit-identical.
inline std::int32_t cell_of_pixel(double r, double g, double b, const RGB& gains, double y) {
    const double tr = r * gains.r;
    const double tg = g * gains.g;
    const double tb = b * gains.b;
    const double n2 = (tr * tr + tg * tg) + tb * tb;
    if (n2 == 0.0) return -1;
    const double n = std::sqrt(n2);
    const double xr = tr / n;
    const double xg = tg / n;
    const double xb = tb / n;
    const int u_idx = quantize_axis(xg, kPixelRes);
    const int t_idx = quantize_axis(octant_theta_norm(xb, xr), kPixelRes);
    const int lum = quantize_luminance(y);
    return static_cast<std::int32_t>(lum * kPixelBins + (u_idx * kPixelRes + t_idx));
}

bool avx2_supported();

void luminance_l1_scalar(const ImageView& view, const RGB& gains, double* out);
void pixel_cells_scalar(const ImageView& view, const RGB& chroma_gains, const double* y_norm,
                        std::int32_t* cells);
void accumulate_histogram_scalar(const ImageView& view, const RGB& chroma_gains,
                                 const double* y_norm, std::uint32_t* counts);
double score_cells_scalar(const std::int32_t* chroma_idx, const std::int32_t* y_offset,
                          const double* count, std::size_t n, const std::int32_t* gmap_row,
                          const double* table);

#if defined(__x86_64__) || defined(_M_X64)
void luminance_l1_avx2(const ImageView& view, const RGB& gains, double* out);
void pixel_cells_avx2(const ImageView& view, const RGB& chroma_gains, const double* y_norm,
                      std::int32_t* cells);
void accumulate_histogram_avx2(const ImageView& view, const RGB& chroma_gains,
                               const double* y_norm, std::uint32_t* counts);
double score_cells_avx2(const std::int32_t* chroma_idx, const std::int32_t* y_offset,
                        const double* count, std::size_t n, const std::int32_t* gmap_row,
                        const double* table);
#endif

}  // namespace chromcc::kernels::detail
