// AVX2 variants of the binning and scoring kernels. Compiled with
// -mavx2 -mfma; only reached after the runtime cpuid check.
#include "kernels_backend.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace chromcc::kernels::detail {

namespace {

// atan(x)*(2/pi) on |x| <= tan(pi/8); same fma chain as the scalar path.
inline __m256d atan_norm_poly4(__m256d x) {
    const __m256d z = _mm256_mul_pd(x, x);
    __m256d acc = _mm256_set1_pd(chromcc::detail::kAtanCoeff[12]);
    for (int i = 11; i >= 0; --i) {
        acc = _mm256_fmadd_pd(acc, z, _mm256_set1_pd(chromcc::detail::kAtanCoeff[i]));
    }
    return _mm256_mul_pd(x, acc);
}

inline __m256d theta_norm4(__m256d xb, __m256d xr) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d swap_mask = _mm256_cmp_pd(xb, xr, _CMP_GT_OQ);
    const __m256d mn = _mm256_min_pd(xb, xr);
    const __m256d mx = _mm256_max_pd(xb, xr);
    const __m256d nonzero = _mm256_cmp_pd(mx, zero, _CMP_GT_OQ);
    const __m256d q = _mm256_blendv_pd(zero, _mm256_div_pd(mn, mx), nonzero);
    const __m256d t8 = _mm256_set1_pd(chromcc::detail::kTanPiOver8);
    const __m256d reduce_mask = _mm256_cmp_pd(q, t8, _CMP_GT_OQ);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d s_reduced =
        _mm256_div_pd(_mm256_sub_pd(q, one), _mm256_add_pd(q, one));
    const __m256d s = _mm256_blendv_pd(q, s_reduced, reduce_mask);
    const __m256d poly = atan_norm_poly4(s);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d base = _mm256_blendv_pd(poly, _mm256_add_pd(half, poly), reduce_mask);
    return _mm256_blendv_pd(base, _mm256_sub_pd(one, base), swap_mask);
}

inline __m128i quantize_axis4(__m256d t, int res) {
    const __m256d scaled = _mm256_mul_pd(t, _mm256_set1_pd(static_cast<double>(res)));
    const __m128i idx = _mm256_cvttpd_epi32(_mm256_floor_pd(scaled));
    const __m128i lo = _mm_max_epi32(idx, _mm_setzero_si128());
    return _mm_min_epi32(lo, _mm_set1_epi32(res - 1));
}

// Packed cell indices for 4 pixels; zero_mask reports zero-norm lanes
// that the caller must treat as invalid.
inline __m128i cells4(const double* r, const double* g, const double* b, const double* y,
                      __m256d wr, __m256d wg, __m256d wb, int* zero_mask) {
    const __m256d tr = _mm256_mul_pd(_mm256_loadu_pd(r), wr);
    const __m256d tg = _mm256_mul_pd(_mm256_loadu_pd(g), wg);
    const __m256d tb = _mm256_mul_pd(_mm256_loadu_pd(b), wb);
    const __m256d n2 = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(tr, tr), _mm256_mul_pd(tg, tg)), _mm256_mul_pd(tb, tb));
    *zero_mask = _mm256_movemask_pd(_mm256_cmp_pd(n2, _mm256_setzero_pd(), _CMP_EQ_OQ));
    const __m256d n = _mm256_sqrt_pd(n2);
    const __m256d xr = _mm256_div_pd(tr, n);
    const __m256d xg = _mm256_div_pd(tg, n);
    const __m256d xb = _mm256_div_pd(tb, n);
    const __m128i u_idx = quantize_axis4(xg, kPixelRes);
    const __m128i t_idx = quantize_axis4(theta_norm4(xb, xr), kPixelRes);

    const __m256d clipped = _mm256_min_pd(_mm256_loadu_pd(y), _mm256_set1_pd(kLumClip));
    const __m256d y5 = _mm256_mul_pd(clipped, _mm256_set1_pd(5.0));
    __m128i lum = _mm256_cvttpd_epi32(_mm256_floor_pd(y5));
    lum = _mm_max_epi32(lum, _mm_setzero_si128());
    lum = _mm_min_epi32(lum, _mm_set1_epi32(kLumBins - 1));

    const __m128i chroma =
        _mm_add_epi32(_mm_mullo_epi32(u_idx, _mm_set1_epi32(kPixelRes)), t_idx);
    return _mm_add_epi32(_mm_mullo_epi32(lum, _mm_set1_epi32(kPixelBins)), chroma);
}

}  // namespace

void luminance_l1_avx2(const ImageView& view, const RGB& gains, double* out) {
    const __m256d wr = _mm256_set1_pd(gains.r);
    const __m256d wg = _mm256_set1_pd(gains.g);
    const __m256d wb = _mm256_set1_pd(gains.b);
    std::size_t i = 0;
    for (; i + 4 <= view.n; i += 4) {
        const __m256d tr = _mm256_mul_pd(_mm256_loadu_pd(view.r + i), wr);
        const __m256d tg = _mm256_mul_pd(_mm256_loadu_pd(view.g + i), wg);
        const __m256d tb = _mm256_mul_pd(_mm256_loadu_pd(view.b + i), wb);
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_add_pd(tr, tg), tb));
    }
    for (; i < view.n; ++i) {
        out[i] = (view.r[i] * gains.r + view.g[i] * gains.g) + view.b[i] * gains.b;
    }
}

void pixel_cells_avx2(const ImageView& view, const RGB& chroma_gains, const double* y_norm,
                      std::int32_t* cells) {
    const __m256d wr = _mm256_set1_pd(chroma_gains.r);
    const __m256d wg = _mm256_set1_pd(chroma_gains.g);
    const __m256d wb = _mm256_set1_pd(chroma_gains.b);
    std::size_t i = 0;
    for (; i + 4 <= view.n; i += 4) {
        int zero_mask = 0;
        const __m128i packed =
            cells4(view.r + i, view.g + i, view.b + i, y_norm + i, wr, wg, wb, &zero_mask);
        _mm_storeu_si128(reinterpret_cast<__m128i*>(cells + i), packed);
        for (int k = 0; k < 4; ++k) {
            if ((view.valid && !view.valid[i + k]) || (zero_mask >> k) & 1) cells[i + k] = -1;
        }
    }
    for (; i < view.n; ++i) {
        cells[i] = (view.valid && !view.valid[i])
                       ? -1
                       : cell_of_pixel(view.r[i], view.g[i], view.b[i], chroma_gains, y_norm[i]);
    }
}

void accumulate_histogram_avx2(const ImageView& view, const RGB& chroma_gains,
                               const double* y_norm, std::uint32_t* counts) {
    const __m256d wr = _mm256_set1_pd(chroma_gains.r);
    const __m256d wg = _mm256_set1_pd(chroma_gains.g);
    const __m256d wb = _mm256_set1_pd(chroma_gains.b);
    alignas(16) std::int32_t tmp[4];
    std::size_t i = 0;
    for (; i + 4 <= view.n; i += 4) {
        int zero_mask = 0;
        const __m128i packed =
            cells4(view.r + i, view.g + i, view.b + i, y_norm + i, wr, wg, wb, &zero_mask);
        _mm_store_si128(reinterpret_cast<__m128i*>(tmp), packed);
        for (int k = 0; k < 4; ++k) {
            if (view.valid && !view.valid[i + k]) continue;
            if ((zero_mask >> k) & 1) continue;
            ++counts[tmp[k]];
        }
    }
    for (; i < view.n; ++i) {
        if (view.valid && !view.valid[i]) continue;
        const std::int32_t cell =
            cell_of_pixel(view.r[i], view.g[i], view.b[i], chroma_gains, y_norm[i]);
        if (cell >= 0) ++counts[cell];
    }
}

double score_cells_avx2(const std::int32_t* chroma_idx, const std::int32_t* y_offset,
                        const double* count, std::size_t n, const std::int32_t* gmap_row,
                        const double* table) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m128i ci = _mm_loadu_si128(reinterpret_cast<const __m128i*>(chroma_idx + j));
        const __m128i gi = _mm_i32gather_epi32(reinterpret_cast<const int*>(gmap_row), ci, 4);
        const __m128i yo = _mm_loadu_si128(reinterpret_cast<const __m128i*>(y_offset + j));
        const __m256d vals = _mm256_i32gather_pd(table, _mm_add_epi32(gi, yo), 8);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(count + j), vals, acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; j < n; ++j) {
        sum += count[j] * table[y_offset[j] + gmap_row[chroma_idx[j]]];
    }
    return sum;
}

}  // namespace chromcc::kernels::detail

#endif  // x86_64
