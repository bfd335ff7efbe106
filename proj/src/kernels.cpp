#include "chromcc/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kernels_backend.hpp"

namespace chromcc::kernels {

namespace detail {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

Backend detect_backend() {
    // CHROMCC_SIMD=scalar|avx2 overrides detection (used by the
    // equivalence tests and for debugging).
    if (const char* env = std::getenv("CHROMCC_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
        if (std::strcmp(env, "auto") != 0) return Backend::scalar;
    }
    return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

}  // namespace

}  // namespace detail

Backend active_backend() {
    static const Backend backend = detail::detect_backend();
    return backend;
}

bool backend_available(Backend backend) {
    return backend == Backend::scalar || detail::avx2_supported();
}

const char* backend_name(Backend backend) {
    return backend == Backend::avx2 ? "avx2" : "scalar";
}

void luminance_l1(const ImageView& view, const RGB& gains, double* out, Backend backend) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend == Backend::avx2) {
        detail::luminance_l1_avx2(view, gains, out);
        return;
    }
#endif
    detail::luminance_l1_scalar(view, gains, out);
}

void pixel_cells(const ImageView& view, const RGB& chroma_gains, const double* y_norm,
                 std::int32_t* cells, Backend backend) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend == Backend::avx2) {
        detail::pixel_cells_avx2(view, chroma_gains, y_norm, cells);
        return;
    }
#endif
    detail::pixel_cells_scalar(view, chroma_gains, y_norm, cells);
}

void accumulate_histogram(const ImageView& view, const RGB& chroma_gains, const double* y_norm,
                          std::uint32_t* counts, Backend backend) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend == Backend::avx2) {
        detail::accumulate_histogram_avx2(view, chroma_gains, y_norm, counts);
        return;
    }
#endif
    detail::accumulate_histogram_scalar(view, chroma_gains, y_norm, counts);
}

double score_cells(const std::int32_t* chroma_idx, const std::int32_t* y_offset,
                   const double* count, std::size_t n, const std::int32_t* gmap_row,
                   const double* table, Backend backend) {
#if defined(__x86_64__) || defined(_M_X64)
    if (backend == Backend::avx2) {
        return detail::score_cells_avx2(chroma_idx, y_offset, count, n, gmap_row, table);
    }
#endif
    return detail::score_cells_scalar(chroma_idx, y_offset, count, n, gmap_row, table);
}

}  // namespace chromcc::kernels
