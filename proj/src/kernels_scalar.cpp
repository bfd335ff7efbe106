#include "kernels_backend.hpp"

namespace chromcc::kernels::detail {

void luminance_l1_scalar(const ImageView& view, const RGB& gains, double* out) {
    for (std::size_t i = 0; i < view.n; ++i) {
        out[i] = (view.r[i] * gains.r + view.g[i] * gains.g) + view.b[i] * gains.b;
    }
}

void pixel_cells_scalar(const ImageView& view, const RGB& chroma_gains, const double* y_norm,
                        std::int32_t* cells) {
    for (std::size_t i = 0; i < view.n; ++i) {
        if (view.valid && !view.valid[i]) {
            cells[i] = -1;
            continue;
        }
        cells[i] = cell_of_pixel(view.r[i], view.g[i], view.b[i], chroma_gains, y_norm[i]);
    }
}

void accumulate_histogram_scalar(const ImageView& view, const RGB& chroma_gains,
                                 const double* y_norm, std::uint32_t* counts) {
    for (std::size_t i = 0; i < view.n; ++i) {
        if (view.valid && !view.valid[i]) continue;
        const std::int32_t cell =
            cell_of_pixel(view.r[i], view.g[i], view.b[i], chroma_gains, y_norm[i]);
        if (cell >= 0) ++counts[cell];
    }
}

double score_cells_scalar(const std::int32_t* chroma_idx, const std::int32_t* y_offset,
                          const double* count, std::size_t n, const std::int32_t* gmap_row,
                          const double* table) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        acc += count[j] * table[y_offset[j] + gmap_row[chroma_idx[j]]];
    }
    return acc;
}

}  // namespace chromcc::kernels::detail
