#pragma once

#include <cstddef>
#include <cstdint>

#include "chromcc/chroma.hpp"

namespace chromcc::kernels {

// Data-parallel inner loops of the inference path. Every kernel has a
// scalar reference implementation and an AVX2 variant selected at
// runtime; the binning kernels are bit-identical between backends
// (equivalence-tested), score summation agrees within rounding.
enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_available(Backend backend);
const char* backend_name(Backend backend);

// Planar, contiguous pixel storage. valid may be null (all pixels valid).
struct ImageView {
    const double* r = nullptr;
    const double* g = nullptr;
    const double* b = nullptr;
    const std::uint8_t* valid = nullptr;
    std::size_t n = 0;
};

// out[i] = (r*gains.r + g*gains.g) + b*gains.b, written for every pixel.
void luminance_l1(const ImageView& view, const RGB& gains, double* out,
                  Backend backend = active_backend());

// Packed cell index lum_bin*kPixelBins + chroma_flat per pixel, computed
// from the gain-scaled chromaticity at kPixelRes and the normalized
// luminance y_norm[i]; -1 for invalid or zero-norm pixels.
void pixel_cells(const ImageView& view, const RGB& chroma_gains, const double* y_norm,
                 std::int32_t* cells, Backend backend = active_backend());

// counts[cell]++ for every valid pixel; counts has kTableCells entries.
void accumulate_histogram(const ImageView& view, const RGB& chroma_gains, const double* y_norm,
                          std::uint32_t* counts, Backend backend = active_backend());

// sum_j count[j] * table[y_offset[j] + gmap_row[chroma_idx[j]]].
// Iteration is in index order; the AVX2 variant keeps four lanes that are
// folded in a fixed order, so each backend is reproducible run to run.
double score_cells(const std::int32_t* chroma_idx, const std::int32_t* y_offset,
                   const double* count, std::size_t n, const std::int32_t* gmap_row,
                   const double* table, Backend backend = active_backend());

}  // namespace chromcc::kernels
