#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chromcc/image.hpp"
#include "chromcc/model.hpp"

namespace chromcc {

// Precomputed true-chromaticity lookup: entry (c, i) is the kPixelRes bin
// of g(bin_center(c), m_i) = normalize(m_i^-1 o bin_center(c)). Stored
// candidate-major so scoring one candidate streams a contiguous row.
class GMap {
public:
    GMap() = default;
    GMap(std::vector<std::int32_t> entries, std::size_t candidates)
        : entries_(std::move(entries)), m_(candidates) {}

    const std::int32_t* row(std::size_t candidate) const {
        return entries_.data() + candidate * kPixelBins;
    }
    std::int32_t at(int chroma_flat, std::size_t candidate) const {
        return row(candidate)[chroma_flat];
    }
    std::size_t candidate_count() const { return m_; }

private:
    std::vector<std::int32_t> entries_;
    std::size_t m_ = 0;
};

GMap build_gmap(const CandidateSet& candidates, int n_threads = 1);

// Occupied (chroma bin, luminance bin) cells of one image, in cell-index
// order (luminance-major). Scoring iterates these in a fixed order, which
// keeps the reduction bit-reproducible for a fixed backend.
struct PixelHistogram {
    std::vector<std::int32_t> chroma_idx;
    std::vector<std::int32_t> y_offset;  // lum_bin * kPixelBins
    std::vector<double> count;
    std::uint64_t total = 0;  // number of contributing pixels

    std::size_t size() const { return chroma_idx.size(); }
};

PixelHistogram histogram_pixels(const LinearImage& img, const NormalizedLuminanceMap& lum,
                                int n_threads = 1);

// Compacts packed per-pixel cell indices (lum*kPixelBins + chroma, -1
// skipped) into a histogram.
PixelHistogram histogram_from_cells(std::span<const std::int32_t> cells);

// Compacts a dense kTableCells count array into cell-index order.
PixelHistogram histogram_from_counts(const std::uint32_t* counts);

// l_i = (alpha/N) * sum count * L[gmap[c,i], y] + beta * b_i. Equals the
// per-pixel Eq. summation with the additions grouped by cell.
std::vector<double> score_candidates(const PixelHistogram& hist, const ModelBundle& bundle,
                                     const GMap& gmap, int n_threads = 1);

// (1/N) * sum count * L[gmap[c,i], y], without alpha/beta; the grid
// search recombines these cheaply.
std::vector<double> score_candidates_raw(const PixelHistogram& hist, const BeliefTable& table,
                                         const GMap& gmap, int n_threads = 1);

// Max-subtracted softmax.
std::vector<double> posterior(std::span<const double> scores);

// Posterior-weighted mean of candidate chromaticities, L2-normalized.
Chromaticity estimate_illuminant(std::span<const double> post, const CandidateSet& candidates);

struct EstimationResult {
    std::vector<double> scores;
    std::vector<double> post;
    Chromaticity estimate;
};

EstimationResult estimate_image(const LinearImage& img, const ModelBundle& bundle,
                                const GMap& gmap, int n_threads = 1);

// Per-pixel diagnostics from single-pixel scores (prior included once per
// pixel): angular error of the pixel's own estimate against gt, and the
// population variance of its score vector. Invalid pixels hold NaN.
struct DiagnosticMaps {
    std::vector<double> error_deg;
    std::vector<double> variance;
};

DiagnosticMaps per_pixel_maps(const LinearImage& img, const NormalizedLuminanceMap& lum,
                              const ModelBundle& bundle, const GMap& gmap, const GroundTruth& gt);

}  // namespace chromcc
