#include "chromcc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "chromcc/error.hpp"
#include "chromcc/kernels.hpp"
#include "chromcc/parallel.hpp"

namespace chromcc {

GMap build_gmap(const CandidateSet& candidates, int n_threads) {
    const std::size_t m = candidates.size();
    for (const Chromaticity& c : candidates.chromas) {
        if (c.r <= 0.0 || c.g <= 0.0 || c.b <= 0.0) {
            throw Error(Errc::degenerate_illuminant, "candidate with non-positive channel");
        }
    }
    std::vector<std::int32_t> entries(m * static_cast<std::size_t>(kPixelBins));
    parallel_for(0, m, n_threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const Chromaticity& cand = candidates.chromas[i];
            const RGB inv{1.0 / cand.r, 1.0 / cand.g, 1.0 / cand.b};
            std::int32_t* row = entries.data() + i * kPixelBins;
            for (int c = 0; c < kPixelBins; ++c) {
                const Chromaticity x = bin_center(unflatten_bin(c, kPixelRes), kPixelRes);
                const Chromaticity g =
                    chromaticity_of(RGB{x.r * inv.r, x.g * inv.g, x.b * inv.b});
                row[c] = flat_index(quantize_chroma(g, kPixelRes), kPixelRes);
            }
        }
    });
    return GMap(std::move(entries), m);
}

PixelHistogram histogram_from_counts(const std::uint32_t* counts) {
    PixelHistogram hist;
    std::size_t occupied = 0;
    for (std::size_t cell = 0; cell < kTableCells; ++cell) occupied += counts[cell] != 0;
    hist.chroma_idx.reserve(occupied);
    hist.y_offset.reserve(occupied);
    hist.count.reserve(occupied);
    for (int lum = 0; lum < kLumBins; ++lum) {
        const std::size_t base = static_cast<std::size_t>(lum) * kPixelBins;
        for (int c = 0; c < kPixelBins; ++c) {
            const std::uint32_t n = counts[base + c];
            if (n == 0) continue;
            hist.chroma_idx.push_back(c);
            hist.y_offset.push_back(static_cast<std::int32_t>(base));
            hist.count.push_back(static_cast<double>(n));
            hist.total += n;
        }
    }
    return hist;
}

PixelHistogram histogram_pixels(const LinearImage& img, const NormalizedLuminanceMap& lum,
                                int n_threads) {
    if (lum.y.size() != img.pixel_count()) {
        throw Error(Errc::dimension_mismatch, "luminance map does not match image");
    }
    const std::size_t n = img.pixel_count();
    const int workers = std::max(1, n_threads);
    std::vector<std::vector<std::uint32_t>> partial(workers);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = std::min(n, w * chunk);
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo < hi) ranges.emplace_back(lo, hi);
    }
    parallel_for(0, ranges.size(), workers, [&](std::size_t wlo, std::size_t whi) {
        for (std::size_t w = wlo; w < whi; ++w) {
            partial[w].assign(kTableCells, 0);
            const auto [lo, hi] = ranges[w];
            kernels::ImageView view = img.view();
            view.r += lo;
            view.g += lo;
            view.b += lo;
            view.valid += lo;
            view.n = hi - lo;
            kernels::accumulate_histogram(view, RGB{1.0, 1.0, 1.0}, lum.y.data() + lo,
                                          partial[w].data());
        }
    });
    std::vector<std::uint32_t> counts(kTableCells, 0);
    for (const auto& local : partial) {
        if (local.empty()) continue;
        for (std::size_t cell = 0; cell < kTableCells; ++cell) counts[cell] += local[cell];
    }
    PixelHistogram hist = histogram_from_counts(counts.data());
    if (hist.total == 0) throw Error(Errc::empty_image, "no valid pixels to histogram");
    return hist;
}

PixelHistogram histogram_from_cells(std::span<const std::int32_t> cells) {
    std::vector<std::uint32_t> counts(kTableCells, 0);
    std::uint64_t total = 0;
    for (const std::int32_t cell : cells) {
        if (cell < 0) continue;
        ++counts[cell];
        ++total;
    }
    if (total == 0) throw Error(Errc::empty_image, "no valid pixels to histogram");
    return histogram_from_counts(counts.data());
}

std::vector<double> score_candidates_raw(const PixelHistogram& hist, const BeliefTable& table,
                                         const GMap& gmap, int n_threads) {
    if (hist.total == 0) throw Error(Errc::empty_image, "empty histogram");
    const std::size_t m = gmap.candidate_count();
    std::vector<double> raw(m, 0.0);
    const double inv_n = 1.0 / static_cast<double>(hist.total);
    parallel_for(0, m, n_threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double sum = kernels::score_cells(hist.chroma_idx.data(), hist.y_offset.data(),
                                                    hist.count.data(), hist.size(), gmap.row(i),
                                                    table.data());
            raw[i] = sum * inv_n;
        }
    });
    return raw;
}

std::vector<double> score_candidates(const PixelHistogram& hist, const ModelBundle& bundle,
                                     const GMap& gmap, int n_threads) {
    std::vector<double> scores = score_candidates_raw(hist, bundle.table, gmap, n_threads);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = bundle.alpha * scores[i] + bundle.beta * bundle.candidates.log_priors[i];
    }
    return scores;
}

std::vector<double> posterior(std::span<const double> scores) {
    std::vector<double> p(scores.size());
    double max_score = -std::numeric_limits<double>::infinity();
    for (const double s : scores) max_score = std::max(max_score, s);
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - max_score);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

Chromaticity estimate_illuminant(std::span<const double> post, const CandidateSet& candidates) {
    if (post.size() != candidates.size()) {
        throw Error(Errc::length_mismatch, "posterior size does not match candidate count");
    }
    double r = 0.0, g = 0.0, b = 0.0;
    for (std::size_t i = 0; i < post.size(); ++i) {
        r += post[i] * candidates.chromas[i].r;
        g += post[i] * candidates.chromas[i].g;
        b += post[i] * candidates.chromas[i].b;
    }
    const double norm = std::sqrt((r * r + g * g) + b * b);
    if (norm == 0.0) {
        throw Error(Errc::degenerate_sum, "posterior-weighted candidate sum vanished");
    }
    return {r / norm, g / norm, b / norm};
}

EstimationResult estimate_image(const LinearImage& img, const ModelBundle& bundle,
                                const GMap& gmap, int n_threads) {
    const NormalizedLuminanceMap lum = normalize_luminance(img);
    const PixelHistogram hist = histogram_pixels(img, lum, n_threads);
    EstimationResult result;
    result.scores = score_candidates(hist, bundle, gmap, n_threads);
    result.post = posterior(result.scores);
    result.estimate = estimate_illuminant(result.post, bundle.candidates);
    return result;
}

DiagnosticMaps per_pixel_maps(const LinearImage& img, const NormalizedLuminanceMap& lum,
                              const ModelBundle& bundle, const GMap& gmap,
                              const GroundTruth& gt) {
    const std::size_t n = img.pixel_count();
    if (lum.y.size() != n) {
        throw Error(Errc::dimension_mismatch, "luminance map does not match image");
    }
    if (img.valid_count() == 0) throw Error(Errc::empty_image, "no valid pixels");

    std::vector<std::int32_t> cells(n);
    kernels::pixel_cells(img.view(), RGB{1.0, 1.0, 1.0}, lum.y.data(), cells.data());

    const std::size_t m = gmap.candidate_count();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    DiagnosticMaps maps;
    maps.error_deg.assign(n, nan);
    maps.variance.assign(n, nan);

    // Pixels sharing a (chroma, luminance) cell have identical scores;
    // memoize per cell.
    std::unordered_map<std::int32_t, std::pair<double, double>> memo;
    std::vector<double> scores(m);
    for (std::size_t px = 0; px < n; ++px) {
        const std::int32_t cell = cells[px];
        if (cell < 0) continue;
        const auto found = memo.find(cell);
        if (found != memo.end()) {
            maps.error_deg[px] = found->second.first;
            maps.variance[px] = found->second.second;
            continue;
        }
        const std::int32_t c = cell % kPixelBins;
        const std::int32_t y_off = cell - c;
        for (std::size_t i = 0; i < m; ++i) {
            scores[i] = bundle.alpha * bundle.table.data()[y_off + gmap.row(i)[c]] +
                        bundle.beta * bundle.candidates.log_priors[i];
        }
        const std::vector<double> p = posterior(scores);
        const Chromaticity est = estimate_illuminant(p, bundle.candidates);
        const double err = angular_error_deg(est, gt.illuminant);

        double mean = 0.0;
        for (const double s : scores) mean += s;
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (const double s : scores) var += (s - mean) * (s - mean);
        var /= static_cast<double>(m);

        memo.emplace(cell, std::make_pair(err, var));
        maps.error_deg[px] = err;
        maps.variance[px] = var;
    }
    return maps;
}

}  // namespace chromcc
