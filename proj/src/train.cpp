#include "chromcc/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "chromcc/csv.hpp"
#include "chromcc/error.hpp"
#include "chromcc/kernels.hpp"
#include "chromcc/parallel.hpp"
#include "chromcc/rng.hpp"

namespace chromcc {

double median_l1_with_gains(const LinearImage& img, const RGB& gains) {
    const std::size_t n = img.pixel_count();
    std::vector<double> l1(n);
    kernels::luminance_l1(img.view(), gains, l1.data());
    std::vector<double> candidates;
    candidates.reserve(n);
    auto valid = img.valid();
    for (std::size_t i = 0; i < n; ++i) {
        if (valid[i] && l1[i] > 0.0) candidates.push_back(l1[i]);
    }
    if (candidates.empty()) throw Error(Errc::empty_image, "no valid pixel with positive luminance");
    const std::size_t mid = (candidates.size() - 1) / 2;
    std::nth_element(candidates.begin(), candidates.begin() + mid, candidates.end());
    return candidates[mid];
}

AugmentedData augment_dataset(ImageProvider& images, std::span<const GroundTruth> gts,
                              std::span<const Chromaticity> target_pool, const TrainConfig& cfg,
                              std::mt19937_64& rng) {
    if (images.size() != gts.size()) {
        throw Error(Errc::length_mismatch, "image and ground-truth counts differ");
    }
    const int n_targets = cfg.n_relight_train + cfg.n_relight_val;

    AugmentedData data;
    data.train.reserve(images.size() * static_cast<std::size_t>(cfg.n_relight_train + 1));
    data.validation.reserve(images.size() * static_cast<std::size_t>(cfg.n_relight_val));

    for (std::size_t t = 0; t < images.size(); ++t) {
        const GroundTruth& own = gts[t];
        if (own.illuminant.r <= 0.0 || own.illuminant.g <= 0.0 || own.illuminant.b <= 0.0) {
            throw Error(Errc::degenerate_illuminant, "training illuminant has non-positive channel");
        }

        // Distinct pool entries differing from this image's own illuminant.
        std::vector<Chromaticity> pool;
        std::set<std::tuple<double, double, double>> seen;
        for (const Chromaticity& m : target_pool) {
            if (m == own.illuminant) continue;
            if (seen.insert({m.r, m.g, m.b}).second) pool.push_back(m);
        }
        if (pool.size() < static_cast<std::size_t>(n_targets)) {
            throw Error(Errc::insufficient_illuminants,
                        "need " + std::to_string(n_targets) + " distinct relight targets, have " +
                            std::to_string(pool.size()));
        }
        rng::partial_shuffle(pool, static_cast<std::size_t>(n_targets), rng);

        const auto img = images.get(t);

        AugmentedInstance original;
        original.image_index = t;
        original.gt = own;
        original.median_l1 = median_l1_with_gains(*img, RGB{1.0, 1.0, 1.0});
        data.train.push_back(original);

        for (int j = 0; j < n_targets; ++j) {
            const Chromaticity& target = pool[static_cast<std::size_t>(j)];
            AugmentedInstance inst;
            inst.image_index = t;
            inst.gains = RGB{target.r / own.illuminant.r, target.g / own.illuminant.g,
                             target.b / own.illuminant.b};
            inst.gt = GroundTruth{target, own.raw_magnitude};
            inst.median_l1 = median_l1_with_gains(*img, inst.gains);
            if (j < cfg.n_relight_train) {
                data.train.push_back(inst);
            } else {
                data.validation.push_back(inst);
            }
        }
    }
    return data;
}

std::vector<std::uint32_t> subsample_pixels(const LinearImage& img, const TrainConfig& cfg,
                                            std::mt19937_64& rng) {
    const std::size_t n_valid = img.valid_count();
    if (n_valid == 0) throw Error(Errc::empty_image, "no valid pixels to subsample");

    const std::size_t patch_area =
        static_cast<std::size_t>(cfg.patch_size) * static_cast<std::size_t>(cfg.patch_size);
    const std::size_t denom = static_cast<std::size_t>(cfg.keep_denominator) * patch_area;
    std::size_t n_patches = (n_valid + denom - 1) / denom;

    const int gw = (img.width() + cfg.patch_size - 1) / cfg.patch_size;
    const int gh = (img.height() + cfg.patch_size - 1) / cfg.patch_size;
    const std::size_t n_cells = static_cast<std::size_t>(gw) * gh;
    n_patches = std::min(n_patches, n_cells);

    std::vector<std::uint32_t> grid(n_cells);
    std::iota(grid.begin(), grid.end(), 0u);
    rng::partial_shuffle(grid, n_patches, rng);

    std::vector<std::uint32_t> pixels;
    pixels.reserve(n_patches * patch_area);
    auto valid = img.valid();
    for (std::size_t p = 0; p < n_patches; ++p) {
        const int cell = static_cast<int>(grid[p]);
        const int x0 = (cell % gw) * cfg.patch_size;
        const int y0 = (cell / gw) * cfg.patch_size;
        const int x1 = std::min(x0 + cfg.patch_size, img.width());
        const int y1 = std::min(y0 + cfg.patch_size, img.height());
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const std::size_t idx = img.index(x, y);
                if (valid[idx]) pixels.push_back(static_cast<std::uint32_t>(idx));
            }
        }
    }
    return pixels;
}

namespace {

// Contiguous copy of a pixel subset so the batch kernels apply.
struct SubsetBuffers {
    std::vector<double> r, g, b, y;

    kernels::ImageView view() const {
        return {r.data(), g.data(), b.data(), nullptr, r.size()};
    }
};

SubsetBuffers gather_subset(const LinearImage& img, std::span<const std::uint32_t> pixels) {
    SubsetBuffers buf;
    const std::size_t n = pixels.size();
    buf.r.resize(n);
    buf.g.resize(n);
    buf.b.resize(n);
    buf.y.resize(n);
    const auto r = img.r(), g = img.g(), b = img.b();
    for (std::size_t j = 0; j < n; ++j) {
        buf.r[j] = r[pixels[j]];
        buf.g[j] = g[pixels[j]];
        buf.b[j] = b[pixels[j]];
    }
    return buf;
}

std::vector<double> candidate_errors(const CandidateSet& candidates, const GroundTruth& gt) {
    std::vector<double> err(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        err[i] = angular_error_deg(candidates.chromas[i], gt.illuminant);
    }
    return err;
}

}  // namespace

PixelHistogram instance_histogram(const LinearImage& img, const AugmentedInstance& inst,
                                  int n_threads) {
    const std::size_t n = img.pixel_count();
    std::vector<double> y(n);
    kernels::luminance_l1(img.view(), inst.gains, y.data());
    const double med = inst.median_l1;
    for (double& v : y) v /= med;

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
            kernels::ImageView view = img.view();
            const auto [lo, hi] = ranges[w];
            view.r += lo;
            view.g += lo;
            view.b += lo;
            view.valid += lo;
            view.n = hi - lo;
            kernels::accumulate_histogram(view, inst.gains, y.data() + lo, partial[w].data());
        }
    });
    std::vector<std::uint32_t> counts(kTableCells, 0);
    for (const auto& local : partial) {
        if (local.empty()) continue;
        for (std::size_t cell = 0; cell < kTableCells; ++cell) counts[cell] += local[cell];
    }
    PixelHistogram hist = histogram_from_counts(counts.data());
    if (hist.total == 0) throw Error(Errc::empty_image, "no valid pixels in instance");
    return hist;
}

CostResult image_cost(const LinearImage& img, const AugmentedInstance& inst,
                      std::span<const std::uint32_t> pixels, const ModelBundle& bundle,
                      const GMap& gmap) {
    if (pixels.empty()) throw Error(Errc::empty_image, "empty pixel subset");

    SubsetBuffers buf = gather_subset(img, pixels);
    kernels::luminance_l1(buf.view(), inst.gains, buf.y.data());
    const double med = inst.median_l1;
    for (double& v : buf.y) v /= med;

    std::vector<std::int32_t> cells(pixels.size());
    kernels::pixel_cells(buf.view(), inst.gains, buf.y.data(), cells.data());

    CostResult result;
    result.cells = histogram_from_cells(cells);
    result.scores = score_candidates(result.cells, bundle, gmap);
    result.post = posterior(result.scores);
    result.cand_err = candidate_errors(bundle.candidates, inst.gt);
    result.cost = 0.0;
    for (std::size_t i = 0; i < result.post.size(); ++i) {
        result.cost += result.cand_err[i] * result.post[i];
    }
    return result;
}

std::vector<double> score_gradient(std::span<const double> post, std::span<const double> err_deg,
                                   double cost) {
    std::vector<double> dl(post.size());
    for (std::size_t i = 0; i < post.size(); ++i) {
        dl[i] = post[i] * (err_deg[i] - cost);
    }
    return dl;
}

SparseGrad table_gradient(const PixelHistogram& cells, const GMap& gmap,
                          std::span<const double> dl, double alpha) {
    std::vector<double> dense(kTableCells, 0.0);
    std::vector<std::uint8_t> touched_mark(kTableCells, 0);
    SparseGrad grad;

    const double inv_n = 1.0 / static_cast<double>(cells.total);
    const std::size_t m = gmap.candidate_count();
    for (std::size_t i = 0; i < m; ++i) {
        const double w = alpha * dl[i] * inv_n;
        if (w == 0.0) continue;
        const std::int32_t* row = gmap.row(i);
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const std::int32_t target = cells.y_offset[j] + row[cells.chroma_idx[j]];
            dense[target] += w * cells.count[j];
            if (!touched_mark[target]) {
                touched_mark[target] = 1;
                grad.cell.push_back(target);
            }
        }
    }
    grad.value.reserve(grad.cell.size());
    for (const std::int32_t cell : grad.cell) grad.value.push_back(dense[cell]);
    return grad;
}

double sgd_step(ModelBundle& bundle, std::vector<double>& velocity, const LinearImage& img,
                const AugmentedInstance& inst, const GMap& gmap, const TrainConfig& cfg,
                double learning_rate, std::mt19937_64& rng) {
    const std::vector<std::uint32_t> pixels = subsample_pixels(img, cfg, rng);
    const CostResult cost = image_cost(img, inst, pixels, bundle, gmap);
    const std::vector<double> dl = score_gradient(cost.post, cost.cand_err, cost.cost);
    const SparseGrad grad = table_gradient(cost.cells, gmap, dl, bundle.alpha);

    // velocity = lr * grad + momentum * velocity; table -= velocity.
    const double mu = cfg.momentum;
    for (double& v : velocity) v *= mu;
    for (std::size_t j = 0; j < grad.cell.size(); ++j) {
        velocity[static_cast<std::size_t>(grad.cell[j])] += learning_rate * grad.value[j];
    }
    auto table = bundle.table.cells();
    for (std::size_t c = 0; c < table.size(); ++c) table[c] -= velocity[c];
    return cost.cost;
}

namespace {

struct ValidationStats {
    double mean = 0.0;
    double median = 0.0;
};

ValidationStats validate(const ModelBundle& bundle, const GMap& gmap, ImageProvider& images,
                         std::span<const AugmentedInstance> instances, int n_threads) {
    std::vector<double> errors(instances.size(), 0.0);
    parallel_for(0, instances.size(), n_threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t v = lo; v < hi; ++v) {
            const AugmentedInstance& inst = instances[v];
            const auto img = images.get(inst.image_index);
            const PixelHistogram hist = instance_histogram(*img, inst);
            const std::vector<double> scores = score_candidates(hist, bundle, gmap);
            const std::vector<double> p = posterior(scores);
            const Chromaticity est = estimate_illuminant(p, bundle.candidates);
            errors[v] = angular_error_deg(est, inst.gt.illuminant);
        }
    });
    ValidationStats stats;
    for (const double e : errors) stats.mean += e;
    stats.mean /= static_cast<double>(errors.size());
    std::vector<double> sorted = errors;
    const std::size_t mid = (sorted.size() - 1) / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    stats.median = sorted[mid];
    return stats;
}

}  // namespace

TrainResult sgd_train(const ModelBundle& init, ImageProvider& images, const AugmentedData& data,
                      const TrainConfig& cfg) {
    if (data.train.empty() || data.validation.empty()) {
        throw Error(Errc::empty_training_set, "need training and validation instances");
    }
    const GMap gmap = build_gmap(init.candidates, cfg.n_threads);

    ModelBundle bundle = init;
    std::vector<double> velocity(kTableCells, 0.0);
    std::mt19937_64 rng(cfg.rng_seed);

    const ValidationStats baseline = validate(bundle, gmap, images, data.validation, cfg.n_threads);

    TrainResult result;
    result.bundle = bundle;
    double best_val = std::numeric_limits<double>::infinity();

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path);
        log << "epoch,lr,train_cost_mean,val_mean_deg,val_median_deg,snapshot_path\n";
    }

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    int epoch = 0;
    for (const auto& [n_epochs, lr] : cfg.schedule) {
        for (int e = 0; e < n_epochs; ++e, ++epoch) {
            rng::shuffle(order, rng);
            double cost_sum = 0.0;
            for (const std::size_t idx : order) {
                const AugmentedInstance& inst = data.train[idx];
                const auto img = images.get(inst.image_index);
                cost_sum += sgd_step(bundle, velocity, *img, inst, gmap, cfg, lr, rng);
            }

            const ValidationStats val =
                validate(bundle, gmap, images, data.validation, cfg.n_threads);

            EpochStats stats;
            stats.epoch = epoch;
            stats.learning_rate = lr;
            stats.train_cost_mean = cost_sum / static_cast<double>(order.size());
            stats.val_mean_deg = val.mean;
            stats.val_median_deg = val.median;

            if (!cfg.checkpoint_dir.empty()) {
                std::filesystem::create_directories(cfg.checkpoint_dir);
                const auto path = cfg.checkpoint_dir / ("epoch_" + std::to_string(epoch) + ".chcc");
                serialize_model(bundle, path);
                stats.snapshot_path = path.string();
            }
            if (log.is_open()) {
                log << epoch << ',' << csv::format_double(lr) << ','
                    << csv::format_double(stats.train_cost_mean) << ','
                    << csv::format_double(stats.val_mean_deg) << ','
                    << csv::format_double(stats.val_median_deg) << ',' << stats.snapshot_path
                    << '\n';
            }
            result.epochs.push_back(stats);

            if (val.mean > cfg.divergence_factor * baseline.mean) {
                throw Error(Errc::divergence_detected,
                            "validation mean " + std::to_string(val.mean) + " deg exceeds " +
                                std::to_string(cfg.divergence_factor) + "x baseline " +
                                std::to_string(baseline.mean) + " deg at epoch " +
                                std::to_string(epoch));
            }
            if (val.mean < best_val) {
                best_val = val.mean;
                result.bundle = bundle;
            }
        }
    }
    result.bundle.provenance.mode = "end-to-end";
    return result;
}

}  // namespace chromcc
