#include "chromcc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "chromcc/csv.hpp"
#include "chromcc/error.hpp"
#include "chromcc/parallel.hpp"

namespace chromcc {

Dataset load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::file_not_found, path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::io_failure, "bad manifest " + path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& rel) { return base / rel; };

    if (!doc.contains("cameras") || !doc.contains("ground_truth")) {
        throw Error(Errc::io_failure,
                    "manifest needs 'cameras' and 'ground_truth' entries: " + path.string());
    }

    Dataset dataset;
    dataset.image_dir = resolve(doc.value("image_dir", std::string(".")));
    const auto cameras = load_cameras_csv(resolve(doc.at("cameras").get<std::string>()));
    const auto gts = load_ground_truth_csv(resolve(doc.at("ground_truth").get<std::string>()));
    std::map<std::string, std::vector<MaskRect>> masks;
    if (doc.contains("masks")) {
        masks = load_masks_csv(resolve(doc.at("masks").get<std::string>()));
    }

    for (const auto& [filename, record] : cameras) {  // std::map iterates sorted by filename
        DatasetEntry entry;
        entry.filename = filename;
        entry.camera = record.camera;
        entry.black_level = record.black_level;
        const auto gt = gts.find(filename);
        if (gt == gts.end()) {
            throw Error(Errc::missing_file, "no ground truth for " + filename);
        }
        entry.gt = gt->second;
        const auto mask = masks.find(filename);
        if (mask != masks.end()) entry.masks = mask->second;
        dataset.entries.push_back(std::move(entry));
    }
    if (dataset.entries.empty()) {
        throw Error(Errc::empty_training_set, "manifest lists no images: " + path.string());
    }
    return dataset;
}

LinearImage load_entry(const Dataset& dataset, std::size_t index) {
    const DatasetEntry& entry = dataset.entries.at(index);
    const auto path = dataset.image_dir / entry.filename;
    if (!std::filesystem::exists(path)) {
        throw Error(Errc::missing_file, "manifest entry has no file on disk: " + path.string());
    }
    LinearImage img = load_linear_image(path, entry.camera, entry.black_level);
    apply_checker_mask(img, entry.masks);
    return img;
}

std::shared_ptr<const LinearImage> DiskImageProvider::get(std::size_t index) {
    std::lock_guard<std::mutex> lock(mutex_);
    ++tick_;
    const auto found = cache_.find(index);
    if (found != cache_.end()) {
        found->second.second = tick_;
        return found->second.first;
    }
    auto img = std::make_shared<const LinearImage>(load_entry(dataset_, index));
    if (cache_.size() >= capacity_ && capacity_ > 0) {
        auto oldest = cache_.begin();
        for (auto it = cache_.begin(); it != cache_.end(); ++it) {
            if (it->second.second < oldest->second.second) oldest = it;
        }
        cache_.erase(oldest);
    }
    if (capacity_ > 0) cache_.emplace(index, std::make_pair(img, tick_));
    return img;
}

std::vector<std::size_t> FoldSpec::test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldSpec::train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != fold) out.push_back(i);
    }
    return out;
}

FoldSpec make_folds(const Dataset& dataset, int k) {
    std::map<CameraId, std::vector<std::size_t>> per_camera;
    for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
        per_camera[dataset.entries[i].camera].push_back(i);
    }
    std::size_t min_count = dataset.entries.size();
    for (const auto& [camera, indices] : per_camera) {
        min_count = std::min(min_count, indices.size());
    }
    if (k < 2 || static_cast<std::size_t>(k) > min_count) {
        throw Error(Errc::bad_k, "k must be in [2, min per-camera image count]");
    }

    FoldSpec spec;
    spec.k = k;
    spec.assignment.assign(dataset.entries.size(), -1);
    for (const auto& [camera, indices] : per_camera) {
        const std::size_t n = indices.size();
        const std::size_t base = n / static_cast<std::size_t>(k);
        const std::size_t rem = n % static_cast<std::size_t>(k);
        std::size_t pos = 0;
        for (int f = 0; f < k; ++f) {
            const std::size_t run = base + (static_cast<std::size_t>(f) < rem ? 1 : 0);
            for (std::size_t j = 0; j < run; ++j) spec.assignment[indices[pos++]] = f;
        }
    }
    return spec;
}

double percentile_inclusive(std::span<const double> sorted_values, double q) {
    const std::size_t n = sorted_values.size();
    if (n == 0) return 0.0;
    if (n == 1) return sorted_values[0];
    const double h = (static_cast<double>(n) - 1.0) * q / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= n) return sorted_values[n - 1];
    const double frac = h - std::floor(h);
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

ErrorReport make_report(std::vector<double> errors_deg) {
    if (errors_deg.empty()) throw Error(Errc::empty_training_set, "no errors to aggregate");
    ErrorReport report;
    report.errors_deg = std::move(errors_deg);
    double sum = 0.0;
    for (const double e : report.errors_deg) sum += e;
    report.mean = sum / static_cast<double>(report.errors_deg.size());

    std::vector<double> sorted = report.errors_deg;
    std::sort(sorted.begin(), sorted.end());
    report.median = sorted[(sorted.size() - 1) / 2];  // lower median
    report.p25 = percentile_inclusive(sorted, 25.0);
    report.p75 = percentile_inclusive(sorted, 75.0);
    report.p90 = percentile_inclusive(sorted, 90.0);
    const double p50 = percentile_inclusive(sorted, 50.0);
    report.trimean = (report.p25 + 2.0 * p50 + report.p75) / 4.0;
    return report;
}

ErrorReport evaluate(std::span<const Chromaticity> estimates, std::span<const GroundTruth> gts) {
    if (estimates.size() != gts.size()) {
        throw Error(Errc::length_mismatch, "estimate and ground-truth counts differ");
    }
    std::vector<double> errors(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        errors[i] = angular_error_deg(estimates[i], gts[i].illuminant);
    }
    return make_report(std::move(errors));
}

GridSpec GridSpec::defaults() {
    GridSpec grid;
    for (int e = -4; e <= 6; ++e) grid.alphas.push_back(std::ldexp(1.0, e));
    grid.betas = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
    return grid;
}

std::pair<double, double> grid_search_ab(ImageProvider& images, std::span<const GroundTruth> gts,
                                         const BeliefTable& table, const CandidateSet& candidates,
                                         const GMap& gmap, const GridSpec& grid, int n_threads) {
    if (grid.alphas.empty() || grid.betas.empty()) {
        throw Error(Errc::bad_arguments, "empty grid");
    }
    const std::size_t n_images = images.size();
    const std::size_t m = candidates.size();

    // Raw per-candidate sums are alpha/beta independent; compute once.
    std::vector<std::vector<double>> raw(n_images);
    parallel_for(0, n_images, n_threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t t = lo; t < hi; ++t) {
            const auto img = images.get(t);
            const NormalizedLuminanceMap lum = normalize_luminance(*img);
            const PixelHistogram hist = histogram_pixels(*img, lum);
            raw[t] = score_candidates_raw(hist, table, gmap);
        }
    });

    double best_mean = std::numeric_limits<double>::infinity();
    std::pair<double, double> best{grid.alphas.front(), grid.betas.front()};
    std::vector<double> scores(m);
    for (const double alpha : grid.alphas) {
        for (const double beta : grid.betas) {
            double err_sum = 0.0;
            for (std::size_t t = 0; t < n_images; ++t) {
                for (std::size_t i = 0; i < m; ++i) {
                    scores[i] = alpha * raw[t][i] + beta * candidates.log_priors[i];
                }
                const std::vector<double> p = posterior(scores);
                const Chromaticity est = estimate_illuminant(p, candidates);
                err_sum += angular_error_deg(est, gts[t].illuminant);
            }
            const double mean = err_sum / static_cast<double>(n_images);
            if (mean < best_mean) {
                best_mean = mean;
                best = {alpha, beta};
            }
        }
    }
    return best;
}

// --- cross-validation ----------------------------------------------------

namespace {

std::string mode_name(CrossvalMode mode) {
    return mode == CrossvalMode::empirical ? "empirical" : "e2e";
}

// Input fingerprint for resumable folds: covers the split, the seeds, the
// estimation parameters, and every entry's identity and ground truth.
std::string fold_fingerprint(const Dataset& dataset, const FoldSpec& folds, int fold,
                             const CrossvalConfig& cfg) {
    std::ostringstream ss;
    ss << "k=" << cfg.k << ";fold=" << fold << ";mode=" << mode_name(cfg.mode)
       << ";seed=" << cfg.seed << ";pseudo=" << csv::format_double(cfg.pseudo_count)
       << ";grid_search=" << cfg.grid_search;
    if (!cfg.grid_search) {
        ss << ";alpha=" << csv::format_double(cfg.alpha) << ";beta=" << csv::format_double(cfg.beta);
    }
    for (const double a : cfg.grid.alphas) ss << ",a" << csv::format_double(a);
    for (const double b : cfg.grid.betas) ss << ",b" << csv::format_double(b);
    if (cfg.mode == CrossvalMode::end_to_end) {
        ss << ";mu=" << csv::format_double(cfg.train.momentum);
        for (const auto& [n, lr] : cfg.train.schedule) {
            ss << ",s" << n << "x" << csv::format_double(lr);
        }
        ss << ";relight=" << cfg.train.n_relight_train << "+" << cfg.train.n_relight_val
           << ";patch=" << cfg.train.patch_size << "/" << cfg.train.keep_denominator;
    }
    for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
        const DatasetEntry& e = dataset.entries[i];
        ss << "\n" << folds.assignment[i] << "|" << e.filename << "|" << camera_id_name(e.camera)
           << "|" << e.black_level << "|" << csv::format_double(e.gt.illuminant.r) << ","
           << csv::format_double(e.gt.illuminant.g) << "," << csv::format_double(e.gt.illuminant.b);
        for (const MaskRect& m : e.masks) {
            ss << "|m" << m.x0 << "," << m.y0 << "," << m.x1 << "," << m.y1;
        }
    }
    const std::string payload = ss.str();
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(crc64(payload.data(), payload.size())));
    return hex;
}

std::optional<std::string> read_small_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) {
        content.pop_back();
    }
    return content;
}

}  // namespace

void write_estimates_csv(const std::filesystem::path& path,
                         std::span<const PerImageEstimate> estimates) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
    out << "filename,r,g,b,angular_error_deg\n";
    for (const PerImageEstimate& e : estimates) {
        out << e.filename << ',' << csv::format_double(e.estimate.r) << ','
            << csv::format_double(e.estimate.g) << ',' << csv::format_double(e.estimate.b) << ','
            << csv::format_double(e.error_deg) << '\n';
    }
}

std::vector<PerImageEstimate> read_estimates_csv(const std::filesystem::path& path) {
    const auto rows = csv::read_rows(path);
    std::vector<PerImageEstimate> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 && csv::looks_like_header(rows[i])) continue;
        if (rows[i].size() < 4) {
            throw Error(Errc::io_failure, "estimate row needs filename,r,g,b in " + path.string());
        }
        PerImageEstimate e;
        e.filename = rows[i][0];
        e.estimate.r = csv::parse_double(rows[i][1], path.string());
        e.estimate.g = csv::parse_double(rows[i][2], path.string());
        e.estimate.b = csv::parse_double(rows[i][3], path.string());
        if (rows[i].size() >= 5) e.error_deg = csv::parse_double(rows[i][4], path.string());
        out.push_back(std::move(e));
    }
    return out;
}

void write_report_csv(const std::filesystem::path& path, const ErrorReport& report) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
    out << "stat,value\n";
    out << "mean," << csv::format_double(report.mean) << '\n';
    out << "median," << csv::format_double(report.median) << '\n';
    out << "trimean," << csv::format_double(report.trimean) << '\n';
    out << "p25," << csv::format_double(report.p25) << '\n';
    out << "p75," << csv::format_double(report.p75) << '\n';
    out << "p90," << csv::format_double(report.p90) << '\n';
    out << "count," << report.errors_deg.size() << '\n';
}

std::string format_report_table(const ErrorReport& report) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "  %-9s %-9s %-9s %-9s %-9s %-9s\n"
                  "  %-9.2f %-9.2f %-9.2f %-9.2f %-9.2f %-9.2f\n",
                  "Mean", "Median", "Tri-mean", "25%-ile", "75%-ile", "90%-ile", report.mean,
                  report.median, report.trimean, report.p25, report.p75, report.p90);
    return buf;
}

CrossvalResult run_crossval(const Dataset& dataset, const CrossvalConfig& cfg) {
    const FoldSpec folds = make_folds(dataset, cfg.k);
    std::filesystem::create_directories(cfg.out_dir);
    {
        std::ofstream out(cfg.out_dir / "folds.csv");
        out << "filename,fold\n";
        for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
            out << dataset.entries[i].filename << ',' << folds.assignment[i] << '\n';
        }
    }

    DiskImageProvider provider(dataset, cfg.cache_capacity);
    std::vector<PerImageEstimate> pooled(dataset.entries.size());

    for (int fold = 0; fold < cfg.k; ++fold) {
        const auto fold_dir = cfg.out_dir / ("fold_" + std::to_string(fold));
        std::filesystem::create_directories(fold_dir);
        const std::string fingerprint = fold_fingerprint(dataset, folds, fold, cfg);
        const auto meta_path = fold_dir / "meta.txt";
        const auto estimates_path = fold_dir / "estimates.csv";
        const auto model_path = fold_dir / "model.chcc";

        const std::vector<std::size_t> test_idx = folds.test_indices(fold);
        const std::vector<std::size_t> train_idx = folds.train_indices(fold);

        if (cfg.resume && read_small_file(meta_path) == fingerprint &&
            std::filesystem::exists(estimates_path) && std::filesystem::exists(model_path)) {
            const auto cached = read_estimates_csv(estimates_path);
            if (cached.size() == test_idx.size()) {
                for (std::size_t j = 0; j < cached.size(); ++j) pooled[test_idx[j]] = cached[j];
                continue;
            }
        }

        SubsetImageProvider train_view(provider, train_idx);
        std::vector<GroundTruth> train_gts;
        std::vector<Chromaticity> train_illums;
        train_gts.reserve(train_idx.size());
        for (const std::size_t i : train_idx) {
            train_gts.push_back(dataset.entries[i].gt);
            train_illums.push_back(dataset.entries[i].gt.illuminant);
        }

        ModelBundle bundle;
        bundle.table = train_empirical(train_view, train_gts, cfg.pseudo_count, cfg.n_threads);
        bundle.candidates = build_candidate_set(train_illums);
        bundle.provenance = {"fold " + std::to_string(fold) + " of " + std::to_string(cfg.k),
                             "empirical"};
        const GMap gmap = build_gmap(bundle.candidates, cfg.n_threads);

        if (cfg.grid_search) {
            const auto [alpha, beta] = grid_search_ab(train_view, train_gts, bundle.table,
                                                      bundle.candidates, gmap, cfg.grid,
                                                      cfg.n_threads);
            bundle.alpha = alpha;
            bundle.beta = beta;
        } else {
            bundle.alpha = cfg.alpha;
            bundle.beta = cfg.beta;
        }
        serialize_model(bundle, model_path);

        if (cfg.mode == CrossvalMode::end_to_end) {
            // Distinct streams per fold for augmentation and SGD.
            const std::uint64_t fold_seed =
                cfg.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(fold + 1);
            TrainConfig tcfg = cfg.train;
            tcfg.rng_seed = fold_seed + 1;
            tcfg.n_threads = cfg.n_threads;
            tcfg.log_path = fold_dir / "train_log.csv";

            std::mt19937_64 aug_rng(fold_seed);
            const AugmentedData aug =
                augment_dataset(train_view, train_gts, train_illums, tcfg, aug_rng);
            ModelBundle folded = fold_alpha(bundle);
            folded.provenance.mode = "end-to-end";
            TrainResult trained = sgd_train(folded, train_view, aug, tcfg);
            bundle = std::move(trained.bundle);
            serialize_model(bundle, fold_dir / "model_e2e.chcc");
        }

        std::vector<PerImageEstimate> fold_estimates(test_idx.size());
        parallel_for(0, test_idx.size(), cfg.n_threads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t j = lo; j < hi; ++j) {
                const std::size_t gidx = test_idx[j];
                const auto img = provider.get(gidx);
                const EstimationResult est = estimate_image(*img, bundle, gmap);
                PerImageEstimate record;
                record.filename = dataset.entries[gidx].filename;
                record.estimate = est.estimate;
                record.error_deg =
                    angular_error_deg(est.estimate, dataset.entries[gidx].gt.illuminant);
                fold_estimates[j] = std::move(record);
            }
        });
        for (std::size_t j = 0; j < test_idx.size(); ++j) pooled[test_idx[j]] = fold_estimates[j];
        write_estimates_csv(estimates_path, fold_estimates);
        std::ofstream meta(meta_path);
        meta << fingerprint << '\n';
    }

    CrossvalResult result;
    result.estimates = std::move(pooled);
    std::vector<double> errors;
    errors.reserve(result.estimates.size());
    for (const PerImageEstimate& e : result.estimates) errors.push_back(e.error_deg);
    result.report = make_report(std::move(errors));

    write_estimates_csv(cfg.out_dir / "estimates.csv", result.estimates);
    write_report_csv(cfg.out_dir / "report.csv", result.report);
    return result;
}

}  // namespace chromcc
