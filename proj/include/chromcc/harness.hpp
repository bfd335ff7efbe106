#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chromcc/inference.hpp"
#include "chromcc/train.hpp"

namespace chromcc {

struct DatasetEntry {
    std::string filename;
    CameraId camera = CameraId::unknown;
    int black_level = 0;
    GroundTruth gt;
    std::vector<MaskRect> masks;
};

// Entries are sorted by filename; folds depend on this order.
struct Dataset {
    std::filesystem::path image_dir;
    std::vector<DatasetEntry> entries;
};

// JSON manifest: {"image_dir": ..., "cameras": ..., "ground_truth": ...,
// "masks": ...} with paths relative to the manifest location; "masks" is
// optional. The cameras CSV is the definitive image listing.
Dataset load_manifest(const std::filesystem::path& path);

// Loads one entry with black-level correction and its checker mask applied.
LinearImage load_entry(const Dataset& dataset, std::size_t index);

// Thread-safe LRU decode cache over a Dataset.
class DiskImageProvider : public ImageProvider {
public:
    DiskImageProvider(const Dataset& dataset, std::size_t cache_capacity = 16)
        : dataset_(dataset), capacity_(cache_capacity) {}

    std::shared_ptr<const LinearImage> get(std::size_t index) override;
    std::size_t size() const override { return dataset_.entries.size(); }

private:
    const Dataset& dataset_;
    std::size_t capacity_;
    std::mutex mutex_;
    std::uint64_t tick_ = 0;
    std::map<std::size_t, std::pair<std::shared_ptr<const LinearImage>, std::uint64_t>> cache_;
};

// Per-camera contiguous split (images ordered by filename) into k runs
// whose sizes differ by at most one, larger runs first. Fold f's test set
// is the union of each camera's f-th run.
struct FoldSpec {
    int k = 0;
    std::vector<int> assignment;  // fold index per dataset entry

    std::vector<std::size_t> test_indices(int fold) const;
    std::vector<std::size_t> train_indices(int fold) const;
};

FoldSpec make_folds(const Dataset& dataset, int k);

// Quantiles of the per-image angular errors. median is the lower order
// statistic; percentiles use inclusive linear interpolation; tri-mean is
// Tukey's (P25 + 2*P50 + P75) / 4 with the interpolated P50.
struct ErrorReport {
    std::vector<double> errors_deg;
    double mean = 0.0;
    double median = 0.0;
    double trimean = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double p90 = 0.0;
};

double percentile_inclusive(std::span<const double> sorted_values, double q);
ErrorReport make_report(std::vector<double> errors_deg);
ErrorReport evaluate(std::span<const Chromaticity> estimates, std::span<const GroundTruth> gts);

struct GridSpec {
    std::vector<double> alphas;  // default 2^-4 .. 2^6, 11 log-spaced values
    std::vector<double> betas;   // default {0, 0.25, 0.5, 1, 2, 4}

    static GridSpec defaults();
};

// Minimizes mean angular error over the given images; ties break toward
// smaller alpha, then smaller beta.
std::pair<double, double> grid_search_ab(ImageProvider& images, std::span<const GroundTruth> gts,
                                         const BeliefTable& table, const CandidateSet& candidates,
                                         const GMap& gmap, const GridSpec& grid,
                                         int n_threads = 1);

enum class CrossvalMode { empirical, end_to_end };

struct CrossvalConfig {
    int k = 3;
    CrossvalMode mode = CrossvalMode::empirical;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    bool resume = false;
    bool grid_search = true;
    double alpha = 1.0;  // used when grid_search is off
    double beta = 1.0;
    double pseudo_count = 1.0;
    GridSpec grid = GridSpec::defaults();
    TrainConfig train;  // end-to-end stage parameters
    int n_threads = 1;
    std::size_t cache_capacity = 16;
};

struct PerImageEstimate {
    std::string filename;
    Chromaticity estimate;
    double error_deg = 0.0;
};

struct CrossvalResult {
    ErrorReport report;
    std::vector<PerImageEstimate> estimates;  // dataset order
};

// Per fold: empirical table + candidates from the training folds, grid
// search, optional end-to-end training (augmentation and validation from
// the training folds only), then estimation of every test-fold image.
// Artifacts land under out_dir/fold_<f>/ and are reused on resume when
// the fold's input fingerprint matches.
CrossvalResult run_crossval(const Dataset& dataset, const CrossvalConfig& cfg);

void write_estimates_csv(const std::filesystem::path& path,
                         std::span<const PerImageEstimate> estimates);
std::vector<PerImageEstimate> read_estimates_csv(const std::filesystem::path& path);
void write_report_csv(const std::filesystem::path& path, const ErrorReport& report);
std::string format_report_table(const ErrorReport& report);

}  // namespace chromcc
