#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "chromcc/inference.hpp"

namespace chromcc {

struct TrainConfig {
    double momentum = 0.9;
    // (epochs, learning rate) stages, run in order.
    std::vector<std::pair<int, double>> schedule = {{20, 100.0}, {10, 10.0}};
    int patch_size = 16;
    int keep_denominator = 128;  // retain ~1/128 of the pixels per step
    int n_relight_train = 6;
    int n_relight_val = 1;
    std::uint64_t rng_seed = 0;
    double divergence_factor = 4.0;
    int n_threads = 1;
    std::filesystem::path checkpoint_dir;  // per-epoch model files when set
    std::filesystem::path log_path;        // epoch CSV log when set
};

// One training instance: an image index plus the per-channel relight
// gains that produce it (unit gains for the original), its ground truth,
// and the median L1 luminance of the gained image.
struct AugmentedInstance {
    std::size_t image_index = 0;
    RGB gains{1.0, 1.0, 1.0};
    GroundTruth gt;
    double median_l1 = 0.0;
};

struct AugmentedData {
    std::vector<AugmentedInstance> train;
    std::vector<AugmentedInstance> validation;
};

// Median of the gain-scaled L1 luminance over valid pixels.
double median_l1_with_gains(const LinearImage& img, const RGB& gains);

// Original plus n_relight_train relit copies per image for training and
// one more distinct relit copy for validation. Relight targets are drawn
// without replacement from the distinct pool entries that differ from the
// image's own illuminant; targets are sampled once and fixed.
AugmentedData augment_dataset(ImageProvider& images, std::span<const GroundTruth> gts,
                              std::span<const Chromaticity> target_pool, const TrainConfig& cfg,
                              std::mt19937_64& rng);

// ceil(N_valid / (keep_denominator * patch_size^2)) distinct 16x16
// grid-aligned patches, clipped at the image border; returns the valid
// pixel indices inside them.
std::vector<std::uint32_t> subsample_pixels(const LinearImage& img, const TrainConfig& cfg,
                                            std::mt19937_64& rng);

// Observed-cell histogram of a full instance (gains applied to both
// chromaticity and luminance, luminance normalized by the instance
// median).
PixelHistogram instance_histogram(const LinearImage& img, const AugmentedInstance& inst,
                                  int n_threads = 1);

struct CostResult {
    double cost = 0.0;              // expected angular error, degrees
    std::vector<double> scores;     // l_i
    std::vector<double> post;       // p_i
    std::vector<double> cand_err;   // e_i = angular_error(m_i, gt), degrees
    PixelHistogram cells;
};

CostResult image_cost(const LinearImage& img, const AugmentedInstance& inst,
                      std::span<const std::uint32_t> pixels, const ModelBundle& bundle,
                      const GMap& gmap);

// dl_i = p_i (e_i - C); sums to zero up to rounding.
std::vector<double> score_gradient(std::span<const double> post, std::span<const double> err_deg,
                                   double cost);

struct SparseGrad {
    std::vector<std::int32_t> cell;  // flat table index, discovery order
    std::vector<double> value;
};

// dC/dL accumulated over (cell, candidate) pairs: each histogram cell
// adds (alpha/N) * count * dl_i into table cell (gmap[c,i], y).
SparseGrad table_gradient(const PixelHistogram& cells, const GMap& gmap,
                          std::span<const double> dl, double alpha);

// One SGD step on one instance: subsample, cost, gradient, momentum
// update of table and velocity in place. Returns the step cost.
double sgd_step(ModelBundle& bundle, std::vector<double>& velocity, const LinearImage& img,
                const AugmentedInstance& inst, const GMap& gmap, const TrainConfig& cfg,
                double learning_rate, std::mt19937_64& rng);

struct EpochStats {
    int epoch = 0;
    double learning_rate = 0.0;
    double train_cost_mean = 0.0;
    double val_mean_deg = 0.0;
    double val_median_deg = 0.0;
    std::string snapshot_path;
};

struct TrainResult {
    ModelBundle bundle;  // epoch snapshot with the lowest validation mean
    std::vector<EpochStats> epochs;
};

// Momentum SGD over shuffled instances, one image per step; velocity
// persists across epochs and schedule stages. Validation runs on full
// images after each epoch; throws DivergenceDetected when the validation
// mean exceeds divergence_factor times its pre-training value.
TrainResult sgd_train(const ModelBundle& init, ImageProvider& images, const AugmentedData& data,
                      const TrainConfig& cfg);

}  // namespace chromcc
