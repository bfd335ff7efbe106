#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chromcc/chroma.hpp"
#include "chromcc/kernels.hpp"

namespace chromcc {

enum class CameraId { unknown, canon_1d, canon_5d };

CameraId camera_id_from_string(const std::string& name);
const char* camera_id_name(CameraId id);

// Axis-aligned rectangle, inclusive-exclusive: [x0, x1) x [y0, y1).
struct MaskRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Black-level-corrected linear RGB raster with a validity mask. Pixels
// are stored as planar doubles; invalid pixels (checker chart, saturated
// or zero-intensity sensor sites) never influence medians, histograms or
// scores. Immutable in spirit after construction: the estimation path
// only ever reads it, so instances are freely shared across workers.
class LinearImage {
public:
    LinearImage() = default;
    LinearImage(int width, int height, CameraId camera = CameraId::unknown);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return r_.size(); }
    CameraId camera() const { return camera_; }

    std::span<const double> r() const { return r_; }
    std::span<const double> g() const { return g_; }
    std::span<const double> b() const { return b_; }
    std::span<double> r() { return r_; }
    std::span<double> g() { return g_; }
    std::span<double> b() { return b_; }
    std::span<const std::uint8_t> valid() const { return valid_; }
    std::span<std::uint8_t> valid() { return valid_; }

    RGB pixel(std::size_t i) const { return {r_[i], g_[i], b_[i]}; }
    void set_pixel(std::size_t i, const RGB& v) { r_[i] = v.r; g_[i] = v.g; b_[i] = v.b; }
    bool is_valid(std::size_t i) const { return valid_[i] != 0; }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
    std::size_t valid_count() const;

    kernels::ImageView view() const {
        return {r_.data(), g_.data(), b_.data(), valid_.data(), r_.size()};
    }

private:
    int width_ = 0, height_ = 0;
    CameraId camera_ = CameraId::unknown;
    std::vector<double> r_, g_, b_;
    std::vector<std::uint8_t> valid_;
};

// The illuminant color of the gray squares: L2-normalized chromaticity
// plus the L1 magnitude of the unnormalized color, kept for provenance.
struct GroundTruth {
    Chromaticity illuminant;
    double raw_magnitude = 0.0;
};

// y(n) = ||v(n)||_1 / median over valid pixels; median_l1 > 0.
struct NormalizedLuminanceMap {
    std::vector<double> y;
    double median_l1 = 0.0;
};

// Loads a 16-bit linear raster (PNG or binary PPM P6 with maxval 65535),
// subtracts the black level (clamping at zero), and marks near-saturated
// (any raw channel >= 0.98 * maxval) and zero-intensity pixels invalid.
LinearImage load_linear_image(const std::filesystem::path& path, CameraId camera,
                              int black_level);

// valid_mask := false inside every rectangle; pixel data unchanged.
void apply_checker_mask(LinearImage& img, std::span<const MaskRect> rects);

NormalizedLuminanceMap normalize_luminance(const LinearImage& img);

// Diagonal-model relight: v' = new_illum o (gt.illuminant^-1 o v),
// applied as one per-channel gain. The returned ground truth carries
// new_illum; the validity mask is copied.
std::pair<LinearImage, GroundTruth> relight(const LinearImage& img, const GroundTruth& gt,
                                            const Chromaticity& new_illum);

// x = m^-1 o v, rescaled so the maximum channel value is preserved
// (absolute scale is unidentifiable).
LinearImage correct_image(const LinearImage& img, const Chromaticity& estimate);

// --- dataset sidecar files ---------------------------------------------

// CSV `filename,r,g,b` with the unnormalized gray-square color.
std::map<std::string, GroundTruth> load_ground_truth_csv(const std::filesystem::path& path);

// CSV `filename,x0,y0,x1,y1`, one rectangle per row.
std::map<std::string, std::vector<MaskRect>> load_masks_csv(const std::filesystem::path& path);

struct CameraRecord {
    CameraId camera = CameraId::unknown;
    int black_level = 0;
};

// CSV `filename,camera_id,black_level`.
std::map<std::string, CameraRecord> load_cameras_csv(const std::filesystem::path& path);

// --- raster output ------------------------------------------------------

void write_png16_gray(const std::filesystem::path& path, std::span<const std::uint16_t> pixels,
                      int width, int height);
void write_png16_rgb(const std::filesystem::path& path, std::span<const std::uint16_t> interleaved,
                     int width, int height);
void write_ppm16(const std::filesystem::path& path, const LinearImage& img, double scale = 1.0);

// --- image access for streaming training --------------------------------

class ImageProvider {
public:
    virtual ~ImageProvider() = default;
    virtual std::shared_ptr<const LinearImage> get(std::size_t index) = 0;
    virtual std::size_t size() const = 0;
};

class MemoryImageProvider : public ImageProvider {
public:
    MemoryImageProvider() = default;
    explicit MemoryImageProvider(std::vector<std::shared_ptr<const LinearImage>> images)
        : images_(std::move(images)) {}

    void add(LinearImage img) {
        images_.push_back(std::make_shared<const LinearImage>(std::move(img)));
    }

    std::shared_ptr<const LinearImage> get(std::size_t index) override { return images_.at(index); }
    std::size_t size() const override { return images_.size(); }

private:
    std::vector<std::shared_ptr<const LinearImage>> images_;
};

// Re-indexes a subset of another provider (e.g. one training fold).
class SubsetImageProvider : public ImageProvider {
public:
    SubsetImageProvider(ImageProvider& base, std::vector<std::size_t> indices)
        : base_(base), indices_(std::move(indices)) {}

    std::shared_ptr<const LinearImage> get(std::size_t index) override {
        return base_.get(indices_.at(index));
    }
    std::size_t size() const override { return indices_.size(); }

private:
    ImageProvider& base_;
    std::vector<std::size_t> indices_;
};

}  // namespace chromcc
