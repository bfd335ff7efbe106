#include "chromcc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "chromcc/csv.hpp"
#include "chromcc/error.hpp"

namespace chromcc {

namespace {

constexpr double kSaturationFraction = 0.98;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct Raw16 {
    int width = 0, height = 0;
    int maxval = 65535;
    std::vector<std::uint16_t> samples;  // interleaved RGB
};

Raw16 read_png16(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw Error(Errc::file_not_found, path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(Errc::io_failure, "libpng initialization failed");
    }

    Raw16 raw;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(Errc::unsupported_format, "failed to decode PNG " + path.string());
    }

    png_init_io(png, file.get());
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(Errc::unsupported_format,
                    path.string() + ": expected 16-bit RGB PNG, got depth " +
                        std::to_string(bit_depth) + " color type " + std::to_string(color_type));
    }
    png_set_swap(png);  // PNG stores big-endian samples

    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.samples.resize(static_cast<std::size_t>(raw.width) * raw.height * 3);
    row_ptrs.resize(raw.height);
    for (int y = 0; y < raw.height; ++y) {
        row_ptrs[y] = reinterpret_cast<png_bytep>(raw.samples.data() +
                                                  static_cast<std::size_t>(y) * raw.width * 3);
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

int ppm_next_token(std::FILE* f, char* buf, int cap) {
    int c;
    do {
        c = std::fgetc(f);
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(f);
        }
    } while (c != EOF && std::isspace(c));
    int len = 0;
    while (c != EOF && !std::isspace(c) && len + 1 < cap) {
        buf[len++] = static_cast<char>(c);
        c = std::fgetc(f);
    }
    buf[len] = '\0';
    return len;
}

Raw16 read_ppm16(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw Error(Errc::file_not_found, path.string());

    char tok[32];
    if (!ppm_next_token(file.get(), tok, sizeof(tok)) || std::strcmp(tok, "P6") != 0) {
        throw Error(Errc::unsupported_format, path.string() + ": not a P6 PPM");
    }
    Raw16 raw;
    if (!ppm_next_token(file.get(), tok, sizeof(tok))) {
        throw Error(Errc::unsupported_format, path.string() + ": truncated PPM header");
    }
    raw.width = std::atoi(tok);
    if (!ppm_next_token(file.get(), tok, sizeof(tok))) {
        throw Error(Errc::unsupported_format, path.string() + ": truncated PPM header");
    }
    raw.height = std::atoi(tok);
    if (!ppm_next_token(file.get(), tok, sizeof(tok))) {
        throw Error(Errc::unsupported_format, path.string() + ": truncated PPM header");
    }
    raw.maxval = std::atoi(tok);
    if (raw.width <= 0 || raw.height <= 0) {
        throw Error(Errc::dimension_mismatch, path.string() + ": bad PPM dimensions");
    }
    if (raw.maxval != 65535) {
        throw Error(Errc::unsupported_format,
                    path.string() + ": PPM maxval must be 65535, got " + std::to_string(raw.maxval));
    }

    const std::size_t n_samples = static_cast<std::size_t>(raw.width) * raw.height * 3;
    std::vector<std::uint8_t> bytes(n_samples * 2);
    if (std::fread(bytes.data(), 1, bytes.size(), file.get()) != bytes.size()) {
        throw Error(Errc::dimension_mismatch, path.string() + ": PPM pixel data truncated");
    }
    raw.samples.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        raw.samples[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    }
    return raw;
}

bool has_png_signature(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::file_not_found, path.string());
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    static const unsigned char kPng[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return in.gcount() == 8 && std::memcmp(sig, kPng, 8) == 0;
}

}  // namespace

CameraId camera_id_from_string(const std::string& name) {
    if (name == "canon_1d") return CameraId::canon_1d;
    if (name == "canon_5d") return CameraId::canon_5d;
    return CameraId::unknown;
}

const char* camera_id_name(CameraId id) {
    switch (id) {
    case CameraId::canon_1d: return "canon_1d";
    case CameraId::canon_5d: return "canon_5d";
    default: return "unknown";
    }
}

LinearImage::LinearImage(int width, int height, CameraId camera)
    : width_(width), height_(height), camera_(camera) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    r_.assign(n, 0.0);
    g_.assign(n, 0.0);
    b_.assign(n, 0.0);
    valid_.assign(n, 1);
}

std::size_t LinearImage::valid_count() const {
    std::size_t n = 0;
    for (const std::uint8_t v : valid_) n += v != 0;
    return n;
}

LinearImage load_linear_image(const std::filesystem::path& path, CameraId camera,
                              int black_level) {
    if (!std::filesystem::exists(path)) throw Error(Errc::file_not_found, path.string());
    const Raw16 raw = has_png_signature(path) ? read_png16(path) : read_ppm16(path);

    LinearImage img(raw.width, raw.height, camera);
    const double saturation = kSaturationFraction * static_cast<double>(raw.maxval);
    const double black = static_cast<double>(black_level);
    auto r = img.r();
    auto g = img.g();
    auto b = img.b();
    auto valid = img.valid();
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const double rr = raw.samples[3 * i + 0];
        const double rg = raw.samples[3 * i + 1];
        const double rb = raw.samples[3 * i + 2];
        r[i] = std::max(rr - black, 0.0);
        g[i] = std::max(rg - black, 0.0);
        b[i] = std::max(rb - black, 0.0);
        // Clipped channels break the diagonal model; zero pixels carry no
        // chromaticity.
        const bool saturated = rr >= saturation || rg >= saturation || rb >= saturation;
        const bool zero = r[i] + g[i] + b[i] == 0.0;
        valid[i] = saturated || zero ? 0 : 1;
    }
    return img;
}

void apply_checker_mask(LinearImage& img, std::span<const MaskRect> rects) {
    for (const MaskRect& rect : rects) {
        if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 > img.width() || rect.y1 > img.height() ||
            rect.x0 > rect.x1 || rect.y0 > rect.y1) {
            throw Error(Errc::out_of_bounds, "mask rectangle outside image bounds");
        }
        auto valid = img.valid();
        for (int y = rect.y0; y < rect.y1; ++y) {
            for (int x = rect.x0; x < rect.x1; ++x) {
                valid[img.index(x, y)] = 0;
            }
        }
    }
}

NormalizedLuminanceMap normalize_luminance(const LinearImage& img) {
    const std::size_t n = img.pixel_count();
    NormalizedLuminanceMap map;
    map.y.assign(n, 0.0);
    kernels::luminance_l1(img.view(), RGB{1.0, 1.0, 1.0}, map.y.data());

    std::vector<double> candidates;
    candidates.reserve(n);
    auto valid = img.valid();
    for (std::size_t i = 0; i < n; ++i) {
        if (valid[i] && map.y[i] > 0.0) candidates.push_back(map.y[i]);
    }
    if (candidates.empty()) {
        throw Error(Errc::empty_image, "no valid pixel with positive luminance");
    }
    // Lower median for even counts.
    const std::size_t mid = (candidates.size() - 1) / 2;
    std::nth_element(candidates.begin(), candidates.begin() + mid, candidates.end());
    map.median_l1 = candidates[mid];
    const double med = map.median_l1;
    for (std::size_t i = 0; i < n; ++i) map.y[i] /= med;
    return map;
}

std::pair<LinearImage, GroundTruth> relight(const LinearImage& img, const GroundTruth& gt,
                                            const Chromaticity& new_illum) {
    if (gt.illuminant.r <= 0.0 || gt.illuminant.g <= 0.0 || gt.illuminant.b <= 0.0) {
        throw Error(Errc::degenerate_illuminant, "relight requires positive illuminant channels");
    }
    const RGB gains{new_illum.r / gt.illuminant.r, new_illum.g / gt.illuminant.g,
                    new_illum.b / gt.illuminant.b};
    LinearImage out = img;
    auto r = out.r();
    auto g = out.g();
    auto b = out.b();
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        r[i] *= gains.r;
        g[i] *= gains.g;
        b[i] *= gains.b;
    }
    return {std::move(out), GroundTruth{new_illum, gt.raw_magnitude}};
}

LinearImage correct_image(const LinearImage& img, const Chromaticity& estimate) {
    if (estimate.r <= 0.0 || estimate.g <= 0.0 || estimate.b <= 0.0) {
        throw Error(Errc::degenerate_illuminant, "correction requires positive illuminant channels");
    }
    LinearImage out = img;
    auto r = out.r();
    auto g = out.g();
    auto b = out.b();
    double max_before = 0.0;
    double max_after = 0.0;
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        max_before = std::max({max_before, r[i], g[i], b[i]});
        r[i] /= estimate.r;
        g[i] /= estimate.g;
        b[i] /= estimate.b;
        max_after = std::max({max_after, r[i], g[i], b[i]});
    }
    if (max_after > 0.0) {
        const double scale = max_before / max_after;
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
            r[i] *= scale;
            g[i] *= scale;
            b[i] *= scale;
        }
    }
    return out;
}

std::map<std::string, GroundTruth> load_ground_truth_csv(const std::filesystem::path& path) {
    std::map<std::string, GroundTruth> out;
    const auto rows = csv::read_rows(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 && csv::looks_like_header(rows[i])) continue;
        if (rows[i].size() != 4) {
            throw Error(Errc::io_failure, "ground truth row needs filename,r,g,b in " + path.string());
        }
        const RGB raw{csv::parse_double(rows[i][1], path.string()),
                      csv::parse_double(rows[i][2], path.string()),
                      csv::parse_double(rows[i][3], path.string())};
        GroundTruth gt;
        gt.illuminant = chromaticity_of(raw);
        gt.raw_magnitude = raw.r + raw.g + raw.b;
        out[rows[i][0]] = gt;
    }
    return out;
}

std::map<std::string, std::vector<MaskRect>> load_masks_csv(const std::filesystem::path& path) {
    std::map<std::string, std::vector<MaskRect>> out;
    const auto rows = csv::read_rows(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 && csv::looks_like_header(rows[i])) continue;
        if (rows[i].size() != 5) {
            throw Error(Errc::io_failure, "mask row needs filename,x0,y0,x1,y1 in " + path.string());
        }
        MaskRect rect;
        rect.x0 = static_cast<int>(csv::parse_long(rows[i][1], path.string()));
        rect.y0 = static_cast<int>(csv::parse_long(rows[i][2], path.string()));
        rect.x1 = static_cast<int>(csv::parse_long(rows[i][3], path.string()));
        rect.y1 = static_cast<int>(csv::parse_long(rows[i][4], path.string()));
        out[rows[i][0]].push_back(rect);
    }
    return out;
}

std::map<std::string, CameraRecord> load_cameras_csv(const std::filesystem::path& path) {
    std::map<std::string, CameraRecord> out;
    const auto rows = csv::read_rows(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 && csv::looks_like_header(rows[i])) continue;
        if (rows[i].size() != 3) {
            throw Error(Errc::io_failure,
                        "camera row needs filename,camera_id,black_level in " + path.string());
        }
        CameraRecord rec;
        rec.camera = camera_id_from_string(rows[i][1]);
        rec.black_level = static_cast<int>(csv::parse_long(rows[i][2], path.string()));
        out[rows[i][0]] = rec;
    }
    return out;
}

namespace {

void write_png16(const std::filesystem::path& path, const std::uint16_t* data, int width,
                 int height, int color_type, int channels) {
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(Errc::io_failure, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(Errc::io_failure, "failed to write PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, 16, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) {
        rows[y] = reinterpret_cast<png_bytep>(
            const_cast<std::uint16_t*>(data + static_cast<std::size_t>(y) * width * channels));
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png16_gray(const std::filesystem::path& path, std::span<const std::uint16_t> pixels,
                      int width, int height) {
    if (pixels.size() != static_cast<std::size_t>(width) * height) {
        throw Error(Errc::dimension_mismatch, "gray raster size does not match dimensions");
    }
    write_png16(path, pixels.data(), width, height, PNG_COLOR_TYPE_GRAY, 1);
}

void write_png16_rgb(const std::filesystem::path& path, std::span<const std::uint16_t> interleaved,
                     int width, int height) {
    if (interleaved.size() != static_cast<std::size_t>(width) * height * 3) {
        throw Error(Errc::dimension_mismatch, "rgb raster size does not match dimensions");
    }
    write_png16(path, interleaved.data(), width, height, PNG_COLOR_TYPE_RGB, 3);
}

void write_ppm16(const std::filesystem::path& path, const LinearImage& img, double scale) {
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
    std::fprintf(file.get(), "P6\n%d %d\n65535\n", img.width(), img.height());
    const std::size_t n = img.pixel_count();
    std::vector<std::uint8_t> bytes(n * 6);
    auto encode = [&](std::size_t sample_idx, double value) {
        const double scaled = std::clamp(std::round(value * scale), 0.0, 65535.0);
        const auto v = static_cast<std::uint16_t>(scaled);
        bytes[2 * sample_idx] = static_cast<std::uint8_t>(v >> 8);
        bytes[2 * sample_idx + 1] = static_cast<std::uint8_t>(v & 0xFF);
    };
    for (std::size_t i = 0; i < n; ++i) {
        encode(3 * i + 0, img.r()[i]);
        encode(3 * i + 1, img.g()[i]);
        encode(3 * i + 2, img.b()[i]);
    }
    if (std::fwrite(bytes.data(), 1, bytes.size(), file.get()) != bytes.size()) {
        throw Error(Errc::io_failure, "short write to " + path.string());
    }
}

}  // namespace chromcc
