#include "chromcc/model.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "chromcc/error.hpp"
#include "chromcc/kernels.hpp"
#include "chromcc/parallel.hpp"

namespace chromcc {

CandidateSet build_candidate_set(std::span<const Chromaticity> train_illums) {
    if (train_illums.empty()) {
        throw Error(Errc::empty_training_set, "candidate set needs at least one illuminant");
    }
    std::map<int, int> counts;  // flat 64x64 bin -> occurrences
    for (const Chromaticity& m : train_illums) {
        ++counts[flat_index(quantize_chroma(m, kIllumRes), kIllumRes)];
    }
    const double total = static_cast<double>(train_illums.size());
    CandidateSet set;
    set.chromas.reserve(counts.size());
    set.log_priors.reserve(counts.size());
    for (const auto& [flat, n] : counts) {
        set.chromas.push_back(bin_center(unflatten_bin(flat, kIllumRes), kIllumRes));
        set.log_priors.push_back(std::log(static_cast<double>(n) / total));
    }
    return set;
}

BeliefTable train_empirical(ImageProvider& images, std::span<const GroundTruth> gts,
                            double pseudo_count, int n_threads) {
    if (images.size() != gts.size()) {
        throw Error(Errc::length_mismatch, "image and ground-truth counts differ");
    }
    if (images.size() == 0) {
        throw Error(Errc::empty_training_set, "empirical training needs at least one image");
    }

    std::vector<std::uint64_t> counts(kTableCells, 0);
    for (std::size_t t = 0; t < images.size(); ++t) {
        const auto img = images.get(t);
        const GroundTruth& gt = gts[t];
        if (gt.illuminant.r <= 0.0 || gt.illuminant.g <= 0.0 || gt.illuminant.b <= 0.0) {
            throw Error(Errc::degenerate_illuminant, "ground truth has a non-positive channel");
        }
        const NormalizedLuminanceMap lum = normalize_luminance(*img);
        // g(v, m) = normalize(m^-1 o v): bin the true chromaticity against
        // the observed luminance.
        const RGB inv_gt{1.0 / gt.illuminant.r, 1.0 / gt.illuminant.g, 1.0 / gt.illuminant.b};

        const std::size_t n = img->pixel_count();
        std::vector<std::vector<std::uint32_t>> partial;
        const int workers = std::max(1, n_threads);
        partial.resize(workers);
        std::vector<std::pair<std::size_t, std::size_t>> ranges;
        {
            // Static partition mirrors parallel_for; per-worker dense
            // accumulators merge deterministically (integer adds commute).
            const std::size_t chunk = (n + workers - 1) / workers;
            for (int w = 0; w < workers; ++w) {
                const std::size_t lo = std::min(n, w * chunk);
                const std::size_t hi = std::min(n, lo + chunk);
                if (lo < hi) ranges.emplace_back(lo, hi);
            }
        }
        parallel_for(0, ranges.size(), workers, [&](std::size_t wlo, std::size_t whi) {
            for (std::size_t w = wlo; w < whi; ++w) {
                auto& local = partial[w];
                local.assign(kTableCells, 0);
                const auto [lo, hi] = ranges[w];
                kernels::ImageView view = img->view();
                view.r += lo;
                view.g += lo;
                view.b += lo;
                view.valid += lo;
                view.n = hi - lo;
                kernels::accumulate_histogram(view, inv_gt, lum.y.data() + lo, local.data());
            }
        });
        for (const auto& local : partial) {
            if (local.empty()) continue;
            for (std::size_t c = 0; c < kTableCells; ++c) counts[c] += local[c];
        }
    }

    BeliefTable table;
    for (int lum = 0; lum < kLumBins; ++lum) {
        double column_total = 0.0;
        for (int c = 0; c < kPixelBins; ++c) {
            column_total += static_cast<double>(counts[static_cast<std::size_t>(lum) * kPixelBins + c]) +
                            pseudo_count;
        }
        for (int c = 0; c < kPixelBins; ++c) {
            const double mass =
                static_cast<double>(counts[static_cast<std::size_t>(lum) * kPixelBins + c]) +
                pseudo_count;
            table.at(c, lum) = std::log(mass / column_total);
        }
    }
    return table;
}

ModelBundle fold_alpha(ModelBundle bundle) {
    for (double& v : bundle.table.cells()) v *= bundle.alpha;
    bundle.alpha = 1.0;
    return bundle;
}

// --- serialization -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'H', 'C', 'C'};
constexpr std::uint32_t kFormatVersion = 1;

const std::array<std::uint64_t, 256>& crc64_table() {
    static const std::array<std::uint64_t, 256> table = [] {
        // reflected ECMA-182 polynomial
        constexpr std::uint64_t poly = 0xC96C5795D7870F42ull;
        std::array<std::uint64_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint64_t crc = i;
            for (int bit = 0; bit < 8; ++bit) {
                crc = (crc & 1) ? (crc >> 1) ^ poly : crc >> 1;
            }
            t[i] = crc;
        }
        return t;
    }();
    return table;
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
    }

    void bytes(const void* data, std::size_t len) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        crc_ = crc64(data, len, crc_);
    }
    void u32(std::uint32_t v) {
        unsigned char buf[4];
        for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(buf, 4);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
        bytes(buf, 8);
    }
    void finish() {
        const std::uint64_t crc = crc_;
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(crc >> (8 * i));
        out_.write(reinterpret_cast<const char*>(buf), 8);
        out_.flush();
        if (!out_) throw Error(Errc::io_failure, "short write while serializing model");
    }

private:
    std::ofstream out_;
    std::uint64_t crc_ = 0;
};

class Reader {
public:
    explicit Reader(std::vector<unsigned char> data) : data_(std::move(data)) {}

    void need(std::size_t len) const {
        if (pos_ + len > data_.size()) {
            throw Error(Errc::checksum_mismatch, "model file truncated");
        }
    }
    void bytes(void* out, std::size_t len) {
        need(len);
        std::memcpy(out, data_.data() + pos_, len);
        pos_ += len;
    }
    std::uint32_t u32() {
        unsigned char buf[4];
        bytes(buf, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
        return v;
    }
    double f64() {
        unsigned char buf[8];
        bytes(buf, 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

private:
    std::vector<unsigned char> data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t crc64(const void* data, std::size_t length, std::uint64_t seed) {
    const auto& table = crc64_table();
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t crc = ~seed;
    for (std::size_t i = 0; i < length; ++i) {
        crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    }
    return ~crc;
}

void serialize_model(const ModelBundle& bundle, const std::filesystem::path& path) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(kPixelRes));
    w.u32(static_cast<std::uint32_t>(kLumBins));
    w.u32(static_cast<std::uint32_t>(bundle.candidates.size()));
    w.f64(bundle.alpha);
    w.f64(bundle.beta);
    for (const Chromaticity& m : bundle.candidates.chromas) {
        w.f64(m.r);
        w.f64(m.g);
        w.f64(m.b);
    }
    for (const double prior : bundle.candidates.log_priors) w.f64(prior);
    for (const double v : bundle.table.cells()) w.f64(v);
    w.finish();
}

ModelBundle deserialize_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::file_not_found, path.string());
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());

    if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
        throw Error(Errc::bad_magic, path.string() + " is not a model file");
    }
    if (data.size() < 12) throw Error(Errc::checksum_mismatch, "model file truncated");
    const std::size_t payload = data.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) {
        stored |= static_cast<std::uint64_t>(data[payload + i]) << (8 * i);
    }
    if (crc64(data.data(), payload) != stored) {
        throw Error(Errc::checksum_mismatch, "model file checksum mismatch in " + path.string());
    }
    data.resize(payload);

    Reader r(std::move(data));
    char magic[4];
    r.bytes(magic, 4);
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) {
        throw Error(Errc::version_mismatch,
                    "unsupported model version " + std::to_string(version));
    }
    const std::uint32_t res = r.u32();
    const std::uint32_t lum_bins = r.u32();
    if (res != static_cast<std::uint32_t>(kPixelRes) ||
        lum_bins != static_cast<std::uint32_t>(kLumBins)) {
        throw Error(Errc::version_mismatch, "unsupported table geometry in " + path.string());
    }
    const std::uint32_t m = r.u32();
    ModelBundle bundle;
    bundle.alpha = r.f64();
    bundle.beta = r.f64();
    bundle.candidates.chromas.resize(m);
    bundle.candidates.log_priors.resize(m);
    for (std::uint32_t i = 0; i < m; ++i) {
        Chromaticity c;
        c.r = r.f64();
        c.g = r.f64();
        c.b = r.f64();
        bundle.candidates.chromas[i] = c;
    }
    for (std::uint32_t i = 0; i < m; ++i) bundle.candidates.log_priors[i] = r.f64();
    for (double& v : bundle.table.cells()) v = r.f64();
    return bundle;
}

}  // namespace chromcc
