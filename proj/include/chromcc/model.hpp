#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chromcc/chroma.hpp"
#include "chromcc/image.hpp"

namespace chromcc {

// Quantized illuminant candidates m_i (centers of occupied 64x64 u-theta
// bins) with log-priors b_i = log(n_i / T). exp(b_i) sums to one.
struct CandidateSet {
    std::vector<Chromaticity> chromas;
    std::vector<double> log_priors;

    std::size_t size() const { return chromas.size(); }

    friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

CandidateSet build_candidate_set(std::span<const Chromaticity> train_illums);

// Log-likelihood table L[chroma_bin, lum_bin], 2^14 x 20 doubles stored
// luminance-major so inference streams one luminance column contiguously.
class BeliefTable {
public:
    BeliefTable() : values_(kTableCells, 0.0) {}

    double at(int chroma_flat, int lum) const {
        return values_[static_cast<std::size_t>(lum) * kPixelBins + chroma_flat];
    }
    double& at(int chroma_flat, int lum) {
        return values_[static_cast<std::size_t>(lum) * kPixelBins + chroma_flat];
    }

    std::span<double> cells() { return values_; }
    std::span<const double> cells() const { return values_; }
    const double* data() const { return values_.data(); }

    friend bool operator==(const BeliefTable&, const BeliefTable&) = default;

private:
    std::vector<double> values_;
};

// Training-fold descriptor and mode tag. Kept in memory only; the model
// file format is pinned and does not carry it.
struct Provenance {
    std::string fold;
    std::string mode;  // "empirical" | "end-to-end"
};

struct ModelBundle {
    BeliefTable table;
    CandidateSet candidates;
    double alpha = 1.0;
    double beta = 1.0;
    Provenance provenance;

    friend bool operator==(const ModelBundle& a, const ModelBundle& b) {
        return a.table == b.table && a.candidates == b.candidates && a.alpha == b.alpha &&
               b.beta == a.beta;
    }
};

// Empirical table: per valid pixel, the true chromaticity g(v, m_gt) is
// binned at kPixelRes against the observed luminance bin; pseudo_count is
// added to every cell before per-column normalization, and the table
// holds the log of the normalized column. pseudo_count = 0 reproduces the
// raw log-histogram (empty cells become -inf).
BeliefTable train_empirical(ImageProvider& images, std::span<const GroundTruth> gts,
                            double pseudo_count = 1.0, int n_threads = 1);

// Folds alpha into the table and resets it to 1, as end-to-end training
// expects.
ModelBundle fold_alpha(ModelBundle bundle);

// Model file: magic "CHCC", u32 version, u32 chroma resolution, u32
// luminance bins, u32 M, f64 alpha, f64 beta, Mx3 f64 candidates, M f64
// priors, 2^14 x 20 f64 table (luminance-major), trailing CRC-64 of all
// preceding bytes. Little-endian throughout.
void serialize_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle deserialize_model(const std::filesystem::path& path);

// CRC-64/XZ (ECMA-182 polynomial, reflected, inverted in and out).
std::uint64_t crc64(const void* data, std::size_t length, std::uint64_t seed = 0);

}  // namespace chromcc
