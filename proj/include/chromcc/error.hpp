#pragma once

#include <stdexcept>
#include <string>

namespace chromcc {

enum class Errc {
    zero_vector,
    file_not_found,
    unsupported_format,
    dimension_mismatch,
    out_of_bounds,
    empty_image,
    degenerate_illuminant,
    empty_training_set,
    io_failure,
    bad_magic,
    version_mismatch,
    checksum_mismatch,
    insufficient_illuminants,
    divergence_detected,
    bad_k,
    length_mismatch,
    missing_file,
    degenerate_sum,
    bad_arguments,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

    // Process exit code contract: 2 bad arguments, 3 data error, 4 divergence.
    int exit_code() const {
        switch (code_) {
        case Errc::bad_arguments: return 2;
        case Errc::divergence_detected: return 4;
        default: return 3;
        }
    }

private:
    Errc code_;
};

}  // namespace chromcc
