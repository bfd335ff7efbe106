#include "chromcc/error.hpp"

namespace chromcc {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::zero_vector: return "ZeroVector";
    case Errc::file_not_found: return "FileNotFound";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::out_of_bounds: return "OutOfBounds";
    case Errc::empty_image: return "EmptyImage";
    case Errc::degenerate_illuminant: return "DegenerateIlluminant";
    case Errc::empty_training_set: return "EmptyTrainingSet";
    case Errc::io_failure: return "IoFailure";
    case Errc::bad_magic: return "BadMagic";
    case Errc::version_mismatch: return "VersionMismatch";
    case Errc::checksum_mismatch: return "ChecksumMismatch";
    case Errc::insufficient_illuminants: return "InsufficientIlluminants";
    case Errc::divergence_detected: return "DivergenceDetected";
    case Errc::bad_k: return "BadK";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::missing_file: return "MissingFile";
    case Errc::degenerate_sum: return "DegenerateSum";
    case Errc::bad_arguments: return "BadArguments";
    }
    return "UnknownError";
}

}  // namespace chromcc
