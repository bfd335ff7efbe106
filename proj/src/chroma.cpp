#include "chromcc/chroma.hpp"

namespace chromcc {

Chromaticity bin_center(ChromaBin bin, int res) {
    const double u_c = (static_cast<double>(bin.u_idx) + 0.5) / static_cast<double>(res);
    const double theta_c =
        (static_cast<double>(bin.theta_idx) + 0.5) * (3.14159265358979323846 / (2.0 * res));
    const double rho = std::sqrt(1.0 - u_c * u_c);
    return {rho * std::cos(theta_c), u_c, rho * std::sin(theta_c)};
}

}  // namespace chromcc
