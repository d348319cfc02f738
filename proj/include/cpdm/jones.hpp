#pragma once

#include <Eigen/Dense>

#include "cpdm/waveform.hpp"

namespace cpdm {

using Jones2 = Eigen::Matrix2cd;
using TxMap = Eigen::Matrix<cd, 2, 4>;

/// Coordinate rotation by theta (radians).
inline Jones2 rotator(double theta) {
  Jones2 r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

/// Quarter waveplate, fast axis at angle theta. Unitary.
inline Jones2 quarter_waveplate(double theta) {
  Jones2 retarder = Jones2::Zero();
  retarder(0, 0) = std::polar(1.0, -kPi / 4.0);
  retarder(1, 1) = std::polar(1.0, +kPi / 4.0);
  return rotator(theta) * retarder * rotator(-theta);
}

inline Eigen::Vector2cd rcp_basis() {
  return Eigen::Vector2cd(cd(1, 0), cd(0, 1)) / std::sqrt(2.0);
}
inline Eigen::Vector2cd lcp_basis() {
  return Eigen::Vector2cd(cd(1, 0), cd(0, -1)) / std::sqrt(2.0);
}

/// Physical 2x4 transmitter map of the CPBC/quarter-waveplate network:
/// column k is the Jones image of a unit excitation on tributary k
/// (rcp_h, rcp_v, lcp_h, lcp_v). Each column has unit norm before the
/// 1/sqrt(2) passive-combiner scaling applied by the caller.
TxMap cpdm_tx_map(double waveplate_angle);

/// Stokes parameters of a Jones sample (S0..S3).
inline std::array<double, 4> stokes(cd ex, cd ey) {
  const double s0 = std::norm(ex) + std::norm(ey);
  const double s1 = std::norm(ex) - std::norm(ey);
  const cd cross = ex * std::conj(ey);
  return {s0, s1, 2.0 * cross.real(), -2.0 * cross.imag()};
}

}  // namespace cpdm
