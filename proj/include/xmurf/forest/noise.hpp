#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "../core/error.hpp"

namespace xmurf::forest {

/// Distributions assumed for the virtual noise class.
enum class NoiseKind { uniform = 0, normal = 1, bimodal = 2 };
inline constexpr std::size_t kNoiseKindCount = 3;

inline std::string_view to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::normal: return "normal";
    case NoiseKind::bimodal: return "bimodal";
  }
  return "?";
}

inline NoiseKind noise_kind_from_string(std::string_view s) {
  if (s == "uniform") return NoiseKind::uniform;
  if (s == "normal") return NoiseKind::normal;
  if (s == "bimodal") return NoiseKind::bimodal;
  throw ParseError("unknown noise distribution '" + std::string(s) + "'");
}

/// Real and (estimated, possibly fractional) noise counts of a node.
struct NodeCounts {
  double real = 0.0;
  double noise = 0.0;
  double total() const { return real + noise; }
};

/// Two-class Gini impurity r(t) = sum_c p_c (1 - p_c).
inline double gini(double count_real, double count_noise) {
  const double total = count_real + count_noise;
  if (!(total > 0.0) || count_real < 0.0 || count_noise < 0.0)
    throw InvariantError("gini: counts must be non-negative with a positive total");
  const double p = count_real / total;
  const double q = count_noise / total;
  return p * (1.0 - p) + q * (1.0 - q);
}

inline constexpr double kNoiseConservationTol = 1e-9;

/// Gini gain of splitting `parent` into `left` and `right`.
inline double gini_gain(NodeCounts parent, NodeCounts left, NodeCounts right) {
  if (left.real + right.real != parent.real ||
      std::abs(left.noise + right.noise - parent.noise) > kNoiseConservationTol)
    throw InvariantError("gini_gain: child counts do not add up to the parent");
  const double m = parent.total();
  double gain = gini(parent.real, parent.noise);
  if (left.total() > 0.0) gain -= left.total() / m * gini(left.real, left.noise);
  if (right.total() > 0.0) gain -= right.total() / m * gini(right.real, right.noise);
  return gain;
}

/// Maps a threshold to the node interval [min, max] read as mu +- 3 sigma.
inline double standardize(double tau, double node_min, double node_max) {
  if (!(node_max > node_min))
    throw InvariantError("standardize: degenerate feature range in node");
  const double mu = (node_max + node_min) / 2.0;
  const double sigma = (node_max - node_min) / 6.0;
  return (tau - mu) / sigma;
}

namespace detail {
inline constexpr double kBeta1 = -0.0004406;
inline constexpr double kBeta2 = 0.04181198;
inline constexpr double kBeta3 = 0.9;

// Logistic approximation of the standard normal CDF; valid on the real line.
inline double normal_cdf_approx(double z) {
  const double z2 = z * z;
  const double poly = z * (kBeta3 + z2 * (kBeta2 + z2 * kBeta1));
  return 1.0 / (1.0 + std::exp(-std::sqrt(std::numbers::pi) * poly));
}

inline double bimodal_raw(double z) { return normal_cdf_approx(z - 3.0) + normal_cdf_approx(z + 3.0); }
}  // namespace detail

inline constexpr double kZLimit = 3.0;

/// CDF of the noise distribution at standardized threshold z in [-3, 3].
/// The bimodal sum of two shifted normals is renormalized to [0, 1] over the
/// node interval. Inputs outside [-3, 3] are clamped; a warning is emitted
/// unless the excess is rounding noise.
inline double noise_cdf(NoiseKind kind, double z) {
  if (z < -kZLimit || z > kZLimit) {
    if (std::abs(z) > kZLimit + 1e-9) warn("noise_cdf: z outside [-3, 3] clamped");
    z = std::clamp(z, -kZLimit, kZLimit);
  }
  switch (kind) {
    case NoiseKind::uniform:
      return z / 6.0 + 0.5;
    case NoiseKind::normal:
      return detail::normal_cdf_approx(z);
    case NoiseKind::bimodal: {
      static const double lo = detail::bimodal_raw(-kZLimit);
      static const double hi = detail::bimodal_raw(kZLimit);
      return (detail::bimodal_raw(z) - lo) / (hi - lo);
    }
  }
  return 0.0;
}

/// Noise mass sent to each child when the node holds `m_real` real points
/// (and, by construction, as many virtual noise points).
inline std::pair<double, double> estimate_noise_children(double m_real, double p) {
  const double left = m_real * p;
  return {left, m_real - left};
}

}  // namespace xmurf::forest
