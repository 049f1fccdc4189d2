#pragma once

// Per-system sensor similarity maps and the normalized Euclidean distance
// between maps, used both for system-to-system distances and (row-wise)
// for sensor-to-sensor and divergence scores.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lidd/core.hpp"
#include "lidd/timeseries.hpp"

namespace lidd {

/// Symmetric N_s x N_s matrix of sensor-pair similarity scores. The
/// diagonal is fixed at 1; off-diagonal cells with valid == 0 hold either
/// 0 or NaN depending on the policy that built the map.
struct SimilarityMap {
  std::vector<std::string> sensor_ids;
  Matrix<double> scores;
  BoolMatrix valid;

  std::size_t size() const noexcept { return sensor_ids.size(); }

  static SimilarityMap identity(std::vector<std::string> ids) {
    const std::size_t n = ids.size();
    SimilarityMap m{std::move(ids), Matrix<double>(n, n, 0.0), BoolMatrix(n, n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
      m.scores(i, i) = 1.0;
      m.valid(i, i) = 1;
    }
    return m;
  }

  bool operator==(const SimilarityMap& o) const {
    if (sensor_ids != o.sensor_ids || valid != o.valid || scores.rows() != o.scores.rows()) return false;
    // NaN placeholders compare equal to each other.
    for (std::size_t k = 0; k < scores.values().size(); ++k) {
      const double a = scores.values()[k], b = o.scores.values()[k];
      if (!(a == b || (std::isnan(a) && std::isnan(b)))) return false;
    }
    return true;
  }
};

/// Symmetric nonnegative matrix with zero diagonal.
struct DistanceMatrix {
  std::vector<std::string> item_ids;
  Matrix<double> dist;

  std::size_t size() const noexcept { return item_ids.size(); }
  double operator()(std::size_t i, std::size_t j) const { return dist(i, j); }

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;
};

enum class UndefinedPolicy { zero_with_flag, invalidate };

struct SimilarityConfig {
  std::size_t min_overlap = 24;
  UndefinedPolicy undefined_policy = UndefinedPolicy::zero_with_flag;

  void validate() const {
    if (min_overlap < 3) throw ConfigError("min_overlap", "must be >= 3");
  }
};

/// Pearson correlation over the indices where pair_mask is set. Undefined
/// (nullopt) when fewer than min_overlap pairs remain or either masked
/// subvector is constant.
///
/// Uses a single-pass co-moment update, so the inputs are read once and no
/// masked copy is materialized.
inline std::optional<double> pearson(std::span<const double> x1, std::span<const double> x2,
                                     std::span<const std::uint8_t> pair_mask, std::size_t min_overlap) {
  if (x1.size() != x2.size() || x1.size() != pair_mask.size())
    throw ContractViolation("pearson: vectors and mask must have equal length");
  std::size_t n = 0;
  double mean1 = 0.0, mean2 = 0.0, m11 = 0.0, m22 = 0.0, m12 = 0.0;
  double first1 = 0.0, first2 = 0.0;
  bool varies1 = false, varies2 = false;
  for (std::size_t t = 0; t < x1.size(); ++t) {
    if (!pair_mask[t]) continue;
    const double a = x1[t], b = x2[t];
    if (n == 0) {
      first1 = a;
      first2 = b;
    } else {
      varies1 = varies1 || a != first1;
      varies2 = varies2 || b != first2;
    }
    ++n;
    const double inv = 1.0 / static_cast<double>(n);
    const double d1 = a - mean1;
    const double d2 = b - mean2;
    mean1 += d1 * inv;
    mean2 += d2 * inv;
    m11 += d1 * (a - mean1);
    m22 += d2 * (b - mean2);
    m12 += d1 * (b - mean2);
  }
  if (n < min_overlap || !varies1 || !varies2 || !(m11 > 0.0) || !(m22 > 0.0)) return std::nullopt;
  const double r = m12 / (std::sqrt(m11) * std::sqrt(m22));
  return std::clamp(r, -1.0, 1.0);
}

/// Pairwise similarity measure over two masked columns.
template <class F>
concept SimilarityMeasure = requires(const F& f, std::span<const double> x, std::span<const std::uint8_t> m,
                                     std::size_t overlap) {
  { f(x, x, m, overlap) } -> std::convertible_to<std::optional<double>>;
};

struct PearsonSimilarity {
  std::optional<double> operator()(std::span<const double> x1, std::span<const double> x2,
                                   std::span<const std::uint8_t> pair_mask, std::size_t min_overlap) const {
    return pearson(x1, x2, pair_mask, min_overlap);
  }
};

/// Similarity of every sensor pair in a frame over pairwise-complete
/// observations.
template <SimilarityMeasure Measure = PearsonSimilarity>
SimilarityMap sensor_similarity_map(const SensorFrame& frame, const SimilarityConfig& cfg,
                                    const Measure& measure = {}) {
  cfg.validate();
  const std::size_t ns = frame.sensors();
  const std::size_t T = frame.samples();
  if (ns < 2) throw ContractViolation("sensor_similarity_map: frame needs at least 2 sensors");

  // Column-major copies so each pair reads two contiguous columns.
  std::vector<std::vector<double>> cols(ns, std::vector<double>(T));
  std::vector<std::vector<std::uint8_t>> masks(ns, std::vector<std::uint8_t>(T));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < ns; ++c) {
      cols[c][t] = frame.values(t, c);
      masks[c][t] = frame.mask(t, c);
    }

  SimilarityMap out = SimilarityMap::identity(frame.sensor_ids);
  const double placeholder =
      cfg.undefined_policy == UndefinedPolicy::zero_with_flag ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  std::vector<std::uint8_t> pair(T);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = i + 1; j < ns; ++j) {
      for (std::size_t t = 0; t < T; ++t) pair[t] = masks[i][t] & masks[j][t];
      const auto r = measure(cols[i], cols[j], pair, cfg.min_overlap);
      const double v = r ? *r : placeholder;
      out.scores(i, j) = out.scores(j, i) = v;
      out.valid(i, j) = out.valid(j, i) = r ? 1 : 0;
    }
  return out;
}

/// Count of undefined off-diagonal pairs (each unordered pair once).
inline std::size_t undefined_pairs(const SimilarityMap& m) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) n += m.valid(i, j) ? 0 : 1;
  return n;
}

/// (1/N_s) * sqrt(sum of squared differences) over the row pair, skipping
/// cells invalid on either side. The normalizer stays 1/N_s regardless of
/// how many cells were skipped.
inline double row_distance(const SimilarityMap& a, std::size_t row_a, const SimilarityMap& b, std::size_t row_b) {
  const std::size_t ns = a.size();
  double sum = 0.0;
  for (std::size_t j = 0; j < ns; ++j) {
    if (!a.valid(row_a, j) || !b.valid(row_b, j)) continue;
    const double d = a.scores(row_a, j) - b.scores(row_b, j);
    sum += d * d;
  }
  return std::sqrt(sum) / static_cast<double>(ns);
}

inline void require_same_sensors(const SimilarityMap& a, const SimilarityMap& b, const char* where) {
  if (a.sensor_ids != b.sensor_ids)
    throw ContractViolation(std::string(where) + ": similarity maps have different sensor orderings");
}

/// Normalized Euclidean distance between two maps over cells valid in both.
inline double map_distance(const SimilarityMap& a, const SimilarityMap& b) {
  require_same_sensors(a, b, "map_distance");
  const std::size_t ns = a.size();
  if (ns == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < ns; ++j) {
      if (!a.valid(i, j) || !b.valid(i, j)) continue;
      const double d = a.scores(i, j) - b.scores(i, j);
      sum += d * d;
    }
  return std::sqrt(sum) / static_cast<double>(ns);
}

/// Pairwise map distances between systems. Each cell is computed
/// independently, so the result does not depend on `jobs`.
inline DistanceMatrix system_distance_matrix(std::span<const std::string> system_ids,
                                             std::span<const SimilarityMap> maps, unsigned jobs = 1) {
  if (system_ids.size() != maps.size())
    throw ContractViolation("system_distance_matrix: one id per map required");
  const std::size_t n = maps.size();
  for (std::size_t k = 1; k < n; ++k) require_same_sensors(maps[0], maps[k], "system_distance_matrix");
  DistanceMatrix out{{system_ids.begin(), system_ids.end()}, Matrix<double>(n, n, 0.0)};
  parallel_for(n, jobs, [&](std::size_t k) {
    for (std::size_t h = k + 1; h < n; ++h) out.dist(k, h) = map_distance(maps[k], maps[h]);
  });
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t h = 0; h < k; ++h) out.dist(k, h) = out.dist(h, k);
  return out;
}

}  // namespace lidd
