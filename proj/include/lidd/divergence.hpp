#pragma once

// Root-cause scoring: how much each sensor's interconnections differ
// between system clusters.

#include <span>
#include <string>
#include <vector>

#include "lidd/clustering.hpp"
#include "lidd/core.hpp"
#include "lidd/similarity.hpp"

namespace lidd {

/// psi(a, b, i): divergence of cluster a from cluster b at sensor i.
class PairScores {
 public:
  PairScores() = default;
  PairScores(std::size_t clusters, std::size_t sensors)
      : clusters_(clusters), sensors_(sensors), values_(clusters * clusters * sensors, 0.0) {}

  std::size_t clusters() const noexcept { return clusters_; }
  std::size_t sensors() const noexcept { return sensors_; }

  double& operator()(std::size_t a, std::size_t b, std::size_t i) {
    return values_[(a * clusters_ + b) * sensors_ + i];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t i) const {
    return values_[(a * clusters_ + b) * sensors_ + i];
  }

  friend bool operator==(const PairScores&, const PairScores&) = default;

 private:
  std::size_t clusters_ = 0;
  std::size_t sensors_ = 0;
  std::vector<double> values_;
};

struct DivergenceReport {
  std::vector<int> cluster_labels;
  std::vector<std::string> sensor_ids;
  PairScores pair_scores;
  Matrix<double> aggregate;  // clusters x sensors
  BoolMatrix flags;          // clusters x sensors
  double alpha_phi = 0.0;

  friend bool operator==(const DivergenceReport&, const DivergenceReport&) = default;
};

/// Row-wise map distance between every ordered cluster pair. Only a < b is
/// computed; the mirror is copied so symmetry is exact.
inline PairScores pairwise_divergence(std::span<const ClusterSensorMap> cmaps) {
  if (cmaps.empty()) throw ContractViolation("pairwise_divergence: no cluster maps");
  for (const auto& c : cmaps) require_same_sensors(cmaps.front().map, c.map, "pairwise_divergence");
  const std::size_t k = cmaps.size();
  const std::size_t ns = cmaps.front().map.size();
  PairScores psi(k, ns);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      for (std::size_t i = 0; i < ns; ++i)
        psi(a, b, i) = psi(b, a, i) = row_distance(cmaps[a].map, i, cmaps[b].map, i);
  return psi;
}

/// Sum over all clusters b (including a, whose term is zero).
inline Matrix<double> aggregate_divergence(const PairScores& psi) {
  Matrix<double> out(psi.clusters(), psi.sensors(), 0.0);
  for (std::size_t a = 0; a < psi.clusters(); ++a)
    for (std::size_t i = 0; i < psi.sensors(); ++i) {
      double sum = 0.0;
      for (std::size_t b = 0; b < psi.clusters(); ++b) sum += psi(a, b, i);
      out(a, i) = sum;
    }
  return out;
}

inline BoolMatrix flag_root_causes(const Matrix<double>& aggregate, double alpha_phi) {
  if (!(alpha_phi >= 0.0)) throw ContractViolation("flag_root_causes: alpha_phi must be >= 0");
  BoolMatrix flags(aggregate.rows(), aggregate.cols(), 0);
  for (std::size_t a = 0; a < aggregate.rows(); ++a)
    for (std::size_t i = 0; i < aggregate.cols(); ++i) flags(a, i) = aggregate(a, i) > alpha_phi ? 1 : 0;
  return flags;
}

inline DivergenceReport divergence_report(std::span<const ClusterSensorMap> cmaps, double alpha_phi) {
  DivergenceReport r;
  r.pair_scores = pairwise_divergence(cmaps);
  r.aggregate = aggregate_divergence(r.pair_scores);
  r.flags = flag_root_causes(r.aggregate, alpha_phi);
  r.alpha_phi = alpha_phi;
  r.sensor_ids = cmaps.front().map.sensor_ids;
  for (const auto& c : cmaps) r.cluster_labels.push_back(c.cluster_label);
  return r;
}

}  // namespace lidd
