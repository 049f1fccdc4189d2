#pragma once

// Agglomerative clustering of systems and sensors: nearest-neighbor-chain
// linkage, threshold cuts, per-cluster averaged sensor maps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lidd/core.hpp"
#include "lidd/similarity.hpp"

namespace lidd {

struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;

  friend bool operator==(const Merge&, const Merge&) = default;
};

/// Agglomerative merge history. Leaves are nodes 0..n-1; merges[j] creates
/// node n + j. Heights are non-decreasing.
struct LinkageTree {
  std::vector<std::string> item_ids;
  std::vector<Merge> merges;

  std::size_t leaves() const noexcept { return item_ids.size(); }
  std::size_t root() const noexcept { return merges.empty() ? 0 : leaves() + merges.size() - 1; }

  friend bool operator==(const LinkageTree&, const LinkageTree&) = default;
};

/// Flat clustering. clusters[k] lists the members (sorted) of label k;
/// labels are ordered by descending size, then by first member.
struct ClusterPartition {
  std::vector<std::string> item_ids;
  std::vector<int> labels;
  double threshold = 0.0;
  std::vector<std::vector<std::string>> clusters;

  std::size_t cluster_count() const noexcept { return clusters.size(); }

  friend bool operator==(const ClusterPartition&, const ClusterPartition&) = default;
};

struct ClusterSensorMap {
  int cluster_label = 0;
  std::size_t member_count = 0;
  SimilarityMap map;
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Attaches b's root under a's root.
  void unite_into(std::size_t a, std::size_t b) { parent_[find(b)] = find(a); }

 private:
  std::vector<std::size_t> parent_;
};

inline void validate_distances(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  if (d.dist.rows() != n || d.dist.cols() != n)
    throw ContractViolation("distance matrix shape does not match its ids");
  for (std::size_t i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) throw ContractViolation("distance matrix diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = d(i, j);
      if (!std::isfinite(v) || v < 0.0)
        throw ContractViolation("distance matrix has a negative or non-finite entry");
      if (v != d(j, i)) throw ContractViolation("distance matrix is not symmetric");
    }
  }
}

}  // namespace detail

/// Hierarchical agglomerative clustering by the nearest-neighbor chain.
///
/// The chain grows from the lowest active index; each step appends the
/// nearest active neighbor of the chain tip until two tips are reciprocal
/// nearest neighbors, which are then merged with Lance-Williams updates.
/// Ties keep the chain predecessor (needed for termination), otherwise the
/// lowest index wins. Merges are reported in ascending height order
/// (stable, so equal heights keep discovery order).
inline LinkageTree agglomerate(const DistanceMatrix& input, Linkage linkage = Linkage::average) {
  detail::validate_distances(input);
  const std::size_t n = input.size();
  if (n == 0) throw ContractViolation("agglomerate: no items");
  LinkageTree tree{input.item_ids, {}};
  if (n == 1) return tree;

  std::vector<double> d(input.dist.values().begin(), input.dist.values().end());
  auto D = [&](std::size_t i, std::size_t j) -> double& { return d[i * n + j]; };
  std::vector<std::size_t> members(n, 1);
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});

  struct Step {
    std::size_t a, b;
    double height;
  };
  std::vector<Step> steps;
  steps.reserve(n - 1);
  std::vector<std::size_t> chain;
  chain.reserve(n);

  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  while (active.size() > 1) {
    if (chain.empty()) chain.push_back(active.front());
    std::size_t tip, prev;
    for (;;) {
      tip = chain.back();
      prev = chain.size() >= 2 ? chain[chain.size() - 2] : npos;
      std::size_t best = prev;
      double best_d = prev == npos ? 0.0 : D(tip, prev);
      for (const std::size_t i : active) {
        if (i == tip) continue;
        if (best == npos || D(tip, i) < best_d) {
          best = i;
          best_d = D(tip, i);
        }
      }
      if (best == prev) break;
      chain.push_back(best);
    }
    chain.pop_back();
    chain.pop_back();

    const std::size_t keep = std::min(tip, prev);
    const std::size_t drop = std::max(tip, prev);
    steps.push_back({keep, drop, D(tip, prev)});
    const auto sk = static_cast<double>(members[keep]);
    const auto sd = static_cast<double>(members[drop]);
    for (const std::size_t k : active) {
      if (k == keep || k == drop) continue;
      double updated = 0.0;
      switch (linkage) {
        case Linkage::single: updated = std::min(D(keep, k), D(drop, k)); break;
        case Linkage::complete: updated = std::max(D(keep, k), D(drop, k)); break;
        case Linkage::average: updated = (sk * D(keep, k) + sd * D(drop, k)) / (sk + sd); break;
      }
      D(keep, k) = D(k, keep) = updated;
    }
    members[keep] += members[drop];
    active.erase(std::find(active.begin(), active.end(), drop));
  }

  std::stable_sort(steps.begin(), steps.end(), [](const Step& x, const Step& y) { return x.height < y.height; });

  // Relabel representative leaves into node ids.
  detail::UnionFind uf(n);
  std::vector<std::size_t> node_of_root(n);
  std::iota(node_of_root.begin(), node_of_root.end(), std::size_t{0});
  std::vector<std::size_t> size_of_root(n, 1);
  tree.merges.reserve(n - 1);
  for (std::size_t j = 0; j < steps.size(); ++j) {
    const std::size_t ra = uf.find(steps[j].a);
    const std::size_t rb = uf.find(steps[j].b);
    const std::size_t na = node_of_root[ra], nb = node_of_root[rb];
    const std::size_t sz = size_of_root[ra] + size_of_root[rb];
    tree.merges.push_back({std::min(na, nb), std::max(na, nb), steps[j].height, sz});
    uf.unite_into(ra, rb);
    node_of_root[ra] = n + j;
    size_of_root[ra] = sz;
  }
  return tree;
}

/// Builds a partition from per-item group ids (any integers), applying the
/// canonical label order.
inline ClusterPartition make_partition(std::vector<std::string> item_ids, std::span<const std::size_t> group_of,
                                       double threshold) {
  std::map<std::size_t, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < item_ids.size(); ++i) groups[group_of[i]].push_back(item_ids[i]);
  std::vector<std::vector<std::string>> clusters;
  clusters.reserve(groups.size());
  for (auto& [_, members] : groups) {
    std::sort(members.begin(), members.end());
    clusters.push_back(std::move(members));
  }
  std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  std::unordered_map<std::string, int> label_of;
  for (std::size_t k = 0; k < clusters.size(); ++k)
    for (const auto& id : clusters[k]) label_of[id] = static_cast<int>(k);
  ClusterPartition p;
  p.labels.reserve(item_ids.size());
  for (const auto& id : item_ids) p.labels.push_back(label_of.at(id));
  p.item_ids = std::move(item_ids);
  p.threshold = threshold;
  p.clusters = std::move(clusters);
  return p;
}

/// Flat clusters joined by every merge strictly below `threshold`.
inline ClusterPartition cut(const LinkageTree& tree, double threshold) {
  if (!(threshold >= 0.0)) throw ContractViolation("cut: threshold must be >= 0");
  const std::size_t n = tree.leaves();
  // Node -> one representative leaf, so merges can be replayed on leaves.
  std::vector<std::size_t> rep(n + tree.merges.size());
  std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
  detail::UnionFind uf(n);
  for (std::size_t j = 0; j < tree.merges.size(); ++j) {
    const auto& m = tree.merges[j];
    rep[n + j] = rep[m.left];
    if (m.height < threshold) uf.unite_into(rep[m.left], rep[m.right]);
  }
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = uf.find(i);
  return make_partition(tree.item_ids, group, threshold);
}

/// Elementwise mean of maps over the members valid at each cell. A cell is
/// valid when at least one input is. Summation runs in input order.
inline SimilarityMap average_maps(std::span<const SimilarityMap* const> maps) {
  if (maps.empty()) throw ContractViolation("average_maps: no maps");
  for (const auto* m : maps) require_same_sensors(*maps.front(), *m, "average_maps");
  SimilarityMap out = SimilarityMap::identity(maps.front()->sensor_ids);
  const std::size_t ns = out.size();
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < ns; ++j) {
      if (i == j) continue;
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto* m : maps)
        if (m->valid(i, j)) {
          sum += m->scores(i, j);
          ++count;
        }
      if (count > 0) {
        out.scores(i, j) = sum / static_cast<double>(count);
        out.valid(i, j) = 1;
      }
    }
  return out;
}

/// Averaged sensor map of each cluster, in label order.
inline std::vector<ClusterSensorMap> cluster_sensor_maps(const ClusterPartition& partition,
                                                         std::span<const std::string> system_ids,
                                                         std::span<const SimilarityMap> maps) {
  if (system_ids.size() != maps.size()) throw ContractViolation("cluster_sensor_maps: one id per map required");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < system_ids.size(); ++k) index.emplace(system_ids[k], k);
  std::vector<ClusterSensorMap> out;
  out.reserve(partition.clusters.size());
  std::vector<const SimilarityMap*> members;
  for (std::size_t label = 0; label < partition.clusters.size(); ++label) {
    members.clear();
    for (const auto& id : partition.clusters[label]) {
      const auto it = index.find(id);
      if (it == index.end()) throw ContractViolation("cluster_sensor_maps: no map for system " + id);
      members.push_back(&maps[it->second]);
    }
    out.push_back({static_cast<int>(label), members.size(), average_maps(members)});
  }
  return out;
}

/// Sensor-to-sensor distances: row i versus row h of the map under the
/// normalized row distance.
inline DistanceMatrix sensor_distance_matrix(const SimilarityMap& map) {
  const std::size_t ns = map.size();
  DistanceMatrix out{map.sensor_ids, Matrix<double>(ns, ns, 0.0)};
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t h = i + 1; h < ns; ++h) out.dist(i, h) = out.dist(h, i) = row_distance(map, i, map, h);
  return out;
}

inline LinkageTree sensor_linkage_per_cluster(const ClusterSensorMap& cmap, Linkage linkage = Linkage::average) {
  if (cmap.map.size() < 2) throw ContractViolation("sensor_linkage_per_cluster: needs at least 2 sensors");
  return agglomerate(sensor_distance_matrix(cmap.map), linkage);
}

struct OverallSensorClustering {
  SimilarityMap map;
  LinkageTree tree;
  ClusterPartition partition;
};

/// Unweighted mean over cluster maps (each cluster counts once), then
/// sensor linkage and a cut at alpha_sensor.
inline OverallSensorClustering overall_sensor_clustering(std::span<const ClusterSensorMap> cmaps, double alpha_sensor,
                                                         Linkage linkage = Linkage::average) {
  if (cmaps.empty()) throw ContractViolation("overall_sensor_clustering: no cluster maps");
  std::vector<const SimilarityMap*> maps;
  maps.reserve(cmaps.size());
  for (const auto& c : cmaps) maps.push_back(&c.map);
  OverallSensorClustering out{average_maps(maps), {}, {}};
  out.tree = agglomerate(sensor_distance_matrix(out.map), linkage);
  out.partition = cut(out.tree, alpha_sensor);
  return out;
}

/// Adjusted Rand index between two labelings of the same items. Returns 1
/// when both labelings are trivial in the same way (the index is 0/0).
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ContractViolation("adjusted_rand_index: label vectors differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, c] : table) index += choose2(c);
  for (const auto& [_, c] : rows) sum_rows += choose2(c);
  for (const auto& [_, c] : cols) sum_cols += choose2(c);
  const double expected = sum_rows * sum_cols / choose2(static_cast<double>(n));
  const double max_index = (sum_rows + sum_cols) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace lidd
