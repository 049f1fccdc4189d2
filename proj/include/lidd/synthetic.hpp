#pragma once

// Synthetic multi-system corpora with planted group structure. Each group
// has a sensor correlation template; every system in a group observes the
// group's latent process through its own calibration plus white noise.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lidd/core.hpp"
#include "lidd/serialize.hpp"
#include "lidd/similarity.hpp"
#include "lidd/timeseries.hpp"

namespace lidd {

/// Scales sensor `sensor`'s couplings in `group` by (1 - 2 * magnitude):
/// magnitude 1 inverts them, 0.5 removes them.
struct Injection {
  std::size_t group = 0;
  std::size_t sensor = 0;
  double magnitude = 1.0;
};

struct SyntheticSpec {
  std::size_t n_systems = 36;
  std::size_t n_sensors = 12;
  std::size_t n_samples = 2880;
  std::size_t n_groups = 5;
  std::vector<std::size_t> group_sizes;  // empty: n_systems split evenly
  std::vector<Matrix<double>> templates;  // empty: built-in family
  bool shared_template = false;           // every group uses template 0
  std::vector<Injection> injections;
  double noise = 0.1;
  double missing_rate = 0.05;
  double autocorrelation = 0.5;  // AR(1) coefficient of the latent process
  std::uint64_t seed = 1;
  Instant start = Instant{std::chrono::sys_days{std::chrono::year{2022} / 8 / 1}.time_since_epoch()};
  std::chrono::seconds interval{3600};

  std::vector<std::size_t> sizes() const {
    if (!group_sizes.empty()) return group_sizes;
    std::vector<std::size_t> s(n_groups, n_systems / std::max<std::size_t>(n_groups, 1));
    for (std::size_t g = 0; g < n_systems % std::max<std::size_t>(n_groups, 1); ++g) ++s[g];
    return s;
  }

  std::size_t groups() const { return group_sizes.empty() ? n_groups : group_sizes.size(); }

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<std::string> sensor_ids;
  std::vector<std::string> system_ids;
  std::vector<std::size_t> group_of;       // per system
  std::vector<Matrix<double>> templates;   // effective per group, injections applied
  std::vector<SensorFrame> frames;         // one per system, missing cells masked
};

inline const std::vector<std::string>& default_sensor_names() {
  static const std::vector<std::string> names{"SPV", "SPC", "SRT", "SCH", "Q1H", "Q2H",
                                              "Q3H", "Q4H", "Q1T", "Q2T", "Q3T", "Q4T"};
  return names;
}

inline std::vector<std::string> synthetic_sensor_ids(std::size_t n) {
  if (n == default_sensor_names().size()) return default_sensor_names();
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(fmt::format("S{:02}", i + 1));
  return ids;
}

namespace detail {

// Sensor -> block. The 12-sensor layout groups sensors by what they
// measure (Peltier voltage and current, RTD temperature, card humidity, QIE
// humidity, QIE temperature); other sizes use contiguous blocks of three.
inline std::vector<std::size_t> sensor_blocks(std::size_t n) {
  std::vector<std::size_t> block(n);
  if (n == default_sensor_names().size()) {
    block = {0, 0, 1, 2, 3, 3, 3, 3, 4, 4, 4, 4};
    return block;
  }
  for (std::size_t i = 0; i < n; ++i) block[i] = i / 3;
  return block;
}

inline SimilarityMap full_map(const Matrix<double>& r, std::vector<std::string> ids) {
  SimilarityMap m{std::move(ids), r, BoolMatrix(r.rows(), r.cols(), 1)};
  return m;
}

// Symmetric square root A with A * A^T = r; fails on negative eigenvalues.
inline Eigen::MatrixXd psd_factor(const Matrix<double>& r, std::size_t group) {
  const auto n = static_cast<Eigen::Index>(r.rows());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = r(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double min_ev = eig.eigenvalues().minCoeff();
  if (min_ev < -1e-9 * static_cast<double>(n))
    throw ConfigError("templates", fmt::format("template for group {} is not positive semidefinite "
                                               "(smallest eigenvalue {:.6g})",
                                               group, min_ev));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace detail

/// Correlation template for group g: a convex combination of the identity
/// and three block-structured correlation matrices (sensor blocks, one
/// block holding every sensor, a random coarser partition of the blocks),
/// each with random block signs. Every term is positive semidefinite, so
/// the sum is too. Draws are keyed by (g, n) alone, so a group's template
/// does not depend on the corpus seed. Candidates closer than
/// `min_separation` (map distance) to an earlier template are redrawn.
inline std::vector<Matrix<double>> builtin_templates(std::size_t groups, std::size_t n,
                                                     double min_separation = 0.15) {
  const auto block = detail::sensor_blocks(n);
  const std::size_t blocks = n == 0 ? 0 : *std::max_element(block.begin(), block.end()) + 1;
  const auto ids = synthetic_sensor_ids(n);

  // Sign-patterned block matrix: r(i, j) = s_i s_j when i, j share a part.
  auto block_matrix = [&](const std::vector<std::size_t>& part, const std::vector<double>& sign) {
    Matrix<double> m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (part[block[i]] == part[block[j]]) m(i, j) = sign[block[i]] * sign[block[j]];
    return m;
  };

  std::vector<Matrix<double>> out;
  for (std::size_t g = 0; g < groups; ++g) {
    std::mt19937_64 rng(0x11DDull * 1000003ull + g * 7919ull + n * 104729ull);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto signs = [&] {
      std::vector<double> s(blocks);
      for (auto& v : s) v = unit(rng) < 0.5 ? -1.0 : 1.0;
      return s;
    };
    Matrix<double> best;
    double best_sep = -1.0;
    for (int attempt = 0; attempt < 2000; ++attempt) {
      std::vector<std::size_t> own(blocks), all(blocks, 0), coarse(blocks);
      std::iota(own.begin(), own.end(), std::size_t{0});
      for (auto& p : coarse) p = unit(rng) < 0.5 ? 0 : 1;
      const double w_block = 0.25 + 0.1 * unit(rng);
      const double w_all = 0.35 + 0.1 * unit(rng);
      const double w_coarse = 0.15 + 0.1 * unit(rng);
      const double w_id = 1.0 - w_block - w_all - w_coarse;
      const auto m_block = block_matrix(own, signs());
      const auto m_all = block_matrix(all, signs());
      const auto m_coarse = block_matrix(coarse, signs());
      Matrix<double> r(n, n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          r(i, j) = i == j ? 1.0 : w_block * m_block(i, j) + w_all * m_all(i, j) + w_coarse * m_coarse(i, j);
      (void)w_id;
      double sep = std::numeric_limits<double>::infinity();
      for (const auto& prev : out)
        sep = std::min(sep, map_distance(detail::full_map(r, ids), detail::full_map(prev, ids)));
      if (sep > best_sep) {
        best_sep = sep;
        best = r;
      }
      if (sep >= min_separation) break;
    }
    out.push_back(std::move(best));
  }
  return out;
}

inline void SyntheticSpec::validate() const {
  if (n_systems == 0 || n_sensors < 2 || n_samples < 3)
    throw ConfigError("synthetic", "need >= 1 system, >= 2 sensors and >= 3 samples");
  const std::size_t g = groups();
  if (g == 0 || g > n_systems) throw ConfigError("groups", "group count must be in [1, n_systems]");
  const auto s = sizes();
  if (std::accumulate(s.begin(), s.end(), std::size_t{0}) != n_systems)
    throw ConfigError("group_sizes", "group sizes must sum to n_systems");
  if (std::find(s.begin(), s.end(), std::size_t{0}) != s.end())
    throw ConfigError("group_sizes", "every group needs at least one system");
  if (!(noise >= 0.0)) throw ConfigError("noise", "must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) throw ConfigError("missing_rate", "must lie in [0, 1]");
  if (!(autocorrelation > -1.0 && autocorrelation < 1.0))
    throw ConfigError("autocorrelation", "must lie in (-1, 1)");
  if (interval.count() <= 0) throw ConfigError("interval", "must be positive");
  for (const auto& inj : injections) {
    if (inj.group >= g) throw ConfigError("injections", "group index out of range");
    if (inj.sensor >= n_sensors) throw ConfigError("injections", "sensor index out of range");
    if (!(inj.magnitude >= 0.0 && inj.magnitude <= 1.0))
      throw ConfigError("injections", "magnitude must lie in [0, 1]");
  }
  if (!templates.empty()) {
    const std::size_t want = shared_template ? 1 : g;
    if (templates.size() != want)
      throw ConfigError("templates", fmt::format("expected {} template(s), got {}", want, templates.size()));
    for (std::size_t t = 0; t < templates.size(); ++t) {
      const auto& r = templates[t];
      if (r.rows() != n_sensors || r.cols() != n_sensors)
        throw ConfigError("templates", fmt::format("template {} must be {}x{}", t, n_sensors, n_sensors));
      for (std::size_t i = 0; i < n_sensors; ++i) {
        if (r(i, i) != 1.0) throw ConfigError("templates", fmt::format("template {} needs a unit diagonal", t));
        for (std::size_t j = 0; j < n_sensors; ++j)
          if (r(i, j) != r(j, i) || !(std::abs(r(i, j)) <= 1.0))
            throw ConfigError("templates", fmt::format("template {} must be symmetric with entries in [-1, 1]", t));
      }
      detail::psd_factor(r, t);
    }
  }
}

/// Builds the corpus. Values, the missing-cell mask and the system-to-group
/// assignment draw from separate streams of the seed, so changing
/// missing_rate leaves the underlying values untouched.
inline SyntheticCorpus generate_corpus(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t ns = spec.n_sensors, T = spec.n_samples, G = spec.groups();
  SyntheticCorpus c;
  c.sensor_ids = synthetic_sensor_ids(ns);

  std::vector<Matrix<double>> base = spec.templates;
  if (base.empty()) base = builtin_templates(spec.shared_template ? 1 : G, ns);
  for (std::size_t g = 0; g < G; ++g) c.templates.push_back(base[spec.shared_template ? 0 : g]);
  for (const auto& inj : spec.injections) {
    auto& r = c.templates[inj.group];
    const double scale = 1.0 - 2.0 * inj.magnitude;
    for (std::size_t j = 0; j < ns; ++j)
      if (j != inj.sensor) {
        r(inj.sensor, j) *= scale;
        r(j, inj.sensor) *= scale;
      }
  }
  std::vector<Eigen::MatrixXd> factors;
  for (std::size_t g = 0; g < G; ++g) factors.push_back(detail::psd_factor(c.templates[g], g));

  auto stream = [&](std::uint64_t id) {
    std::seed_seq seq{spec.seed & 0xffffffffu, spec.seed >> 32, id};
    return std::mt19937_64(seq);
  };
  auto assign_rng = stream(1), value_rng = stream(2), mask_rng = stream(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto sizes = spec.sizes();
  for (std::size_t g = 0; g < G; ++g) c.group_of.insert(c.group_of.end(), sizes[g], g);
  std::shuffle(c.group_of.begin(), c.group_of.end(), assign_rng);
  const int width = static_cast<int>(std::to_string(spec.n_systems).size());
  for (std::size_t k = 0; k < spec.n_systems; ++k)
    c.system_ids.push_back(fmt::format("SYS{:0{}}", k + 1, std::max(width, 2)));

  // Shared latent signal per group: AR(1) components mixed by the factor.
  const double phi = spec.autocorrelation;
  const double innov = std::sqrt(1.0 - phi * phi);
  std::vector<Matrix<double>> signal(G, Matrix<double>(T, ns));
  for (std::size_t g = 0; g < G; ++g) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(ns));
    for (auto& v : z) v = gauss(value_rng);
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0)
        for (auto& v : z) v = phi * v + innov * gauss(value_rng);
      const Eigen::VectorXd x = factors[g] * z;
      for (std::size_t i = 0; i < ns; ++i) signal[g](t, i) = x(static_cast<Eigen::Index>(i));
    }
  }

  std::vector<Instant> grid(T);
  for (std::size_t t = 0; t < T; ++t) grid[t] = spec.start + spec.interval * static_cast<std::int64_t>(t);

  std::uniform_real_distribution<double> offset_jitter(-1.0, 1.0), scale_jitter(0.9, 1.1);
  for (std::size_t k = 0; k < spec.n_systems; ++k) {
    SensorFrame f;
    f.system_id = c.system_ids[k];
    f.sensor_ids = c.sensor_ids;
    f.grid = grid;
    f.values = Matrix<double>(T, ns, 0.0);
    f.mask = BoolMatrix(T, ns, 1);
    std::vector<double> offset(ns), scale(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      offset[i] = 20.0 + 2.5 * static_cast<double>(i) + offset_jitter(value_rng);
      scale[i] = (0.5 + 0.25 * static_cast<double>(i % 4)) * scale_jitter(value_rng);
    }
    const auto& sig = signal[c.group_of[k]];
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < ns; ++i)
        f.values(t, i) = offset[i] + scale[i] * (sig(t, i) + spec.noise * gauss(value_rng));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < ns; ++i)
        if (unit(mask_rng) < spec.missing_rate) {
          f.mask(t, i) = 0;
          f.values(t, i) = 0.0;
        }
    c.frames.push_back(std::move(f));
  }
  return c;
}

inline std::vector<RawRecord> corpus_records(const SyntheticCorpus& c) {
  std::vector<RawRecord> out;
  for (const auto& f : c.frames)
    for (std::size_t t = 0; t < f.samples(); ++t)
      for (std::size_t i = 0; i < f.sensors(); ++i)
        if (f.mask(t, i)) out.push_back({f.grid[t], f.system_id, f.sensor_ids[i], f.values(t, i)});
  return out;
}

inline Json ground_truth_json(const SyntheticSpec& spec, const SyntheticCorpus& c) {
  Json systems = Json::array();
  for (std::size_t k = 0; k < c.system_ids.size(); ++k)
    systems.push_back({{"id", c.system_ids[k]}, {"group", c.group_of[k]}});
  Json groups = Json::array();
  for (std::size_t g = 0; g < c.templates.size(); ++g) {
    std::vector<std::string> members;
    for (std::size_t k = 0; k < c.system_ids.size(); ++k)
      if (c.group_of[k] == g) members.push_back(c.system_ids[k]);
    groups.push_back({{"index", g}, {"size", members.size()}, {"members", members}});
  }
  Json injections = Json::array();
  for (const auto& inj : spec.injections)
    injections.push_back(
        {{"group", inj.group}, {"sensor", inj.sensor}, {"sensor_id", c.sensor_ids[inj.sensor]}, {"magnitude", inj.magnitude}});
  return Json{{"seed", spec.seed},
              {"n_systems", spec.n_systems},
              {"n_sensors", spec.n_sensors},
              {"n_samples", spec.n_samples},
              {"noise", spec.noise},
              {"missing_rate", spec.missing_rate},
              {"autocorrelation", spec.autocorrelation},
              {"shared_template", spec.shared_template},
              {"sensor_ids", c.sensor_ids},
              {"systems", std::move(systems)},
              {"groups", std::move(groups)},
              {"injections", std::move(injections)}};
}

/// Reads a generator spec from JSON; absent keys keep their defaults.
inline SyntheticSpec synthetic_spec_from_json(const Json& j, SyntheticSpec spec = {}) {
  spec.n_systems = j.value("n_systems", spec.n_systems);
  spec.n_sensors = j.value("n_sensors", spec.n_sensors);
  spec.n_samples = j.value("n_samples", spec.n_samples);
  spec.n_groups = j.value("n_groups", spec.n_groups);
  spec.group_sizes = j.value("group_sizes", spec.group_sizes);
  spec.shared_template = j.value("shared_template", spec.shared_template);
  spec.noise = j.value("noise", spec.noise);
  spec.missing_rate = j.value("missing_rate", spec.missing_rate);
  spec.autocorrelation = j.value("autocorrelation", spec.autocorrelation);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("injections")) {
    spec.injections.clear();
    for (const auto& inj : j.at("injections"))
      spec.injections.push_back(
          {inj.at("group").get<std::size_t>(), inj.at("sensor").get<std::size_t>(), inj.value("magnitude", 1.0)});
  }
  if (j.contains("templates")) {
    spec.templates.clear();
    for (const auto& t : j.at("templates")) {
      const auto rows = t.get<std::vector<std::vector<double>>>();
      Matrix<double> m(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw ConfigError("templates", "template rows differ in length");
        for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
      }
      spec.templates.push_back(std::move(m));
    }
  }
  return spec;
}

}  // namespace lidd
