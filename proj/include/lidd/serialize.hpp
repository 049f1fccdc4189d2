#pragma once

// CSV and JSON encodings of the analysis types. Doubles are written in
// shortest round-trip decimal form, so decode(encode(x)) is bit-exact.

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidd/clustering.hpp"
#include "lidd/divergence.hpp"
#include "lidd/similarity.hpp"
#include "lidd/timeseries.hpp"

namespace lidd {

using Json = nlohmann::ordered_json;

inline std::string cluster_name(int label) { return "CL-" + std::to_string(label + 1); }

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> row;
    for (auto f : split_csv(line)) row.emplace_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Square id-labelled matrix: header "<corner>,id..." then "id,v..." rows.
inline std::vector<std::vector<std::string>> read_square_csv(std::istream& in, std::vector<std::string>& ids) {
  auto rows = read_csv_rows(in);
  if (rows.empty()) throw FormatError("matrix CSV is empty");
  ids.assign(rows[0].begin() + 1, rows[0].end());
  if (rows.size() != ids.size() + 1) throw FormatError("matrix CSV is not square");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != ids.size() + 1) throw FormatError("matrix CSV row has wrong width");
    if (rows[r][0] != ids[r - 1]) throw FormatError("matrix CSV row ids do not match the header");
  }
  return rows;
}

inline double require_double(const std::string& s) {
  const auto v = parse_double(s);
  if (!v) throw FormatError("cannot parse number '" + s + "'");
  return *v;
}

}  // namespace detail

// --- SimilarityMap ---------------------------------------------------------
// CSV cells: valid scores as numbers; invalid cells empty (score 0) or
// "nan" (score NaN).

inline void write_csv(std::ostream& out, const SimilarityMap& m) {
  out << "sensor";
  for (const auto& id : m.sensor_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.sensor_ids[i];
    for (std::size_t j = 0; j < m.size(); ++j) {
      out << ',';
      if (m.valid(i, j)) out << format_double(m.scores(i, j));
      else if (std::isnan(m.scores(i, j))) out << "nan";
    }
    out << '\n';
  }
}

inline SimilarityMap read_similarity_csv(std::istream& in) {
  std::vector<std::string> ids;
  const auto rows = detail::read_square_csv(in, ids);
  SimilarityMap m{ids, Matrix<double>(ids.size(), ids.size(), 0.0), BoolMatrix(ids.size(), ids.size(), 0)};
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const auto& cell = rows[i + 1][j + 1];
      if (cell.empty()) continue;
      if (cell == "nan") {
        m.scores(i, j) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      m.scores(i, j) = detail::require_double(cell);
      m.valid(i, j) = 1;
    }
  return m;
}

inline Json to_json(const SimilarityMap& m) {
  Json scores = Json::array(), valid = Json::array();
  for (std::size_t k = 0; k < m.scores.values().size(); ++k) {
    const double v = m.scores.values()[k];
    if (std::isnan(v)) scores.push_back(nullptr);
    else scores.push_back(v);
    valid.push_back(static_cast<int>(m.valid.values()[k]));
  }
  return Json{{"sensor_ids", m.sensor_ids}, {"scores", std::move(scores)}, {"valid", std::move(valid)}};
}

inline SimilarityMap similarity_from_json(const Json& j) {
  SimilarityMap m;
  m.sensor_ids = j.at("sensor_ids").get<std::vector<std::string>>();
  const std::size_t n = m.sensor_ids.size();
  const auto& scores = j.at("scores");
  const auto& valid = j.at("valid");
  if (scores.size() != n * n || valid.size() != n * n) throw FormatError("similarity map JSON has wrong size");
  m.scores = Matrix<double>(n, n);
  m.valid = BoolMatrix(n, n);
  for (std::size_t k = 0; k < n * n; ++k) {
    m.scores.values()[k] = scores[k].is_null() ? std::numeric_limits<double>::quiet_NaN() : scores[k].get<double>();
    m.valid.values()[k] = static_cast<std::uint8_t>(valid[k].get<int>() != 0);
  }
  return m;
}

// --- DistanceMatrix --------------------------------------------------------

inline void write_csv(std::ostream& out, const DistanceMatrix& d) {
  out << "id";
  for (const auto& id : d.item_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.item_ids[i];
    for (std::size_t j = 0; j < d.size(); ++j) out << ',' << format_double(d(i, j));
    out << '\n';
  }
}

inline DistanceMatrix read_distance_csv(std::istream& in) {
  std::vector<std::string> ids;
  const auto rows = detail::read_square_csv(in, ids);
  DistanceMatrix d{ids, Matrix<double>(ids.size(), ids.size(), 0.0)};
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j) d.dist(i, j) = detail::require_double(rows[i + 1][j + 1]);
  return d;
}

inline Json to_json(const DistanceMatrix& d) {
  return Json{{"item_ids", d.item_ids}, {"values", std::vector<double>(d.dist.values().begin(), d.dist.values().end())}};
}

inline DistanceMatrix distance_from_json(const Json& j) {
  DistanceMatrix d;
  d.item_ids = j.at("item_ids").get<std::vector<std::string>>();
  const auto values = j.at("values").get<std::vector<double>>();
  const std::size_t n = d.item_ids.size();
  if (values.size() != n * n) throw FormatError("distance matrix JSON has wrong size");
  d.dist = Matrix<double>(n, n);
  std::copy(values.begin(), values.end(), d.dist.values().begin());
  return d;
}

// --- LinkageTree -------------------------------------------------------------

inline void write_csv(std::ostream& out, const LinkageTree& t) {
  out << "left,right,height,size\n";
  for (const auto& m : t.merges)
    out << m.left << ',' << m.right << ',' << format_double(m.height) << ',' << m.size << '\n';
}

/// The merge table carries no ids; they are supplied separately.
inline LinkageTree read_linkage_csv(std::istream& in, std::vector<std::string> item_ids) {
  const auto rows = detail::read_csv_rows(in);
  if (rows.empty() || rows[0] != std::vector<std::string>{"left", "right", "height", "size"})
    throw FormatError("linkage CSV header must be left,right,height,size");
  LinkageTree t{std::move(item_ids), {}};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 4) throw FormatError("linkage CSV row must have 4 fields");
    Merge m;
    if (!detail::parse_int(rows[r][0], m.left) || !detail::parse_int(rows[r][1], m.right) ||
        !detail::parse_int(rows[r][3], m.size))
      throw FormatError("linkage CSV row has a bad index");
    m.height = detail::require_double(rows[r][2]);
    t.merges.push_back(m);
  }
  return t;
}

inline Json to_json(const LinkageTree& t) {
  Json merges = Json::array();
  for (const auto& m : t.merges) merges.push_back(Json::array({m.left, m.right, m.height, m.size}));
  return Json{{"item_ids", t.item_ids}, {"merges", std::move(merges)}};
}

inline LinkageTree linkage_from_json(const Json& j) {
  LinkageTree t;
  t.item_ids = j.at("item_ids").get<std::vector<std::string>>();
  for (const auto& m : j.at("merges"))
    t.merges.push_back({m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(), m.at(2).get<double>(),
                        m.at(3).get<std::size_t>()});
  return t;
}

// --- ClusterPartition --------------------------------------------------------

inline Json to_json(const ClusterPartition& p) {
  return Json{{"threshold", p.threshold}, {"clusters", p.clusters}, {"item_ids", p.item_ids}, {"labels", p.labels}};
}

inline ClusterPartition partition_from_json(const Json& j) {
  ClusterPartition p;
  p.threshold = j.at("threshold").get<double>();
  p.clusters = j.at("clusters").get<std::vector<std::vector<std::string>>>();
  p.item_ids = j.at("item_ids").get<std::vector<std::string>>();
  p.labels = j.at("labels").get<std::vector<int>>();
  return p;
}

// --- DivergenceReport --------------------------------------------------------

inline Json to_json(const DivergenceReport& r) {
  const std::size_t k = r.cluster_labels.size(), ns = r.sensor_ids.size();
  Json pairs = Json::array();
  for (std::size_t a = 0; a < k; ++a) {
    Json per_b = Json::array();
    for (std::size_t b = 0; b < k; ++b) {
      Json row = Json::array();
      for (std::size_t i = 0; i < ns; ++i) row.push_back(r.pair_scores(a, b, i));
      per_b.push_back(std::move(row));
    }
    pairs.push_back(std::move(per_b));
  }
  Json agg = Json::array(), flags = Json::array();
  for (std::size_t a = 0; a < k; ++a) {
    Json arow = Json::array(), frow = Json::array();
    for (std::size_t i = 0; i < ns; ++i) {
      arow.push_back(r.aggregate(a, i));
      frow.push_back(r.flags(a, i) != 0);
    }
    agg.push_back(std::move(arow));
    flags.push_back(std::move(frow));
  }
  return Json{{"alpha_phi", r.alpha_phi},     {"cluster_labels", r.cluster_labels}, {"sensor_ids", r.sensor_ids},
              {"pair_scores", std::move(pairs)}, {"aggregate", std::move(agg)},        {"flags", std::move(flags)}};
}

inline DivergenceReport divergence_from_json(const Json& j) {
  DivergenceReport r;
  r.alpha_phi = j.at("alpha_phi").get<double>();
  r.cluster_labels = j.at("cluster_labels").get<std::vector<int>>();
  r.sensor_ids = j.at("sensor_ids").get<std::vector<std::string>>();
  const std::size_t k = r.cluster_labels.size(), ns = r.sensor_ids.size();
  r.pair_scores = PairScores(k, ns);
  r.aggregate = Matrix<double>(k, ns);
  r.flags = BoolMatrix(k, ns);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t i = 0; i < ns; ++i) r.pair_scores(a, b, i) = j.at("pair_scores").at(a).at(b).at(i).get<double>();
    for (std::size_t i = 0; i < ns; ++i) {
      r.aggregate(a, i) = j.at("aggregate").at(a).at(i).get<double>();
      r.flags(a, i) = j.at("flags").at(a).at(i).get<bool>() ? 1 : 0;
    }
  }
  return r;
}

inline void write_pair_scores_csv(std::ostream& out, const DivergenceReport& r) {
  out << "cluster_a,cluster_b,sensor,psi\n";
  for (std::size_t a = 0; a < r.cluster_labels.size(); ++a)
    for (std::size_t b = 0; b < r.cluster_labels.size(); ++b)
      for (std::size_t i = 0; i < r.sensor_ids.size(); ++i)
        out << cluster_name(r.cluster_labels[a]) << ',' << cluster_name(r.cluster_labels[b]) << ','
            << r.sensor_ids[i] << ',' << format_double(r.pair_scores(a, b, i)) << '\n';
}

inline void write_aggregate_csv(std::ostream& out, const DivergenceReport& r) {
  out << "cluster,sensor,psi_bar,flagged\n";
  for (std::size_t a = 0; a < r.cluster_labels.size(); ++a)
    for (std::size_t i = 0; i < r.sensor_ids.size(); ++i)
      out << cluster_name(r.cluster_labels[a]) << ',' << r.sensor_ids[i] << ',' << format_double(r.aggregate(a, i))
          << ',' << (r.flags(a, i) ? "true" : "false") << '\n';
}

template <class T>
std::string to_csv_string(const T& value) {
  std::ostringstream os;
  write_csv(os, value);
  return os.str();
}

}  // namespace lidd
