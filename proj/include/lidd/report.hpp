#pragma once

// Consolidated analysis report: report.json, CSV tables, SVG figures and a
// manifest of content hashes. Everything except run_metadata.json is a
// deterministic function of the analysis results.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "lidd/clustering.hpp"
#include "lidd/divergence.hpp"
#include "lidd/render.hpp"
#include "lidd/serialize.hpp"

namespace lidd {

inline constexpr int kReportSchemaVersion = 1;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct FileDigest {
  std::string name;
  std::uintmax_t bytes = 0;
  std::string sha256;

  friend bool operator==(const FileDigest&, const FileDigest&) = default;
};

inline FileDigest digest_file(const std::filesystem::path& path) {
  const auto content = read_file(path);
  return {path.filename().string(), content.size(), sha256_hex(content)};
}

struct ClusterDetail {
  ClusterSensorMap sensor_map;
  std::vector<std::string> members;
  std::optional<LinkageTree> sensor_tree;
  std::optional<ClusterPartition> sensor_partition;
};

struct AnalysisReport {
  Json config = Json::object();  // echo of every threshold and default in effect
  std::vector<FileDigest> inputs;
  std::vector<std::string> warnings;
  double alpha_system = 0.0;
  double alpha_sensor = 0.0;

  std::vector<std::string> system_ids;
  std::vector<SimilarityMap> system_maps;
  std::optional<DistanceMatrix> system_distances;
  std::optional<LinkageTree> system_tree;
  std::optional<ClusterPartition> system_partition;
  std::vector<ClusterDetail> clusters;
  std::optional<OverallSensorClustering> overall;
  std::optional<DivergenceReport> divergence;

  // Run-specific facts (wall-clock times, output path, worker count). Kept
  // out of report.json so that file stays reproducible.
  Json metadata = Json::object();
};

inline Json report_to_json(const AnalysisReport& r) {
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["tool"] = "lidd";
  j["config"] = r.config;
  Json inputs = Json::array();
  for (const auto& d : r.inputs) inputs.push_back({{"name", d.name}, {"bytes", d.bytes}, {"sha256", d.sha256}});
  j["inputs"] = std::move(inputs);
  j["systems"] = r.system_ids;
  Json maps = Json::object();
  for (std::size_t k = 0; k < r.system_maps.size(); ++k) maps[r.system_ids.at(k)] = to_json(r.system_maps[k]);
  j["system_maps"] = std::move(maps);
  j["system_distance"] = r.system_distances ? to_json(*r.system_distances) : Json();
  j["system_linkage"] = r.system_tree ? to_json(*r.system_tree) : Json();
  j["system_partition"] = r.system_partition ? to_json(*r.system_partition) : Json();
  Json clusters = Json::array();
  for (const auto& c : r.clusters) {
    Json cj;
    cj["label"] = c.sensor_map.cluster_label;
    cj["name"] = cluster_name(c.sensor_map.cluster_label);
    cj["member_count"] = c.sensor_map.member_count;
    cj["members"] = c.members;
    cj["sensor_map"] = to_json(c.sensor_map.map);
    cj["sensor_linkage"] = c.sensor_tree ? to_json(*c.sensor_tree) : Json();
    cj["sensor_partition"] = c.sensor_partition ? to_json(*c.sensor_partition) : Json();
    clusters.push_back(std::move(cj));
  }
  j["clusters"] = std::move(clusters);
  if (r.overall) {
    j["overall_sensor"] = {{"map", to_json(r.overall->map)},
                           {"linkage", to_json(r.overall->tree)},
                           {"partition", to_json(r.overall->partition)}};
  } else {
    j["overall_sensor"] = nullptr;
  }
  j["divergence"] = r.divergence ? to_json(*r.divergence) : Json();
  j["warnings"] = r.warnings;
  return j;
}

struct Manifest {
  std::vector<FileDigest> files;
};

inline Json to_json(const Manifest& m) {
  Json files = Json::array();
  for (const auto& f : m.files) files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  return Json{{"schema_version", kReportSchemaVersion}, {"files", std::move(files)}};
}

/// Writes report.json, CSV tables and SVG figures into out_dir, then
/// manifest.json (listing every file above) and run_metadata.json (which
/// the manifest deliberately omits).
inline Manifest write_report(const AnalysisReport& r, const std::filesystem::path& out_dir,
                             const RenderSpec& spec = {}) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory " + out_dir.string());

  Manifest manifest;
  auto emit = [&](const std::string& name, const std::string& content, bool listed = true) {
    const auto path = out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw IoError("cannot write " + path.string());
    if (listed) manifest.files.push_back({name, content.size(), sha256_hex(content)});
  };
  auto csv = [](auto&& writer) {
    std::ostringstream os;
    writer(os);
    return os.str();
  };

  emit("report.json", report_to_json(r).dump(2) + "\n");

  if (r.system_distances) {
    emit("system_distance.csv", to_csv_string(*r.system_distances));
    emit("system_distance_heatmap.svg",
         render_heatmap(*r.system_distances, spec, "System dissimilarity (map distance)"));
  }
  if (r.system_tree) {
    emit("system_linkage.csv", to_csv_string(*r.system_tree));
    emit("system_dendrogram.svg", render_dendrogram(*r.system_tree, r.alpha_system, spec, "System clustering"));
  }
  for (const auto& c : r.clusters) {
    const std::string stem = "cluster_" + std::to_string(c.sensor_map.cluster_label + 1);
    const std::string name = cluster_name(c.sensor_map.cluster_label);
    emit(stem + "_sensor_map.csv", to_csv_string(c.sensor_map.map));
    emit(stem + "_sensor_heatmap.svg", render_heatmap(c.sensor_map.map, spec, name + " sensor interconnection"));
    if (c.sensor_tree) {
      emit(stem + "_sensor_linkage.csv", to_csv_string(*c.sensor_tree));
      emit(stem + "_sensor_dendrogram.svg",
           render_dendrogram(*c.sensor_tree, r.alpha_sensor, spec, name + " sensor clustering"));
    }
  }
  if (r.overall) {
    emit("overall_sensor_map.csv", to_csv_string(r.overall->map));
    emit("overall_sensor_linkage.csv", to_csv_string(r.overall->tree));
    emit("overall_sensor_dendrogram.svg",
         render_dendrogram(r.overall->tree, r.alpha_sensor, spec, "Sensor clustering across system clusters"));
  }
  if (r.divergence) {
    emit("divergence_pairs.csv", csv([&](std::ostream& os) { write_pair_scores_csv(os, *r.divergence); }));
    emit("divergence_aggregate.csv", csv([&](std::ostream& os) { write_aggregate_csv(os, *r.divergence); }));
    if (r.divergence->cluster_labels.size() >= 2)
      emit("divergence_pairs.svg", render_divergence_pairs(*r.divergence, spec));
    auto figs = render_divergence(*r.divergence, spec);
    emit("divergence_aggregate.svg", figs.aggregate_svg);
    emit("divergence_flags.svg", figs.flags_svg);
  }

  emit("manifest.json", to_json(manifest).dump(2) + "\n", false);
  emit("run_metadata.json", r.metadata.dump(2) + "\n", false);
  return manifest;
}

}  // namespace lidd
