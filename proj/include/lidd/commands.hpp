#pragma once

// The analyze / generate / inspect commands behind the lidd binary. They
// report failures by throwing; the binary maps exception types to exit
// codes.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lidd/pipeline.hpp"
#include "lidd/report.hpp"
#include "lidd/synthetic.hpp"

namespace lidd {

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Files named on the command line; directories expand to their *.csv
/// entries in name order.
inline std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs) {
  std::vector<std::filesystem::path> out;
  for (const auto& p : inputs) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& e : std::filesystem::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (std::filesystem::exists(p)) {
      out.push_back(p);
    } else {
      throw IoError("input not found: " + p.string());
    }
  }
  if (out.empty()) throw IoError("no input files");
  return out;
}

inline std::string utc_now() {
  return format_timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

inline void print_summary(std::ostream& out, const AnalysisReport& r) {
  if (r.system_partition) {
    out << fmt::format("{} systems -> {} clusters at alpha_system = {}\n", r.system_ids.size(),
                       r.system_partition->cluster_count(), r.alpha_system);
    for (std::size_t c = 0; c < r.system_partition->clusters.size(); ++c) {
      const auto& members = r.system_partition->clusters[c];
      out << fmt::format("  {} ({}): {}\n", cluster_name(static_cast<int>(c)), members.size(),
                         fmt::join(members, " "));
    }
  }
  if (r.divergence) {
    const auto& d = *r.divergence;
    std::size_t flagged = 0;
    for (std::size_t a = 0; a < d.cluster_labels.size(); ++a) {
      std::vector<std::string> sensors;
      for (std::size_t i = 0; i < d.sensor_ids.size(); ++i)
        if (d.flags(a, i)) sensors.push_back(d.sensor_ids[i]);
      flagged += sensors.size();
      if (!sensors.empty())
        out << fmt::format("  root causes {}: {}\n", cluster_name(d.cluster_labels[a]), fmt::join(sensors, " "));
    }
    if (flagged == 0) out << fmt::format("  no root-cause flags at alpha_rca = {}\n", d.alpha_phi);
  }
}

/// Full pipeline from input files to the report directory.
inline AnalysisReport cmd_analyze(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const auto started = utc_now();
  const auto files = expand_inputs(cfg.inputs);
  std::vector<RawRecord> records;
  std::vector<FileDigest> digests;
  std::vector<std::string> warnings;
  std::size_t skipped = 0;
  for (const auto& f : files) {
    const auto content = read_file(f);
    digests.push_back({f.filename().string(), content.size(), sha256_hex(content)});
    std::istringstream in(content);
    auto parsed = parse_records(in, cfg.format, cfg.format == CsvFormat::wide_csv ? f.stem().string() : "");
    skipped += parsed.skipped;
    for (auto& w : parsed.warnings) warnings.push_back(f.filename().string() + ": " + w);
    records.insert(records.end(), std::make_move_iterator(parsed.records.begin()),
                   std::make_move_iterator(parsed.records.end()));
  }
  if (skipped > 0) warnings.insert(warnings.begin(), fmt::format("skipped {} malformed rows or cells", skipped));

  AnalysisReport report = analyze_records(records, cfg);
  report.inputs = std::move(digests);
  warnings.insert(warnings.end(), report.warnings.begin(), report.warnings.end());
  report.warnings = std::move(warnings);
  report.metadata = Json{{"started_at", started},
                         {"finished_at", utc_now()},
                         {"out_dir", cfg.out_dir.string()},
                         {"jobs", cfg.jobs},
                         {"report_schema_version", kReportSchemaVersion}};
  write_report(report, cfg.out_dir);
  print_summary(out, report);
  return report;
}

/// Writes corpus.csv (long format) and ground_truth.json into out_dir.
inline SyntheticCorpus cmd_generate(const SyntheticSpec& spec, const std::filesystem::path& out_dir,
                                    std::ostream& out) {
  auto corpus = generate_corpus(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory " + out_dir.string());
  {
    std::ofstream csv(out_dir / "corpus.csv", std::ios::binary | std::ios::trunc);
    write_long_csv(csv, corpus.frames);
    if (!csv) throw IoError("cannot write " + (out_dir / "corpus.csv").string());
  }
  {
    std::ofstream gt(out_dir / "ground_truth.json", std::ios::binary | std::ios::trunc);
    gt << ground_truth_json(spec, corpus).dump(2) << '\n';
    if (!gt) throw IoError("cannot write " + (out_dir / "ground_truth.json").string());
  }
  out << fmt::format("generated {} systems x {} sensors x {} samples in {} groups -> {}\n", spec.n_systems,
                     spec.n_sensors, spec.n_samples, spec.groups(), out_dir.string());
  return corpus;
}

namespace detail {

inline void print_table(std::ostream& out, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      s += cells[c];
      if (c + 1 < cells.size()) s += std::string(width[c] - cells[c].size() + 2, ' ');
    }
    out << s << '\n';
  };
  line(header);
  std::vector<std::string> rule;
  for (const auto w : width) rule.emplace_back(w, '-');
  line(rule);
  for (const auto& r : rows) line(r);
}

}  // namespace detail

/// Prints one section of a report.json as an aligned table.
inline void cmd_inspect(const std::filesystem::path& report_path, const std::string& query, std::ostream& out) {
  if (query != "clusters" && query != "sensors" && query != "rca")
    throw UsageError("unknown query '" + query + "' (expected clusters, sensors or rca)");
  Json j;
  try {
    j = Json::parse(read_file(report_path));
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("cannot parse report: ") + e.what());
  }
  try {
    if (query == "clusters") {
      std::vector<std::vector<std::string>> rows;
      if (!j.at("system_partition").is_null()) {
        const auto part = partition_from_json(j.at("system_partition"));
        for (std::size_t c = 0; c < part.clusters.size(); ++c)
          rows.push_back({cluster_name(static_cast<int>(c)), std::to_string(part.clusters[c].size()),
                          fmt::format("{}", fmt::join(part.clusters[c], " "))});
      }
      detail::print_table(out, {"cluster", "size", "members"}, rows);
    } else if (query == "sensors") {
      std::vector<std::vector<std::string>> rows;
      auto add = [&](const std::string& scope, const Json& pj) {
        if (pj.is_null()) return;
        const auto part = partition_from_json(pj);
        for (std::size_t g = 0; g < part.clusters.size(); ++g)
          rows.push_back({scope, std::to_string(g + 1), fmt::format("{}", fmt::join(part.clusters[g], " "))});
      };
      if (!j.at("overall_sensor").is_null()) add("overall", j.at("overall_sensor").at("partition"));
      for (const auto& c : j.at("clusters")) add(c.at("name").get<std::string>(), c.at("sensor_partition"));
      detail::print_table(out, {"scope", "group", "sensors"}, rows);
    } else {
      std::vector<std::vector<std::string>> rows;
      if (!j.at("divergence").is_null()) {
        const auto d = divergence_from_json(j.at("divergence"));
        for (std::size_t a = 0; a < d.cluster_labels.size(); ++a)
          for (std::size_t i = 0; i < d.sensor_ids.size(); ++i)
            if (d.flags(a, i))
              rows.push_back({cluster_name(d.cluster_labels[a]), d.sensor_ids[i], fmt::format("{:.4f}", d.aggregate(a, i))});
      }
      detail::print_table(out, {"cluster", "sensor", "psi_bar"}, rows);
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace lidd
