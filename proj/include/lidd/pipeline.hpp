#pragma once

// End-to-end analysis: clean frames -> sensor maps -> system distances ->
// system clusters -> per-cluster and overall sensor clusters -> divergence.

#include <filesystem>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lidd/clustering.hpp"
#include "lidd/divergence.hpp"
#include "lidd/report.hpp"
#include "lidd/similarity.hpp"
#include "lidd/timeseries.hpp"

namespace lidd {

/// Input data cannot support an analysis (e.g. fewer than two systems).
class InsufficientData : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::vector<std::filesystem::path> inputs;
  CsvFormat format = CsvFormat::long_csv;
  IngestConfig ingest;
  SimilarityConfig similarity;
  Linkage linkage = Linkage::average;
  double alpha_system = 0.007;
  double alpha_sensor = 0.05;
  double alpha_rca = 0.15;
  std::filesystem::path out_dir = "lidd-out";
  unsigned jobs = 1;

  void validate() const {
    ingest.validate();
    similarity.validate();
    if (!(alpha_system >= 0.0)) throw ConfigError("alpha_system", "must be >= 0");
    if (!(alpha_sensor >= 0.0)) throw ConfigError("alpha_sensor", "must be >= 0");
    if (!(alpha_rca >= 0.0)) throw ConfigError("alpha_rca", "must be >= 0");
    if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
  }

  /// Every setting that influences results. Worker count and output path
  /// are run facts, not analysis settings, and are left out.
  Json echo() const {
    return Json{{"format", format == CsvFormat::long_csv ? "long" : "wide"},
                {"resample_interval_s", ingest.resample_interval.count()},
                {"aggregator", ingest.aggregator == Aggregator::median ? "median" : "mean"},
                {"despike_window", ingest.despike_window},
                {"max_gap_fill", ingest.max_gap_fill},
                {"min_coverage", ingest.min_coverage},
                {"cleaning_order", "despike,fill_gaps"},
                {"similarity", "pearson"},
                {"min_overlap", similarity.min_overlap},
                {"undefined_policy",
                 similarity.undefined_policy == UndefinedPolicy::zero_with_flag ? "zero_with_flag" : "invalidate"},
                {"linkage", std::string(to_string(linkage))},
                {"alpha_system", alpha_system},
                {"alpha_sensor", alpha_sensor},
                {"alpha_rca", alpha_rca}};
  }
};

/// Runs every stage on already gridded (uncleaned) frames.
inline AnalysisReport analyze_frames(const std::vector<SensorFrame>& raw, const RunConfig& cfg) {
  cfg.validate();
  AnalysisReport report;
  report.config = cfg.echo();
  report.alpha_system = cfg.alpha_system;
  report.alpha_sensor = cfg.alpha_sensor;
  if (raw.size() < 2)
    throw InsufficientData(fmt::format("insufficient systems: need at least 2, got {}", raw.size()));

  const std::size_t n = raw.size();
  std::vector<SensorFrame> frames(n);
  report.system_maps.resize(n);
  parallel_for(n, cfg.jobs, [&](std::size_t k) {
    frames[k] = clean_frame(raw[k], cfg.ingest);
    report.system_maps[k] = sensor_similarity_map(frames[k], cfg.similarity);
  });
  for (std::size_t k = 0; k < n; ++k) {
    report.system_ids.push_back(frames[k].system_id);
    if (frames[k].sensor_ids != frames[0].sensor_ids)
      throw ContractViolation("frames do not share one sensor ordering");
    for (const auto& cov : coverage_check(frames[k], cfg.ingest.min_coverage))
      if (cov.below_minimum)
        report.warnings.push_back(fmt::format("low coverage: {} {} observed fraction {:.3f}", frames[k].system_id,
                                              cov.sensor_id, cov.fraction));
    if (const auto undefined = undefined_pairs(report.system_maps[k]); undefined > 0)
      report.warnings.push_back(
          fmt::format("undefined correlations: {} has {} undefined sensor pairs", frames[k].system_id, undefined));
  }

  report.system_distances = system_distance_matrix(report.system_ids, report.system_maps, cfg.jobs);
  report.system_tree = agglomerate(*report.system_distances, cfg.linkage);
  report.system_partition = cut(*report.system_tree, cfg.alpha_system);

  const auto cmaps = cluster_sensor_maps(*report.system_partition, report.system_ids, report.system_maps);
  report.clusters.resize(cmaps.size());
  parallel_for(cmaps.size(), cfg.jobs, [&](std::size_t c) {
    auto& detail = report.clusters[c];
    detail.sensor_map = cmaps[c];
    detail.members = report.system_partition->clusters[c];
    detail.sensor_tree = sensor_linkage_per_cluster(cmaps[c], cfg.linkage);
    detail.sensor_partition = cut(*detail.sensor_tree, cfg.alpha_sensor);
  });
  report.overall = overall_sensor_clustering(cmaps, cfg.alpha_sensor, cfg.linkage);
  report.divergence = divergence_report(cmaps, cfg.alpha_rca);
  return report;
}

inline AnalysisReport analyze_records(std::span<const RawRecord> records, const RunConfig& cfg) {
  cfg.validate();
  if (records.empty()) throw InsufficientData("insufficient systems: no valid records");
  return analyze_frames(build_frames(records, cfg.ingest), cfg);
}

}  // namespace lidd
