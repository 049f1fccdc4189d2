#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "lidd/lidd.hpp"
#include "oracles.hpp"

using namespace lidd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lidd_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::vector<RawRecord> records_of(const std::vector<SensorFrame>& frames) {
  std::vector<RawRecord> out;
  for (const auto& f : frames)
    for (std::size_t t = 0; t < f.samples(); ++t)
      for (std::size_t c = 0; c < f.sensors(); ++c)
        if (f.mask(t, c)) out.push_back({f.grid[t], f.system_id, f.sensor_ids[c], f.values(t, c)});
  return out;
}

SensorFrame noisy_frame(const std::string& id, std::uint64_t seed, std::size_t T = 200) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> cols(4, std::vector<double>(T));
  for (std::size_t t = 0; t < T; ++t) {
    const double z = g(rng);
    cols[0][t] = z + 0.2 * g(rng);
    cols[1][t] = z + 0.2 * g(rng);
    cols[2][t] = -z + 0.2 * g(rng);
    cols[3][t] = g(rng);
  }
  return testutil::frame_from_columns(cols, {"a", "b", "c", "d"}, id);
}

}  // namespace

TEST(Serialize, SimilarityCsvRoundTrip) {
  std::mt19937_64 rng(1);
  auto m = testutil::random_map(5, rng);
  m.valid(0, 3) = m.valid(3, 0) = 0;
  m.scores(0, 3) = m.scores(3, 0) = 0.0;
  m.valid(1, 4) = m.valid(4, 1) = 0;
  m.scores(1, 4) = m.scores(4, 1) = std::numeric_limits<double>::quiet_NaN();
  std::istringstream in(to_csv_string(m));
  EXPECT_EQ(read_similarity_csv(in), m);
  EXPECT_EQ(similarity_from_json(Json::parse(to_json(m).dump())), m);
}

TEST(Serialize, DistanceAndLinkageRoundTrip) {
  std::mt19937_64 rng(2);
  const auto d = testutil::random_distances(6, rng);
  std::istringstream din(to_csv_string(d));
  EXPECT_EQ(read_distance_csv(din), d);
  EXPECT_EQ(distance_from_json(Json::parse(to_json(d).dump())), d);
  const auto t = agglomerate(d);
  std::istringstream tin(to_csv_string(t));
  EXPECT_EQ(read_linkage_csv(tin, d.item_ids), t);
  EXPECT_EQ(linkage_from_json(Json::parse(to_json(t).dump())), t);
  const auto p = cut(t, 0.4);
  EXPECT_EQ(partition_from_json(Json::parse(to_json(p).dump())), p);
}

TEST(Serialize, DivergenceRoundTrip) {
  std::mt19937_64 rng(3);
  std::vector<ClusterSensorMap> cms;
  for (int k = 0; k < 3; ++k) cms.push_back({k, 1, testutil::random_map(4, rng)});
  const auto r = divergence_report(cms, 0.3);
  EXPECT_EQ(divergence_from_json(Json::parse(to_json(r).dump())), r);
  std::ostringstream agg;
  write_aggregate_csv(agg, r);
  EXPECT_EQ(agg.str().substr(0, agg.str().find('\n')), "cluster,sensor,psi_bar,flagged");
}

TEST(Serialize, MalformedCsvIsFormatError) {
  std::istringstream bad("sensor,a,b\na,1\n");
  EXPECT_THROW(read_similarity_csv(bad), FormatError);
  std::istringstream bad_tree("l,r\n");
  EXPECT_THROW(read_linkage_csv(bad_tree, {}), FormatError);
}

TEST(Pipeline, TwoIdenticalSystems) {
  auto a = noisy_frame("A", 5), b = a;
  b.system_id = "B";
  RunConfig cfg;
  const auto r = analyze_frames({a, b}, cfg);
  EXPECT_EQ(r.system_partition->cluster_count(), 1u);
  for (const auto v : r.divergence->aggregate.values()) EXPECT_EQ(v, 0.0);
  for (const auto f : r.divergence->flags.values()) EXPECT_EQ(f, 0);
}

TEST(Pipeline, FewerThanTwoSystems) {
  RunConfig cfg;
  EXPECT_THROW(analyze_frames({noisy_frame("A", 1)}, cfg), InsufficientData);
  try {
    analyze_frames({}, cfg);
    FAIL();
  } catch (const InsufficientData& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient systems"), std::string::npos);
  }
}

TEST(Pipeline, ConfigErrorsNameField) {
  RunConfig cfg;
  cfg.alpha_rca = -1.0;
  try {
    analyze_frames({noisy_frame("A", 1), noisy_frame("B", 2)}, cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "alpha_rca");
  }
  cfg = RunConfig{};
  cfg.jobs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Pipeline, StagesAreConsistent) {
  // Two planted families: sensors a/b/c coupled, or a/b/c independent.
  std::vector<SensorFrame> frames;
  for (int k = 0; k < 3; ++k) frames.push_back(noisy_frame("F" + std::to_string(k), 10 + k, 400));
  for (int k = 0; k < 3; ++k) {
    std::mt19937_64 rng(50 + k);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> cols(4, std::vector<double>(400));
    for (auto& c : cols)
      for (auto& v : c) v = g(rng);
    frames.push_back(testutil::frame_from_columns(cols, {"a", "b", "c", "d"}, "G" + std::to_string(k)));
  }
  RunConfig cfg;
  cfg.alpha_system = 0.15;
  const auto r = analyze_frames(frames, cfg);
  ASSERT_EQ(r.system_partition->cluster_count(), 2u);
  EXPECT_EQ(r.system_partition->clusters[0], (std::vector<std::string>{"F0", "F1", "F2"}));
  // Each stage consumes the previous one's output.
  const auto d = system_distance_matrix(r.system_ids, r.system_maps);
  EXPECT_EQ(d, *r.system_distances);
  EXPECT_EQ(cut(agglomerate(d), cfg.alpha_system), *r.system_partition);
  const auto cms = cluster_sensor_maps(*r.system_partition, r.system_ids, r.system_maps);
  ASSERT_EQ(r.clusters.size(), cms.size());
  for (std::size_t c = 0; c < cms.size(); ++c) EXPECT_EQ(r.clusters[c].sensor_map.map, cms[c].map);
  EXPECT_EQ(*r.divergence, divergence_report(cms, cfg.alpha_rca));
  // Sensor "d" is independent in both families; a, b, c carry the divergence.
  for (const std::size_t i : {0, 1, 2}) EXPECT_GT(r.divergence->aggregate(0, i), r.divergence->aggregate(0, 3));
}

TEST(Pipeline, RecordsPathMatchesFramesPath) {
  const std::vector<SensorFrame> frames{noisy_frame("A", 1), noisy_frame("B", 2), noisy_frame("C", 3)};
  RunConfig cfg;
  const auto recs = records_of(frames);
  const auto via_records = analyze_records(recs, cfg);
  const auto rebuilt = build_frames(recs, cfg.ingest);
  const auto via_frames = analyze_frames(rebuilt, cfg);
  EXPECT_EQ(report_to_json(via_records).dump(), report_to_json(via_frames).dump());
}

TEST(Pipeline, JobsDoNotChangeResults) {
  std::vector<SensorFrame> frames;
  for (int k = 0; k < 7; ++k) frames.push_back(noisy_frame("S" + std::to_string(k), 100 + k));
  RunConfig one, many;
  many.jobs = 4;
  EXPECT_EQ(report_to_json(analyze_frames(frames, one)).dump(), report_to_json(analyze_frames(frames, many)).dump());
}

TEST(Report, FullRunWritesFigureSet) {
  const std::vector<SensorFrame> frames{noisy_frame("A", 1), noisy_frame("B", 2), noisy_frame("C", 3)};
  RunConfig cfg;
  cfg.alpha_system = 0.05;
  const auto r = analyze_frames(frames, cfg);
  const auto dir = scratch_dir("full");
  const auto manifest = write_report(r, dir);
  std::set<std::string> names;
  for (const auto& f : manifest.files) {
    names.insert(f.name);
    EXPECT_EQ(digest_file(dir / f.name), f);
  }
  for (const char* want : {"report.json", "system_distance_heatmap.svg", "system_dendrogram.svg",
                           "cluster_1_sensor_dendrogram.svg", "overall_sensor_dendrogram.svg",
                           "divergence_aggregate.svg", "divergence_flags.svg"})
    EXPECT_TRUE(names.contains(want)) << want;
  if (r.system_partition->cluster_count() >= 2) { EXPECT_TRUE(names.contains("divergence_pairs.svg")); }
  EXPECT_GE(manifest.files.size(), 6u);
  EXPECT_FALSE(names.contains("manifest.json"));
  EXPECT_FALSE(names.contains("run_metadata.json"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "run_metadata.json"));

  const auto j = Json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(j.at("schema_version"), kReportSchemaVersion);
  EXPECT_EQ(j.at("config").at("alpha_system"), 0.05);
  EXPECT_EQ(j.at("config").at("linkage"), "average");
  EXPECT_FALSE(j.at("config").contains("jobs"));

  // Rewriting the same analysis reproduces report.json byte for byte.
  const auto first = read_file(dir / "report.json");
  write_report(r, dir);
  EXPECT_EQ(read_file(dir / "report.json"), first);
  fs::remove_all(dir);
}

TEST(Report, EmptyReportHasNoFigures) {
  AnalysisReport r;
  const auto dir = scratch_dir("empty");
  const auto manifest = write_report(r, dir);
  ASSERT_EQ(manifest.files.size(), 1u);
  EXPECT_EQ(manifest.files[0].name, "report.json");
  const auto j = Json::parse(read_file(dir / "report.json"));
  EXPECT_TRUE(j.at("clusters").empty());
  EXPECT_TRUE(j.at("divergence").is_null());
  const auto m = Json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(m.at("files").size(), 1u);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".svg");
  fs::remove_all(dir);
}

TEST(Report, UnwritableDirectoryIsIoError) {
  const auto dir = scratch_dir("blocker");
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(write_report(AnalysisReport{}, dir / "file" / "sub"), IoError);
  fs::remove_all(dir);
}

TEST(Report, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
