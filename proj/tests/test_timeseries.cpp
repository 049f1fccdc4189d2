#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lidd/timeseries.hpp"
#include "oracles.hpp"

using namespace lidd;
using std::chrono::hours;
using std::chrono::seconds;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Instant at(std::int64_t s) { return Instant{seconds{s}}; }

std::vector<double> column(const SensorFrame& f, std::size_t c) {
  std::vector<double> out;
  for (std::size_t t = 0; t < f.samples(); ++t) out.push_back(f.mask(t, c) ? f.values(t, c) : kNaN);
  return out;
}

void expect_column(const SensorFrame& f, std::size_t c, const std::vector<double>& want) {
  const auto got = column(f, c);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t t = 0; t < want.size(); ++t) {
    if (std::isnan(want[t])) {
      EXPECT_TRUE(std::isnan(got[t])) << "cell " << t;
    } else {
      EXPECT_EQ(got[t], want[t]) << "cell " << t;
    }
  }
}

}  // namespace

TEST(Timestamp, ParsesUtcAndOffsets) {
  EXPECT_EQ(format_timestamp(*parse_timestamp("2022-08-01T00:00:00Z")), "2022-08-01T00:00:00Z");
  EXPECT_EQ(*parse_timestamp("2022-08-01 02:30:00+02:00"), *parse_timestamp("2022-08-01T00:30:00Z"));
  EXPECT_EQ(*parse_timestamp("2022-08-01T00:00:00.750Z"), *parse_timestamp("2022-08-01T00:00:00Z"));
  EXPECT_EQ(*parse_timestamp("2022-08-01T00:00:00"), *parse_timestamp("2022-08-01T00:00:00Z"));
  EXPECT_FALSE(parse_timestamp("2022-13-01T00:00:00Z"));
  EXPECT_FALSE(parse_timestamp("yesterday"));
  EXPECT_EQ(format_timestamp(at(-1)), "1969-12-31T23:59:59Z");
}

TEST(Duration, Units) {
  EXPECT_EQ(parse_duration("3600"), seconds{3600});
  EXPECT_EQ(parse_duration("90s"), seconds{90});
  EXPECT_EQ(parse_duration("15m"), seconds{900});
  EXPECT_EQ(parse_duration("15min"), seconds{900});
  EXPECT_EQ(parse_duration("1h"), seconds{3600});
  EXPECT_EQ(parse_duration("2d"), seconds{172800});
  EXPECT_THROW(parse_duration("0h"), ConfigError);
  EXPECT_THROW(parse_duration("3w"), ConfigError);
  try {
    parse_duration("fast");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "resample");
  }
}

TEST(ParseRecords, LongRowMapsFields) {
  std::istringstream in("timestamp,system,sensor,value\n2022-08-01T00:00:00Z,HEP01,SCH,41.2\n");
  const auto r = parse_records(in, CsvFormat::long_csv);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].system_id, "HEP01");
  EXPECT_EQ(r.records[0].sensor_id, "SCH");
  EXPECT_EQ(r.records[0].value, 41.2);
  EXPECT_EQ(r.records[0].timestamp, *parse_timestamp("2022-08-01T00:00:00Z"));
  EXPECT_EQ(r.skipped, 0u);
}

TEST(ParseRecords, NaNRowIsSkippedWithWarning) {
  std::istringstream in(
      "timestamp,system,sensor,value\n"
      "2022-08-01T00:00:00Z,HEP01,SCH,NaN\n"
      "2022-08-01T01:00:00Z,HEP01,SCH,40\n");
  const auto r = parse_records(in, CsvFormat::long_csv);
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(ParseRecords, ColumnOrderFollowsHeader) {
  std::istringstream in("value,sensor,system,timestamp\n3.5,SPV,HEP02,2022-08-01T00:00:00Z\n");
  const auto r = parse_records(in, CsvFormat::long_csv);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].system_id, "HEP02");
  EXPECT_EQ(r.records[0].value, 3.5);
}

TEST(ParseRecords, WideExpandsRowsTimesColumns) {
  std::ostringstream csv;
  const auto& names = std::vector<std::string>{"SPV", "SPC", "SRT", "SCH", "Q1H", "Q2H",
                                               "Q3H", "Q4H", "Q1T", "Q2T", "Q3T", "Q4T"};
  csv << "timestamp";
  for (const auto& n : names) csv << ',' << n;
  csv << '\n';
  for (int r = 0; r < 3; ++r) {
    csv << "2022-08-01T0" << r << ":00:00Z";
    for (std::size_t c = 0; c < names.size(); ++c) csv << ',' << r * 100 + static_cast<int>(c);
    csv << '\n';
  }
  std::istringstream in(csv.str());
  const auto r = parse_records(in, CsvFormat::wide_csv, "HEP03");
  EXPECT_EQ(r.records.size(), 36u);
  EXPECT_EQ(r.records[13].sensor_id, "SPC");
  EXPECT_EQ(r.records[13].value, 101.0);
  EXPECT_EQ(r.records[13].system_id, "HEP03");
}

TEST(ParseRecords, MissingHeaderColumnIsFormatError) {
  std::istringstream in("timestamp,system,value\n");
  EXPECT_THROW(parse_records(in, CsvFormat::long_csv), FormatError);
  std::istringstream empty("");
  EXPECT_THROW(parse_records(empty, CsvFormat::long_csv), FormatError);
  std::istringstream wide("time,SPV\n");
  EXPECT_THROW(parse_records(wide, CsvFormat::wide_csv, "X"), FormatError);
}

TEST(ParseRecords, UnreadableStreamIsIoError) {
  std::istringstream in("timestamp,system,sensor,value\n");
  in.setstate(std::ios::badbit);
  EXPECT_THROW(parse_records(in, CsvFormat::long_csv), IoError);
  EXPECT_THROW(parse_records_file("/nonexistent/file.csv", CsvFormat::long_csv), IoError);
}

TEST(ParseRecords, SystemWithOnlyMalformedRowsIsOmitted) {
  std::istringstream in(
      "timestamp,system,sensor,value\n"
      "2022-08-01T00:00:00Z,BAD,SCH,inf\n"
      "2022-08-01T00:00:00Z,GOOD,SCH,1\n");
  const auto r = parse_records(in, CsvFormat::long_csv);
  ASSERT_EQ(r.records.size(), 1u);
  bool omitted = false;
  for (const auto& w : r.warnings) omitted = omitted || w.find("system BAD omitted") != std::string::npos;
  EXPECT_TRUE(omitted);
}

TEST(BuildFrames, MedianOfThreeInOneBin) {
  IngestConfig cfg;
  std::vector<RawRecord> recs{{at(0), "A", "x", 1.0}, {at(600), "A", "x", 100.0}, {at(1200), "A", "x", 2.0}};
  const auto frames = build_frames(recs, cfg);
  ASSERT_EQ(frames.size(), 1u);
  ASSERT_EQ(frames[0].samples(), 1u);
  EXPECT_EQ(frames[0].values(0, 0), 2.0);
  cfg.aggregator = Aggregator::mean;
  EXPECT_NEAR(build_frames(recs, cfg)[0].values(0, 0), 103.0 / 3.0, 1e-12);
}

TEST(BuildFrames, EmptyBinIsMasked) {
  std::vector<RawRecord> recs{{at(0), "A", "x", 1.0}, {at(7200), "A", "x", 3.0}};
  const auto f = build_frames(recs, IngestConfig{})[0];
  ASSERT_EQ(f.samples(), 3u);
  EXPECT_EQ(f.mask(1, 0), 0);
  EXPECT_EQ(f.mask(0, 0), 1);
  EXPECT_EQ(f.mask(2, 0), 1);
}

TEST(BuildFrames, SensorUnionAcrossSystems) {
  std::vector<RawRecord> recs{{at(0), "A", "Q1T", 1.0}, {at(0), "A", "Q4T", 2.0}, {at(0), "B", "Q1T", 3.0}};
  const auto frames = build_frames(recs, IngestConfig{});
  ASSERT_EQ(frames.size(), 2u);
  for (const auto& f : frames) EXPECT_EQ(f.sensor_ids, (std::vector<std::string>{"Q1T", "Q4T"}));
  EXPECT_EQ(frames[1].system_id, "B");
  for (std::size_t t = 0; t < frames[1].samples(); ++t) EXPECT_EQ(frames[1].mask(t, 1), 0);
}

TEST(BuildFrames, GridIsEpochAlignedAndEvenlySpaced) {
  IngestConfig cfg;
  cfg.resample_interval = seconds{900};
  std::vector<RawRecord> recs{{at(1000), "A", "x", 1.0}, {at(5000), "A", "x", 2.0}};
  const auto f = build_frames(recs, cfg)[0];
  EXPECT_EQ(f.grid.front(), at(900));
  EXPECT_EQ(f.grid.back(), at(4500));
  for (std::size_t t = 1; t < f.samples(); ++t) EXPECT_EQ(f.grid[t] - f.grid[t - 1], seconds{900});
}

TEST(BuildFrames, RejectsEmptyInputAndBadConfig) {
  EXPECT_THROW(build_frames({}, IngestConfig{}), ContractViolation);
  IngestConfig bad;
  bad.despike_window = 4;
  std::vector<RawRecord> recs{{at(0), "A", "x", 1.0}};
  EXPECT_THROW(build_frames(recs, bad), ConfigError);
}

TEST(Despike, SingleSpikeRemoved) {
  const auto f = despike(testutil::frame_from_columns({{1, 1, 9, 1, 1}}), 3);
  expect_column(f, 0, {1, 1, 1, 1, 1});
}

TEST(Despike, ConstantColumnUnchanged) {
  const auto f = despike(testutil::frame_from_columns({{2, 2, 2}}), 3);
  expect_column(f, 0, {2, 2, 2});
}

TEST(Despike, WindowFiveCenter) {
  const auto f = despike(testutil::frame_from_columns({{1, 4, 1, 4, 1}}), 5);
  EXPECT_EQ(f.values(2, 0), 1.0);
}

TEST(Despike, MaskedCellsIgnoredAndKept) {
  const auto f = despike(testutil::frame_from_columns({{1, kNaN, 50, 3, 3}}), 3);
  expect_column(f, 0, {1, kNaN, 26.5, 3, 3});
}

TEST(FillGaps, MidpointOfSingleGap) {
  expect_column(fill_gaps(testutil::frame_from_columns({{10, kNaN, 20}}), 1), 0, {10, 15, 20});
}

TEST(FillGaps, LongGapStaysMasked) {
  expect_column(fill_gaps(testutil::frame_from_columns({{10, kNaN, kNaN, 20}}), 1), 0, {10, kNaN, kNaN, 20});
}

TEST(FillGaps, LeadingGapStaysMasked) {
  expect_column(fill_gaps(testutil::frame_from_columns({{kNaN, 5, 5}}), 3), 0, {kNaN, 5, 5});
}

TEST(Coverage, Fractions) {
  std::vector<double> partial(120, kNaN);
  for (int t = 0; t < 30; ++t) partial[static_cast<std::size_t>(t) * 4] = 1.0;
  const auto f = testutil::frame_from_columns({std::vector<double>(120, 1.0), std::vector<double>(120, kNaN), partial});
  const auto cov = coverage_check(f, 0.5);
  EXPECT_EQ(cov[0].fraction, 1.0);
  EXPECT_FALSE(cov[0].below_minimum);
  EXPECT_EQ(cov[1].fraction, 0.0);
  EXPECT_TRUE(cov[1].below_minimum);
  EXPECT_EQ(cov[2].fraction, 0.25);
  EXPECT_TRUE(cov[2].below_minimum);
}

// Random frames for the cleaning invariants.
class CleaningProperties : public ::testing::TestWithParam<int> {};

TEST_P(CleaningProperties, Invariants) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()));
  std::uniform_real_distribution<double> u(-5.0, 5.0), coin(0.0, 1.0);
  std::vector<std::vector<double>> cols(4, std::vector<double>(60));
  for (auto& c : cols)
    for (auto& v : c) v = coin(rng) < 0.25 ? kNaN : u(rng);
  const auto f = testutil::frame_from_columns(cols);

  const auto d = despike(f, 5);
  EXPECT_EQ(d.mask, f.mask);
  for (std::size_t c = 0; c < f.sensors(); ++c) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t t = 0; t < f.samples(); ++t)
      if (f.mask(t, c)) {
        lo = std::min(lo, f.values(t, c));
        hi = std::max(hi, f.values(t, c));
      }
    for (std::size_t t = 0; t < f.samples(); ++t)
      if (d.mask(t, c)) {
        EXPECT_GE(d.values(t, c), lo);
        EXPECT_LE(d.values(t, c), hi);
      }
  }

  EXPECT_EQ(fill_gaps(f, 0), f);
  const auto g = fill_gaps(f, 3);
  for (std::size_t t = 0; t < f.samples(); ++t)
    for (std::size_t c = 0; c < f.sensors(); ++c)
      if (f.mask(t, c)) {
        EXPECT_EQ(g.mask(t, c), 1);
        EXPECT_EQ(g.values(t, c), f.values(t, c));
      }
}

INSTANTIATE_TEST_SUITE_P(Seeds, CleaningProperties, ::testing::Range(1, 21));

TEST(RoundTrip, BuildSerializeParseBuildIsFixedPoint) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-100.0, 100.0), coin(0.0, 1.0);
  std::vector<RawRecord> recs;
  const std::vector<std::string> sensors{"a", "b", "c"};
  for (const std::string sys : {"S1", "S2", "S3"})
    for (int k = 0; k < 400; ++k) {
      const auto ts = at(1'650'000'000 + static_cast<std::int64_t>(coin(rng) * 86400 * 5));
      recs.push_back({ts, sys, sensors[static_cast<std::size_t>(coin(rng) * 3) % 3], u(rng) / 7.0});
    }
  IngestConfig cfg;
  const auto first = build_frames(recs, cfg);
  std::ostringstream out;
  write_long_csv(out, first);
  std::istringstream in(out.str());
  const auto parsed = parse_records(in, CsvFormat::long_csv);
  EXPECT_EQ(parsed.skipped, 0u);
  const auto second = build_frames(parsed.records, cfg);
  EXPECT_EQ(first, second);

  // Resampling gridded records again is idempotent as well.
  std::ostringstream again;
  write_long_csv(again, second);
  EXPECT_EQ(out.str(), again.str());
}

TEST(Config, Validation) {
  IngestConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.min_coverage = 1.5;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "min_coverage");
  }
}
