// lidd: command-line driver for analyze / generate / inspect.

#include <cstdlib>
#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "lidd/lidd.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 2, kInput = 3, kContract = 4 };

void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("LIDD_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str falls back to "off" for unknown names; only accept it when asked for.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
  spdlog::set_pattern("[%l] %v");
}

int fail(int code, std::string_view kind, const std::string& message) {
  std::cerr << "error[" << kind << "]: " << message << '\n';
  return code;
}

lidd::Injection parse_injection(const std::string& text, std::size_t n_sensors) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
  if (parts.size() < 2 || parts.size() > 3)
    throw lidd::ConfigError("inject", "expected group:sensor[:magnitude], got '" + text + "'");
  lidd::Injection inj;
  try {
    inj.group = std::stoul(parts[0]);
    const auto ids = lidd::synthetic_sensor_ids(n_sensors);
    if (const auto it = std::find(ids.begin(), ids.end(), parts[1]); it != ids.end())
      inj.sensor = static_cast<std::size_t>(it - ids.begin());
    else
      inj.sensor = std::stoul(parts[1]);
    if (parts.size() == 3) inj.magnitude = std::stod(parts[2]);
  } catch (const std::logic_error&) {
    throw lidd::ConfigError("inject", "expected group:sensor[:magnitude], got '" + text + "'");
  }
  return inj;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Interconnection and divergence discovery across multi-sensor systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lidd 1.0.0");

  lidd::RunConfig cfg;
  std::vector<std::string> inputs;
  std::string format = "long", resample = "3600s", linkage = "average", out_dir = "lidd-out";

  auto* analyze = app.add_subcommand("analyze", "Run the full pipeline and write a report directory");
  analyze->add_option("--input,-i", inputs, "Input CSV file or directory (repeatable)")->required();
  analyze->add_option("--format", format, "Input layout")->check(CLI::IsMember({"long", "wide"}));
  analyze->add_option("--resample", resample, "Resampling interval (e.g. 3600s, 15m, 1h)");
  analyze->add_option("--despike-window", cfg.ingest.despike_window, "Median despike window (odd)");
  analyze->add_option("--max-gap", cfg.ingest.max_gap_fill, "Longest interior gap to interpolate");
  analyze->add_option("--min-coverage", cfg.ingest.min_coverage, "Coverage below which a warning is raised");
  analyze->add_option("--min-overlap", cfg.similarity.min_overlap, "Minimum pairwise observations");
  analyze->add_option("--linkage", linkage, "Cluster linkage")->check(CLI::IsMember({"average", "single", "complete"}));
  analyze->add_option("--alpha-system", cfg.alpha_system, "System clustering cut height");
  analyze->add_option("--alpha-sensor", cfg.alpha_sensor, "Sensor clustering cut height");
  analyze->add_option("--alpha-rca", cfg.alpha_rca, "Root-cause flag threshold");
  analyze->add_option("--out,-o", out_dir, "Output directory");
  analyze->add_option("--jobs,-j", cfg.jobs, "Worker threads");

  lidd::SyntheticSpec spec;
  std::string spec_file, gen_out = "lidd-corpus";
  std::vector<std::string> injections;
  std::vector<std::size_t> group_sizes;
  auto* generate = app.add_subcommand("generate", "Write a synthetic corpus with planted structure");
  generate->add_option("--spec", spec_file, "JSON generator spec; flags override it");
  generate->add_option("--systems", spec.n_systems, "Number of systems");
  generate->add_option("--sensors", spec.n_sensors, "Number of sensors");
  generate->add_option("--samples", spec.n_samples, "Samples per system");
  generate->add_option("--groups", spec.n_groups, "Number of planted groups");
  generate->add_option("--group-sizes", group_sizes, "Explicit group sizes")->delimiter(',');
  generate->add_option("--noise", spec.noise, "Per-system noise level");
  generate->add_option("--missing-rate", spec.missing_rate, "Fraction of cells dropped");
  generate->add_option("--inject", injections, "Perturbation group:sensor[:magnitude] (repeatable)");
  generate->add_flag("--shared-template", spec.shared_template, "All groups share one template");
  generate->add_option("--seed", spec.seed, "Random seed");
  generate->add_option("--out,-o", gen_out, "Output directory");

  std::string report_path, query;
  auto* inspect = app.add_subcommand("inspect", "Print a section of report.json");
  inspect->add_option("report", report_path, "Path to report.json")->required();
  inspect->add_option("query", query, "clusters | sensors | rca")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*analyze) {
      for (const auto& in : inputs) cfg.inputs.emplace_back(in);
      cfg.format = format == "wide" ? lidd::CsvFormat::wide_csv : lidd::CsvFormat::long_csv;
      try {
        cfg.ingest.resample_interval = lidd::parse_duration(resample);
      } catch (const lidd::FormatError& e) {
        throw lidd::ConfigError("resample", e.what());
      }
      cfg.linkage = lidd::parse_linkage(linkage);
      cfg.out_dir = out_dir;
      spdlog::info("analyzing {} input path(s) with {} job(s)", cfg.inputs.size(), cfg.jobs);
      lidd::cmd_analyze(cfg, std::cout);
      spdlog::info("report written to {}", out_dir);
    } else if (*generate) {
      if (!spec_file.empty()) {
        lidd::Json j;
        try {
          j = lidd::Json::parse(lidd::read_file(spec_file));
        } catch (const lidd::Json::exception& e) {
          throw lidd::FormatError(std::string("cannot parse spec: ") + e.what());
        }
        const lidd::SyntheticSpec defaults;
        auto from_file = lidd::synthetic_spec_from_json(j);
        // Command-line values win over the file when they differ from defaults.
        if (spec.n_systems != defaults.n_systems) from_file.n_systems = spec.n_systems;
        if (spec.n_sensors != defaults.n_sensors) from_file.n_sensors = spec.n_sensors;
        if (spec.n_samples != defaults.n_samples) from_file.n_samples = spec.n_samples;
        if (spec.n_groups != defaults.n_groups) from_file.n_groups = spec.n_groups;
        if (spec.noise != defaults.noise) from_file.noise = spec.noise;
        if (spec.missing_rate != defaults.missing_rate) from_file.missing_rate = spec.missing_rate;
        if (spec.seed != defaults.seed) from_file.seed = spec.seed;
        if (spec.shared_template) from_file.shared_template = true;
        spec = std::move(from_file);
      }
      if (!group_sizes.empty()) spec.group_sizes = group_sizes;
      for (const auto& text : injections) spec.injections.push_back(parse_injection(text, spec.n_sensors));
      lidd::cmd_generate(spec, gen_out, std::cout);
    } else if (*inspect) {
      lidd::cmd_inspect(report_path, query, std::cout);
    }
  } catch (const lidd::UsageError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const lidd::ConfigError& e) {
    return fail(kUsage, "config:" + e.field(), e.what());
  } catch (const lidd::IoError& e) {
    return fail(kInput, "io", e.what());
  } catch (const lidd::FormatError& e) {
    return fail(kInput, "format", e.what());
  } catch (const lidd::InsufficientData& e) {
    return fail(kInput, "data", e.what());
  } catch (const lidd::ContractViolation& e) {
    return fail(kContract, "contract", e.what());
  } catch (const std::exception& e) {
    return fail(kContract, "internal", e.what());
  }
  return kOk;
}
