#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/harness.hpp"
#include "rmtlab/oracle.hpp"

namespace fs = std::filesystem;
using namespace rmtlab;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 2;
constexpr int kInvalidConfig = 3;
constexpr int kNumerical = 4;

void print_summary(const std::vector<harness::SummaryRow>& rows) {
  for (const auto& r : rows)
    if (r.criterion.find("detail") != std::string::npos)
      std::printf("%-5s %-22s %-70s value=%.6g\n", "info", r.criterion.c_str(), r.quantity.c_str(), r.value);
    else
      std::printf("%-5s %-22s %-70s value=%-12.6g bound=%.6g\n", r.pass ? "PASS" : "FAIL",
                  r.criterion.c_str(), r.quantity.c_str(), r.value, r.bound);
}

int cmd_run(const std::string& path, const harness::Overrides& ov) {
  auto config = harness::apply_overrides(harness::load_config(path), ov);
  std::printf("%s: %zu trial ids, %zu worker(s), backend %s, config %s\n",
              std::string(harness::to_string(config.experiment)).c_str(),
              harness::trial_count(config), config.parallel,
              spectral::backend_id(config.spectral.backend).c_str(), config.hash().substr(0, 12).c_str());
  const auto result = harness::run(config);
  print_summary(result.summary);
  std::printf("records: %s\nsummary: %s\n", result.records_path.c_str(), result.summary_path.c_str());
  return result.all_pass() ? kPass : kFail;
}

int cmd_plot(const std::string& records, const std::string& kind_name, std::string out) {
  const auto kind = harness::parse_plot_kind(kind_name);
  const auto file = harness::read_records(records);
  const auto table = harness::emit_plot_data(file, kind);
  if (out.empty()) out = fs::path(records).parent_path().string();
  if (out.empty()) out = ".";
  fs::create_directories(out);
  const fs::path dst = fs::path(out) / ("plot_" + kind_name + ".csv");
  std::vector<std::string> comments;
  if (file.header.contains("config_hash")) {
    comments.push_back("config_hash=" + file.header["config_hash"].get<std::string>());
    comments.push_back("version=" + file.header.value("version", ""));
    comments.push_back("backend=" + file.header.value("backend", ""));
  }
  harness::write_csv(table, dst, comments);
  std::printf("%zu rows -> %s\n", table.rows.size(), dst.c_str());
  if (table.slope) std::printf("least-squares slope: %.6g\n", *table.slope);
  return kPass;
}

int cmd_oracle(const std::string& name, std::uint64_t seed) {
  std::vector<std::string> names;
  if (name == "all")
    names = oracle::subchecks();
  else
    names.push_back(name);
  bool ok = true;
  for (const auto& n : names) {
    const auto report = oracle::run(n, seed);
    for (const auto& c : report.checks)
      std::printf("%-5s %-12s %-50s %.3e <= %.1e\n", c.pass ? "PASS" : "FAIL", report.subcheck.c_str(),
                  c.name.c_str(), c.value, c.bound);
    ok = ok && report.pass();
  }
  return ok ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rmtlab: sparse non-Hermitian random matrix laboratory"};
  app.set_version_flag("--version", std::string(RMTLAB_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  harness::Overrides ov;
  std::size_t trials = 0, parallel = 0;
  std::uint64_t seed = 0;
  std::string backend, out;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config file (JSON)")->required();
  auto* o_trials = run->add_option("--trials", trials, "override trial count");
  auto* o_seed = run->add_option("--seed", seed, "override master seed");
  auto* o_par = run->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);
  auto* o_backend = run->add_option("--backend", backend, "numerical backend")
                        ->check(CLI::IsMember({"reference", "accelerated"}));
  auto* o_out = run->add_option("--out", out, "output directory");

  std::string records, kind, plot_out;
  auto* plot = app.add_subcommand("plot", "emit plot-ready tables from records");
  plot->add_option("records", records, "records.ndjson")->required();
  plot->add_option("--kind", kind, "local-law | scaling | universality")->required();
  plot->add_option("--out", plot_out, "output directory (default: next to the records)");

  std::string subcheck;
  std::uint64_t oracle_seed = 1;
  auto* orc = app.add_subcommand("oracle", "run small-N brute-force oracle checks");
  orc->add_option("subcheck", subcheck, "identities | cubic | equivalence | girko | ks-level | all")
      ->required();
  orc->add_option("--seed", oracle_seed, "seed");

  app.add_subcommand("schema", "print the config schema with defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kInvalidConfig;
  }

  try {
    if (run->parsed()) {
      if (*o_trials) ov.trials = trials;
      if (*o_seed) ov.seed = seed;
      if (*o_par) ov.parallel = parallel;
      if (*o_backend) ov.backend = backend;
      if (*o_out) ov.out_dir = out;
      return cmd_run(config_path, ov);
    }
    if (plot->parsed()) return cmd_plot(records, kind, plot_out);
    if (orc->parsed()) return cmd_oracle(subcheck, oracle_seed);
    std::cout << harness::schema().dump(2) << "\n";
    return kPass;
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
