#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rmtlab/harness.hpp"

using namespace rmtlab;
using namespace rmtlab::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rmtlab_test_" + name);
  fs::remove_all(dir);
  return dir;
}

Json small_rigidity(const fs::path& dir) {
  return {{"experiment", "edge-rigidity"},
          {"ensemble", {{"n", 48}, {"p", 0.2}}},
          {"sizes", {32, 48}},
          {"trials", 3},
          {"seed", 5},
          {"output", {{"dir", dir.string()}}}};
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_config(Json::array()), ConfigError);
  CHECK_THROWS_AS(parse_config({{"trials", 3}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "nope"}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "prop51"}, {"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "prop51"}, {"grid", {{"etaa", 1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "delocalization"}, {"ensemble", {{"p", 1.5}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "delocalization"}, {"trials", "ten"}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "delocalization"}, {"backend", "gpu"}}), ConfigError);
  // Local-law grid outside S_delta.
  CHECK_THROWS_AS(parse_config({{"experiment", "local-law"}, {"grid", {{"eta_max_exponent", -0.1}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config({{"experiment", "prop51"}, {"grid", {{"w", {0.2, 0.0}}}}}), ConfigError);

  const auto c = parse_config({{"experiment", "local-law"}, {"ensemble", {{"n", 512}}}});
  CHECK(c.document["grid"]["eta_points"] == 8);
  CHECK(c.document["acceptance"]["epsilon"] == 0.2);
  CHECK(c.hash().size() == 64);
  CHECK(c.hash() == parse_config(c.document).hash());

  const auto o = apply_overrides(c, {.trials = 7, .seed = 3});
  CHECK(o.trials == 7);
  CHECK(o.seed == 3);
  CHECK(o.hash() != c.hash());
  CHECK(schema()["experiments"].contains("universality"));
}

TEST_CASE("zero trials") {
  const auto dir = scratch("zero");
  auto doc = small_rigidity(dir);
  doc["trials"] = 0;
  const auto r = run(parse_config(doc));
  CHECK(r.records.empty());
  CHECK(r.summary.empty());
  CHECK(r.all_pass());
  const auto file = read_records(r.records_path);
  CHECK(file.records.empty());
  CHECK(file.header["config_hash"].is_string());
  CHECK(emit_plot_data(file, PlotKind::scaling).rows.empty());
  CHECK(emit_plot_data(file, PlotKind::local_law).columns ==
        std::vector<std::string>{"eta", "q10", "q50", "q90", "bound"});
}

TEST_CASE("records are deterministic and order independent") {
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  const auto ra = run(parse_config(small_rigidity(a)));
  run(parse_config(small_rigidity(b)));
  auto par = small_rigidity(c);
  par["parallel"] = 3;
  const auto rc = run(parse_config(par));
  CHECK(ra.records.size() == 6);
  CHECK(slurp(a / "records.ndjson") == slurp(b / "records.ndjson"));
  CHECK(slurp(a / "records.ndjson") == slurp(c / "records.ndjson"));
  for (std::size_t i = 0; i < ra.records.size(); ++i)
    CHECK(ra.records[i].observables == rc.records[i].observables);

  // Re-running one trial id reproduces its record.
  const auto cfg = parse_config(small_rigidity(a));
  CHECK(run_trial(cfg, 4).observables == ra.records[4].observables);

  const auto summary = slurp(a / "summary.csv");
  CHECK(summary.find("config_hash=" + cfg.hash()) != std::string::npos);
  CHECK(summary.find("criterion,quantity,value,bound,pass") != std::string::npos);

  const auto table = emit_plot_data(read_records(ra.records_path), PlotKind::scaling);
  CHECK(table.rows.size() == 2);
  CHECK(table.slope.has_value());
  CHECK_THROWS_AS(emit_plot_data(read_records(ra.records_path), PlotKind::universality), ConfigError);
  CHECK_THROWS_AS(parse_plot_kind("histogram"), ConfigError);
}

TEST_CASE("failing trial keeps partial records") {
  const auto dir = scratch("abort");
  auto doc = small_rigidity(dir);
  doc["dense_cap"] = 40;  // the N = 48 trials exceed it
  doc["grid"] = {{"spectrum", "dense"}};
  CHECK_THROWS_AS(run(parse_config(doc)), CapacityError);
  const auto file = read_records(dir / "records.ndjson");
  CHECK(file.aborted);
  CHECK(file.records.size() == 3);
}

TEST_CASE("top eigenvalue only") {
  const auto dir = scratch("top");
  auto doc = small_rigidity(dir);
  doc["sizes"] = {300};
  doc["grid"] = {{"spectrum", "arnoldi"}, {"top_k", 1}};
  doc["acceptance"] = {{"f_gap_max", 3.0}};
  const auto r = run(parse_config(doc));
  REQUIRE(r.summary.size() == 1);
  CHECK(r.summary[0].criterion == "top-eigenvalue");
  CHECK(r.all_pass());
  CHECK_FALSE(r.records[0].observables.contains("rho2"));

  doc["grid"] = {{"spectrum", "dense"}, {"top_k", 1}};
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
  doc["grid"] = {{"spectrum", "arnoldi"}, {"top_k", 1}, {"matrix", "ginibre"}};
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
}

TEST_CASE("least squares slope") {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 1, -1, -3};
  CHECK(least_squares_slope(x, y) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(least_squares_slope(std::vector<double>{1}, std::vector<double>{1}), DomainError);
}

TEST_CASE("small experiments summarize") {
  for (const char* name : {"delocalization", "prop51", "circular-law", "flow-variance"}) {
    const auto dir = scratch(name);
    Json doc{{"experiment", name}, {"ensemble", {{"n", 64}, {"p", 0.3}}}, {"trials", 4},
             {"output", {{"dir", dir.string()}}}};
    const auto r = run(parse_config(doc));
    CHECK(r.records.size() == 4);
    CHECK_FALSE(r.summary.empty());
  }
  const auto dir = scratch("local");
  const auto r = run(parse_config({{"experiment", "local-law"},
                                   {"ensemble", {{"n", 128}, {"p", 0.5}}},
                                   {"trials", 5},
                                   {"grid", {{"eta_points", 3}}},
                                   {"output", {{"dir", dir.string()}}}}));
  const auto table = emit_plot_data(read_records(r.records_path), PlotKind::local_law);
  CHECK(table.rows.size() == 3);
}
