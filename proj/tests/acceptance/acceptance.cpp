// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance                 all criteria
//   acceptance --criterion 5   a single criterion

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "rmtlab/harness.hpp"
#include "rmtlab/oracle.hpp"

using namespace rmtlab;
using harness::Json;

namespace {

// Pinned thresholds.
namespace pinned {
constexpr double kEpsilonLocal = 0.2;     // local laws and delocalization: N^{0.2}
constexpr double kQuantile = 0.9;         // "90th percentile", "90% of trials"
constexpr double kNuOutside = 0.1;        // outside-disc improvement N^{-nu}
constexpr double kRigidityConstant = 5.0; // median |rho2 - 1| <= 5 N^{-1/2}
constexpr double kSlopeMin = -0.7, kSlopeMax = -0.3;
constexpr double kTopGap = 3.0, kTopFraction = 0.95;
constexpr double kEpsilonProp51 = 0.15;
constexpr double kAlpha = 0.01, kMetaPass = 0.8, kPowerP = 1e-3;
constexpr double kFlowSigmas = 3.0;
constexpr double kEpsilonCircular = 0.2;
constexpr double kGirkoRel = 1e-3, kGirkoCalibration = 1e-3;
}  // namespace pinned

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string out_root() {
  const char* env = std::getenv("RMTLAB_ACCEPTANCE_OUT");
  return env ? env : "acceptance_out";
}

bool is_detail(const harness::SummaryRow& r) { return r.criterion.find("detail") != std::string::npos; }

void print_rows(const std::vector<harness::SummaryRow>& rows) {
  for (const auto& r : rows) {
    if (is_detail(r))
      std::printf("    info %-22s %s: %.6g\n", r.criterion.c_str(), r.quantity.c_str(), r.value);
    else
      std::printf("    %-4s %-22s %s: %.6g (bound %.6g)\n", r.pass ? "ok" : "FAIL", r.criterion.c_str(),
                  r.quantity.c_str(), r.value, r.bound);
  }
}

Outcome from_oracle(const oracle::Report& report) {
  for (const auto& c : report.checks)
    std::printf("    %-4s %s: %.3e (bound %.1e)\n", c.pass ? "ok" : "FAIL", c.name.c_str(), c.value,
                c.bound);
  return {report.pass(), std::to_string(report.checks.size()) + " checks"};
}

harness::RunResult run_config(Json doc, const std::string& name) {
  doc["output"] = {{"dir", out_root() + "/" + name}};
  doc["parallel"] = 1;
  const auto result = harness::run(harness::parse_config(doc));
  print_rows(result.summary);
  return result;
}

Outcome from_run(const harness::RunResult& r) {
  std::size_t rows = 0, good = 0;
  for (const auto& row : r.summary) {
    if (is_detail(row)) continue;
    ++rows;
    good += row.pass;
  }
  return {r.all_pass() && rows > 0,
          std::to_string(good) + "/" + std::to_string(rows) + " summary rows pass"};
}

Outcome criterion1() { return from_oracle(oracle::identities(1)); }
Outcome criterion2() { return from_oracle(oracle::cubic()); }
Outcome criterion3() { return from_oracle(oracle::equivalence(1)); }

Outcome criterion4() {
  return from_run(run_config({{"experiment", "girko-xcheck"},
                              {"ensemble", {{"n", 64}, {"p", 0.2}}},
                              {"trials", 20},
                              {"seed", 4},
                              {"grid", {{"profile", "polynomial-bump"}, {"center", {0.3, 0.1}}}},
                              {"acceptance", {{"rel_tol", pinned::kGirkoRel},
                                              {"calibration_tol", pinned::kGirkoCalibration}}}},
                             "c04-girko"));
}

Outcome local_law(double w, double nu, std::uint64_t seed, const std::string& tag) {
  bool pass = true;
  std::size_t rows = 0, good = 0;
  for (double p : {0.5, 0.02}) {
    const auto r = run_config(
        {{"experiment", "local-law"},
         {"ensemble", {{"n", 1024}, {"p", p}}},
         {"trials", 50},
         {"seed", seed},
         {"grid", {{"w", {w, 0.0}}, {"eta_min_exponent", -0.95}, {"eta_max_exponent", -0.72},
                   {"eta_points", 8}, {"delta", 0.05}, {"nu", nu}}},
         {"acceptance", {{"epsilon", pinned::kEpsilonLocal}, {"quantile", pinned::kQuantile}}}},
        tag + (p == 0.5 ? "-p0.5" : "-p0.02"));
    for (const auto& row : r.summary) {
      if (is_detail(row)) continue;
      ++rows;
      good += row.pass;
    }
    pass = pass && r.all_pass();
  }
  return {pass, std::to_string(good) + "/" + std::to_string(rows) + " rows over p in {0.5, 0.02}"};
}

Outcome criterion5() { return local_law(1.0, 0.0, 5, "c05-local-law"); }
Outcome criterion6() { return local_law(1.5, pinned::kNuOutside, 6, "c06-outside"); }

Outcome criterion7() {
  return from_run(run_config({{"experiment", "edge-rigidity"},
                              {"ensemble", {{"n", 1024}, {"p", 0.05}}},
                              {"sizes", {256, 512, 1024}},
                              {"trials", 50},
                              {"seed", 7},
                              {"acceptance", {{"constant", pinned::kRigidityConstant},
                                              {"slope_min", pinned::kSlopeMin},
                                              {"slope_max", pinned::kSlopeMax}}}},
                             "c07-rigidity"));
}

Outcome criterion8() {
  // Only the top-eigenvalue row belongs to this criterion.
  const auto r = run_config({{"experiment", "edge-rigidity"},
                             {"ensemble", {{"n", 2000}, {"p", 0.1}}},
                             {"trials", 40},
                             {"seed", 8},
                             {"grid", {{"spectrum", "arnoldi"}, {"top_k", 1}}},
                             {"acceptance", {{"f_gap_max", pinned::kTopGap},
                                             {"f_gap_fraction", pinned::kTopFraction}}}},
                            "c08-top");
  for (const auto& row : r.summary)
    if (row.criterion == "top-eigenvalue")
      return {row.pass, "fraction " + std::to_string(row.value) + " (need >= 0.95)"};
  return {false, "no top-eigenvalue row"};
}

Outcome criterion9() {
  return from_run(run_config({{"experiment", "delocalization"},
                              {"ensemble", {{"n", 512}, {"p", 0.1}}},
                              {"trials", 50},
                              {"seed", 9},
                              {"acceptance", {{"epsilon", pinned::kEpsilonLocal},
                                              {"fraction", pinned::kQuantile}}}},
                             "c09-delocalization"));
}

Outcome criterion10() {
  return from_run(run_config({{"experiment", "prop51"},
                              {"ensemble", {{"n", 512}, {"p", 0.5}}},
                              {"trials", 50},
                              {"seed", 10},
                              {"grid", {{"w", {1.0, 0.0}}, {"eta_exponent", -0.75}}},
                              {"acceptance", {{"epsilon", pinned::kEpsilonProp51}}}},
                             "c10-prop51"));
}

Outcome criterion11() {
  return from_run(run_config({{"experiment", "universality"},
                              {"ensemble", {{"n", 512}, {"p", 0.05}}},
                              {"trials", 200},
                              {"seed", 11},
                              {"grid", {{"radius", 3.0}, {"meta_repetitions", 10}, {"control_scale", 1.05}}},
                              {"acceptance", {{"alpha", pinned::kAlpha},
                                              {"pass_fraction", pinned::kMetaPass},
                                              {"null_pass_fraction", pinned::kMetaPass},
                                              {"power_p", pinned::kPowerP}}}},
                             "c11-universality"));
}

Outcome criterion12() {
  return from_run(run_config({{"experiment", "flow-variance"},
                              {"ensemble", {{"n", 256}, {"p", 0.1}}},
                              {"trials", 100},
                              {"seed", 12},
                              {"grid", {{"times", {0.0, 0.7, "inf"}}, {"corner_f", 3.0}}},
                              {"acceptance", {{"sigmas", pinned::kFlowSigmas}, {"alpha", pinned::kAlpha}}}},
                             "c12-flow"));
}

Outcome criterion13() {
  return from_run(run_config({{"experiment", "circular-law"},
                              {"ensemble", {{"n", 1024}, {"p", 0.05}}},
                              {"trials", 50},
                              {"seed", 13},
                              {"grid", {{"profile", "polynomial-bump"}, {"angle", 0.0}, {"a", 0.5}}},
                              {"acceptance", {{"epsilon", pinned::kEpsilonCircular},
                                              {"fraction", pinned::kQuantile}}}},
                             "c13-circular-law"));
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {1, "exact resolvent identities", criterion1},
      {2, "cubic solver", criterion2},
      {3, "oracle equivalence", criterion3},
      {4, "Girko cross-check", criterion4},
      {5, "local law at |w| = 1", criterion5},
      {6, "outside-disc improvement at |w| = 1.5", criterion6},
      {7, "edge rigidity and its scaling", criterion7},
      {8, "top eigenvalue near f", criterion8},
      {9, "eigenvector delocalization", criterion9},
      {10, "off-diagonal partial trace", criterion10},
      {11, "edge universality vs real Ginibre", criterion11},
      {12, "flow variance and corner identity", criterion12},
      {13, "local circular law", criterion13},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  bool all = true;
  bool ran = false;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    ran = true;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s (%s; %.1fs)\n", c.id, o.pass ? "PASS" : "FAIL", c.title,
                o.detail.c_str(), s);
    std::fflush(stdout);
    all = all && o.pass;
  }
  if (!ran) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return all ? 0 : 1;
}
