#include "rmtlab/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "rmtlab/errors.hpp"
#include "rmtlab/girko.hpp"
#include "rmtlab/model.hpp"
#include "rmtlab/rng.hpp"
#include "rmtlab/stats.hpp"
#include "rmtlab/theory.hpp"

namespace rmtlab::harness {

namespace {

constexpr double kPi = std::numbers::pi;

struct ExperimentInfo {
  Experiment experiment;
  const char* name;
  Json grid;
  Json acceptance;
};

const std::vector<ExperimentInfo>& registry() {
  static const std::vector<ExperimentInfo> table{
      {Experiment::local_law, "local-law",
       {{"w", {1.0, 0.0}}, {"eta_min_exponent", -0.95}, {"eta_max_exponent", -0.72},
        {"eta_points", 8}, {"delta", 0.05}, {"nu", 0.0}, {"allow_bulk", false}},
       {{"epsilon", 0.2}, {"quantile", 0.9}, {"max_real_part", 1e-10}}},
      {Experiment::edge_rigidity, "edge-rigidity",
       {{"matrix", "adjacency"}, {"spectrum", "auto"}, {"top_k", 8}, {"arnoldi_tol", 1e-8}},
       {{"constant", 5.0}, {"slope_min", -0.7}, {"slope_max", -0.3}, {"f_gap_max", nullptr},
        {"f_gap_fraction", 0.95}}},
      {Experiment::delocalization, "delocalization",
       {{"radius", 2.0}},
       {{"epsilon", 0.2}, {"fraction", 0.9}}},
      {Experiment::universality, "universality",
       {{"radius", 3.0}, {"angles", {kPi / 4, kPi / 2, 3 * kPi / 4}}, {"meta_repetitions", 10},
        {"control_scale", 1.05}},
       {{"alpha", 0.01}, {"pass_fraction", 0.8}, {"null_pass_fraction", 0.8},
        {"power_p", 1e-3}}},
      {Experiment::girko_xcheck, "girko-xcheck",
       {{"profile", "polynomial-bump"}, {"center", {0.3, 0.1}}, {"a", 0.5}, {"scaled", false},
        {"tolerance", 5e-4}, {"eta_lower", 0.0}},
       {{"rel_tol", 1e-3}, {"calibration_tol", 1e-3}}},
      {Experiment::prop51, "prop51",
       {{"w", {1.0, 0.0}}, {"eta_exponent", -0.75}, {"delta", 0.05}, {"path", "block"}},
       {{"epsilon", 0.15}}},
      {Experiment::flow_variance, "flow-variance",
       {{"times", {0.0, 0.7, "inf"}}, {"corner_f", 3.0}},
       {{"sigmas", 3.0}, {"alpha", 0.01}}},
      {Experiment::circular_law, "circular-law",
       {{"profile", "polynomial-bump"}, {"angle", 0.0}, {"a", 0.5}},
       {{"epsilon", 0.2}, {"fraction", 0.9}}},
  };
  return table;
}

const ExperimentInfo& info(Experiment e) {
  for (const auto& i : registry())
    if (i.experiment == e) return i;
  throw ConfigError("unknown experiment");
}

const Json& top_defaults() {
  static const Json d = {
      {"experiment", ""},
      {"ensemble", {{"n", 256}, {"p", 0.1}, {"zero_diagonal", false}}},
      {"sizes", Json::array()},
      {"trials", 10},
      {"seed", 1},
      {"parallel", 1},
      {"backend", "reference"},
      {"dense_cap", 4096},
      {"grid", Json::object()},
      {"acceptance", Json::object()},
      {"output", {{"dir", "out"}}},
  };
  return d;
}

bool same_kind(const Json& value, const Json& def) {
  if (def.is_null()) return value.is_null() || value.is_number();
  if (def.is_number()) return value.is_number();
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) return value.is_array();
  if (def.is_object()) return value.is_object();
  return false;
}

// Merges `given` over `defaults`, rejecting unknown keys and type mismatches.
Json merge_section(const Json& defaults, const Json& given, const std::string& where) {
  if (!given.is_object()) throw ConfigError(where + ": expected an object");
  Json out = defaults;
  for (const auto& [key, value] : given.items()) {
    if (!defaults.contains(key)) {
      std::string known;
      for (const auto& [k, _] : defaults.items()) known += (known.empty() ? "" : ", ") + k;
      throw ConfigError(where + ": unknown key '" + key + "' (allowed: " + known + ")");
    }
    if (!same_kind(value, defaults[key]))
      throw ConfigError(where + "." + key + ": wrong type");
    out[key] = value;
  }
  return out;
}

std::size_t positive_size(const Json& v, const std::string& where, bool allow_zero = false) {
  if (!v.is_number_integer() || v.get<long long>() < (allow_zero ? 0 : 1))
    throw ConfigError(where + ": expected a " + (allow_zero ? "non-negative" : "positive") +
                      " integer");
  return v.get<std::size_t>();
}

cplx as_complex(const Json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(where + ": expected a number or [re, im]");
}

double as_time(const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  throw ConfigError("grid.times: entries must be numbers or \"inf\"");
}

std::vector<double> local_law_etas(const ExperimentConfig& c) {
  const double n = static_cast<double>(c.n);
  return stats::geometric_grid(std::pow(n, c.grid["eta_min_exponent"].get<double>()),
                               std::pow(n, c.grid["eta_max_exponent"].get<double>()),
                               c.grid["eta_points"].get<std::size_t>());
}

stats::LocalLawSpec local_law_spec(const ExperimentConfig& c) {
  stats::LocalLawSpec s;
  s.n = c.n;
  s.p = c.p;
  s.w = as_complex(c.grid["w"], "grid.w");
  s.etas = local_law_etas(c);
  s.delta = c.grid["delta"].get<double>();
  s.allow_bulk = c.grid["allow_bulk"].get<bool>();
  s.nu = c.grid["nu"].get<double>();
  return s;
}

void validate_experiment(const ExperimentConfig& c) {
  const Json& g = c.grid;
  const Json& a = c.acceptance;
  try {
    switch (c.experiment) {
      case Experiment::local_law:
        positive_size(g["eta_points"], "grid.eta_points");
        stats::check_local_law_grid(local_law_spec(c));
        break;
      case Experiment::edge_rigidity: {
        const auto m = g["matrix"].get<std::string>();
        if (m != "adjacency" && m != "centered" && m != "ginibre")
          throw ConfigError("grid.matrix: expected adjacency, centered or ginibre");
        const auto s = g["spectrum"].get<std::string>();
        if (s != "auto" && s != "dense" && s != "arnoldi")
          throw ConfigError("grid.spectrum: expected auto, dense or arnoldi");
        // top_k = 1 reports lambda1 only (no rho2), which needs Arnoldi and an outlier.
        if (positive_size(g["top_k"], "grid.top_k") == 1 && (s != "arnoldi" || m != "adjacency"))
          throw ConfigError("grid.top_k: 1 requires spectrum arnoldi and matrix adjacency");
        break;
      }
      case Experiment::universality:
        if (positive_size(g["meta_repetitions"], "grid.meta_repetitions") < 2)
          throw ConfigError("grid.meta_repetitions: at least 2 (the null check pairs repetitions)");
        for (const auto& angle : g["angles"])
          if (!angle.is_number()) throw ConfigError("grid.angles: expected numbers");
        if (c.trials != 0 && c.trials < 100)
          throw ConfigError("universality: trials must be at least 100 per ensemble");
        break;
      case Experiment::girko_xcheck: {
        const girko::TestFunction tf{girko::parse_profile(g["profile"].get<std::string>()),
                                     as_complex(g["center"], "grid.center"),
                                     g["a"].get<double>()};
        if (g["scaled"].get<bool>()) girko::rescale_f(tf, c.n);
        break;
      }
      case Experiment::prop51: {
        const cplx w = as_complex(g["w"], "grid.w");
        const double n = static_cast<double>(c.n), delta = g["delta"].get<double>();
        const double eta = std::pow(n, g["eta_exponent"].get<double>());
        if (std::abs(std::abs(w) - 1.0) > std::pow(n, -0.5 + delta) ||
            eta < std::pow(n, -1.0 + delta) || eta > std::pow(n, -0.75 + delta))
          throw ConfigError("prop51: (w, eta) is outside S_delta");
        const auto path = g["path"].get<std::string>();
        if (path != "block" && path != "spectral" && path != "direct")
          throw ConfigError("grid.path: expected block, spectral or direct");
        break;
      }
      case Experiment::flow_variance:
        for (const auto& t : g["times"])
          if (!(as_time(t) >= 0.0)) throw ConfigError("grid.times: must be >= 0");
        if (c.trials == 1) throw ConfigError("flow-variance: needs at least 2 trials");
        break;
      case Experiment::circular_law:
        girko::rescale_f({girko::parse_profile(g["profile"].get<std::string>()),
                          std::polar(1.0, g["angle"].get<double>()), g["a"].get<double>()},
                         c.n);
        break;
      default:
        break;
    }
    (void)a;
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

std::string hex_digest(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += digits[md[i] >> 4];
    out += digits[md[i] & 15];
  }
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Json complex_json(cplx z) { return Json::array({z.real(), z.imag()}); }

}  // namespace

std::string_view to_string(Experiment e) { return info(e).name; }

Experiment parse_experiment(std::string_view name) {
  for (const auto& i : registry())
    if (name == i.name) return i.experiment;
  std::string known;
  for (const auto& n : experiment_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown experiment '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& i : registry()) out.emplace_back(i.name);
  return out;
}

Json ExperimentConfig::scientific_document() const {
  Json d = document;
  d.erase("output");
  d.erase("parallel");
  return d;
}

std::string ExperimentConfig::hash() const { return hex_digest(scientific_document().dump()); }

ExperimentConfig parse_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected an object at top level");
  if (!doc.contains("experiment") || !doc["experiment"].is_string())
    throw ConfigError("config: 'experiment' (string) is required");
  Json top = merge_section(top_defaults(), doc, "config");
  ExperimentConfig c;
  c.experiment = parse_experiment(top["experiment"].get<std::string>());
  const auto& inf = info(c.experiment);

  top["ensemble"] = merge_section(top_defaults()["ensemble"], top["ensemble"], "ensemble");
  top["grid"] = merge_section(inf.grid, top["grid"], "grid");
  top["acceptance"] = merge_section(inf.acceptance, top["acceptance"], "acceptance");
  top["output"] = merge_section(top_defaults()["output"], top["output"], "output");

  c.n = positive_size(top["ensemble"]["n"], "ensemble.n");
  c.p = top["ensemble"]["p"].get<double>();
  if (!(c.p > 0.0 && c.p < 1.0)) throw ConfigError("ensemble.p: must lie in (0, 1)");
  c.zero_diagonal = top["ensemble"]["zero_diagonal"].get<bool>();
  for (const auto& s : top["sizes"]) c.sizes.push_back(positive_size(s, "sizes[]"));
  if (c.sizes.empty()) c.sizes.push_back(c.n);
  if (!c.sizes.empty() && c.experiment != Experiment::edge_rigidity && top["sizes"].size() > 0)
    throw ConfigError("sizes: only used by edge-rigidity");
  c.trials = positive_size(top["trials"], "trials", true);
  if (!top["seed"].is_number_unsigned() &&
      !(top["seed"].is_number_integer() && top["seed"].get<long long>() >= 0))
    throw ConfigError("seed: expected a non-negative integer");
  c.seed = top["seed"].get<std::uint64_t>();
  c.parallel = positive_size(top["parallel"], "parallel");
  c.spectral.backend = spectral::parse_backend(top["backend"].get<std::string>());
  c.spectral.dense_cap = positive_size(top["dense_cap"], "dense_cap");
  c.grid = top["grid"];
  c.acceptance = top["acceptance"];
  c.out_dir = top["output"]["dir"].get<std::string>();
  c.document = top;
  validate_experiment(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig apply_overrides(const ExperimentConfig& config, const Overrides& ov) {
  Json doc = config.document;
  if (ov.trials) doc["trials"] = *ov.trials;
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.parallel) doc["parallel"] = *ov.parallel;
  if (ov.backend) doc["backend"] = *ov.backend;
  if (ov.out_dir) doc["output"]["dir"] = *ov.out_dir;
  return parse_config(doc);
}

Json schema() {
  Json out = top_defaults();
  out["experiment"] = experiment_names();
  Json per = Json::object();
  for (const auto& i : registry()) per[i.name] = {{"grid", i.grid}, {"acceptance", i.acceptance}};
  out["experiments"] = per;
  out.erase("grid");
  out.erase("acceptance");
  return out;
}

// ---------------------------------------------------------------------------
// Trials

std::size_t trial_count(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::edge_rigidity:
      return c.sizes.size() * c.trials;
    case Experiment::universality:
      return 2 * c.grid["meta_repetitions"].get<std::size_t>() * c.trials;
    default:
      return c.trials;
  }
}

namespace {

model::EnsembleParams params_for(const ExperimentConfig& c, std::size_t n, std::uint64_t stream) {
  return model::EnsembleParams(n, c.p, stream, c.zero_diagonal);
}

Json edge_rigidity_trial(const ExperimentConfig& c, std::uint64_t id, std::uint64_t stream) {
  const std::size_t n = c.sizes.at(id / c.trials);
  const auto matrix = c.grid["matrix"].get<std::string>();
  const auto params = params_for(c, n, stream);
  const model::MatrixSample x = matrix == "ginibre"    ? model::sample_ginibre(n, stream)
                                : matrix == "centered" ? model::center(model::sample_er(params))
                                                       : model::sample_er(params);
  const std::optional<double> f =
      matrix == "adjacency" ? std::optional<double>(params.f()) : std::nullopt;
  const auto mode = c.grid["spectrum"].get<std::string>();
  const std::size_t k = c.grid["top_k"].get<std::size_t>();
  std::vector<cplx> spectrum;
  if (mode == "arnoldi")
    spectrum = spectral::arnoldi_topk(x, k, c.grid["arnoldi_tol"].get<double>()).eigenvalues;
  else if (mode == "dense")
    spectrum = spectral::dense_nonsym_eig(x, false, c.spectral).values;
  else
    spectrum = spectral::edge_spectrum(x, c.spectral, k);
  if (spectrum.size() == 1) {
    const cplx l1 = spectrum.front();
    return {{"n", n}, {"lambda1", complex_json(l1)}, {"f", *f}, {"f_gap", std::abs(l1 - *f)}};
  }
  const auto r = stats::edge_report(spectrum, n, f);
  Json o = {{"n", n},
            {"rho2", r.rho2},
            {"fluct", r.fluct},
            {"error", std::abs(r.rho2 - 1.0)},
            {"lambda1", complex_json(r.lambda1)}};
  if (f) {
    o["f"] = *f;
    o["f_gap"] = *r.f_gap;
  }
  return o;
}

Json universality_trial(const ExperimentConfig& c, std::uint64_t id, std::uint64_t stream) {
  const std::size_t meta = id / (2 * c.trials);
  const bool ginibre = (id / c.trials) % 2 == 1;
  stats::EnsembleSample s;
  s.ensemble = ginibre ? stats::Ensemble::ginibre : stats::Ensemble::er;
  s.n = c.n;
  const model::MatrixSample x = ginibre ? model::sample_ginibre(c.n, stream)
                                        : model::sample_er(params_for(c, c.n, stream));
  if (!ginibre) s.f = params_for(c, c.n, stream).f();
  s.spectra.push_back(spectral::edge_spectrum(x, c.spectral));
  stats::WindowSpec windows;
  windows.radius = c.grid["radius"].get<double>();
  windows.angles = c.grid["angles"].get<std::vector<double>>();
  const auto plain = stats::edge_functionals(s, windows);
  const auto scaled = stats::edge_functionals(s, windows, c.grid["control_scale"].get<double>());
  return {{"ensemble", ginibre ? "ginibre" : "er"},
          {"meta", meta},
          {"fluct", plain.fluct.at(0)},
          {"fluct_scaled", scaled.fluct.at(0)},
          {"count", plain.count},
          {"min_distance", plain.min_distance}};
}

girko::TestFunction girko_test_function(const ExperimentConfig& c) {
  return {girko::parse_profile(c.grid["profile"].get<std::string>()),
          as_complex(c.grid["center"], "grid.center"), c.grid["a"].get<double>()};
}

Json girko_trial(const ExperimentConfig& c, std::uint64_t stream) {
  const auto x = model::sample_er(params_for(c, c.n, stream));
  const auto tf = girko_test_function(c);
  const auto f = c.grid["scaled"].get<bool>() ? girko::rescale_f(tf, c.n) : girko::unscaled(tf);
  const auto lambda = spectral::dense_nonsym_eig(x, false, c.spectral).values;
  const cplx direct = girko::linear_stat_direct(lambda, f);
  girko::QuadratureSpec spec;
  spec.tolerance = c.grid["tolerance"].get<double>();
  spec.eta_lower = c.grid["eta_lower"].get<double>();
  const auto g = girko::linear_stat_girko(x, f, spec, c.spectral);
  return {{"direct", complex_json(direct)},
          {"girko", complex_json(g.value)},
          {"rel_error", std::abs(g.value - direct) / std::abs(direct)},
          {"nodes", g.nodes},
          {"ill_conditioned_nodes", g.ill_conditioned_nodes},
          {"max_bias", g.max_bias}};
}

Json prop51_trial(const ExperimentConfig& c, std::uint64_t stream) {
  const auto a = model::sample_er(params_for(c, c.n, stream));
  const cplx w = as_complex(c.grid["w"], "grid.w");
  const double eta = std::pow(static_cast<double>(c.n), c.grid["eta_exponent"].get<double>());
  const auto name = c.grid["path"].get<std::string>();
  const auto path = name == "spectral" ? spectral::OffdiagPath::spectral
                    : name == "direct" ? spectral::OffdiagPath::direct
                                       : spectral::OffdiagPath::block;
  const auto d = spectral::offdiag_trace_test(a, w, eta, c.grid["delta"].get<double>(),
                                              c.spectral, path);
  return {{"deviation", std::abs(d.deviation)},
          {"envelope", d.envelope},
          {"offdiag_trace", complex_json(d.offdiag_trace)},
          {"m", complex_json(d.m)}};
}

std::vector<double> moduli(const model::MatrixSample& x, const spectral::SpectralConfig& cfg) {
  std::vector<double> out;
  for (const cplx& v : spectral::dense_nonsym_eig(x, false, cfg).values) out.push_back(std::abs(v));
  std::sort(out.begin(), out.end());
  return out;
}

Json flow_trial(const ExperimentConfig& c, std::uint64_t stream) {
  const auto b = model::center(model::sample_er(params_for(c, c.n, derive_stream(stream, 0))));
  const auto w = model::sample_ginibre(c.n, derive_stream(stream, 1));
  Json second = Json::array();
  for (const auto& t : c.grid["times"]) {
    const RealMatrix d = model::flow(b, w, as_time(t)).to_dense();
    double s = 0.0;
    for (double v : d.flat()) s += v * v;
    second.push_back(s / static_cast<double>(d.flat().size()));
  }
  const double f = c.grid["corner_f"].get<double>();
  const auto hat = model::corner_perturb(model::sample_ginibre(c.n, derive_stream(stream, 2)), f);
  const auto flat = model::sample_ginibre(c.n, derive_stream(stream, 3)).with_mean_shift(f);
  return {{"second_moment", second},
          {"corner_moduli", moduli(hat, c.spectral)},
          {"flat_moduli", moduli(flat, c.spectral)}};
}

Json circular_trial(const ExperimentConfig& c, std::uint64_t stream) {
  const auto a = model::sample_er(params_for(c, c.n, stream));
  const double alpha = c.grid["a"].get<double>();
  const auto f = girko::rescale_f({girko::parse_profile(c.grid["profile"].get<std::string>()),
                                   std::polar(1.0, c.grid["angle"].get<double>()), alpha},
                                  c.n);
  const auto lambda = spectral::dense_nonsym_eig(a, false, c.spectral).values;
  const double stat = girko::linear_stat_direct(lambda, f).real();
  const double target = girko::disc_integral(f);
  return {{"statistic", stat}, {"target", target}, {"deviation", std::abs(stat - target)}};
}

}  // namespace

TrialRecord run_trial(const ExperimentConfig& c, std::uint64_t id) {
  if (id >= trial_count(c)) throw DomainError("trial id out of range");
  TrialRecord rec;
  rec.trial = id;
  rec.stream = derive_stream(c.seed, id);
  const auto t0 = std::chrono::steady_clock::now();
  switch (c.experiment) {
    case Experiment::local_law: {
      const auto t = stats::local_law_trial(local_law_spec(c), rec.stream, c.spectral);
      rec.observables = {{"centered", t.centered},
                         {"perturbed", t.perturbed},
                         {"max_real_part", t.max_real_part},
                         {"max_discrepancy", t.max_discrepancy}};
      break;
    }
    case Experiment::edge_rigidity:
      rec.observables = edge_rigidity_trial(c, id, rec.stream);
      break;
    case Experiment::delocalization: {
      const auto x = model::sample_er(params_for(c, c.n, rec.stream));
      const auto d = stats::delocalization(spectral::dense_nonsym_eig(x, true, c.spectral),
                                           c.grid["radius"].get<double>());
      rec.observables = {{"max", d.max},
                         {"median", d.median},
                         {"count", d.values.size()},
                         {"defective_excluded", d.defective_excluded}};
      break;
    }
    case Experiment::universality:
      rec.observables = universality_trial(c, id, rec.stream);
      break;
    case Experiment::girko_xcheck:
      rec.observables = girko_trial(c, rec.stream);
      break;
    case Experiment::prop51:
      rec.observables = prop51_trial(c, rec.stream);
      break;
    case Experiment::flow_variance:
      rec.observables = flow_trial(c, rec.stream);
      break;
    case Experiment::circular_law:
      rec.observables = circular_trial(c, rec.stream);
      break;
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Summaries

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("slope: x values are all equal");
  return sxy / sxx;
}

namespace {

SummaryRow at_most(std::string criterion, std::string quantity, double value, double bound) {
  return {std::move(criterion), std::move(quantity), value, bound, value <= bound};
}

SummaryRow at_least(std::string criterion, std::string quantity, double value, double bound) {
  return {std::move(criterion), std::move(quantity), value, bound, value >= bound};
}

std::vector<double> column(std::span<const TrialRecord> recs, const char* key) {
  std::vector<double> out;
  for (const auto& r : recs) out.push_back(r.observables.at(key).get<double>());
  return out;
}

std::vector<SummaryRow> summarize_local_law(const ExperimentConfig& c,
                                            std::span<const TrialRecord> recs) {
  const auto spec = local_law_spec(c);
  std::vector<stats::LocalLawTrial> trials;
  double real_part = 0.0, discrepancy = 0.0;
  for (const auto& r : recs) {
    stats::LocalLawTrial t;
    t.centered = r.observables.at("centered").get<std::vector<double>>();
    t.perturbed = r.observables.at("perturbed").get<std::vector<double>>();
    real_part = std::max(real_part, r.observables.at("max_real_part").get<double>());
    discrepancy = std::max(discrepancy, r.observables.at("max_discrepancy").get<double>());
    trials.push_back(std::move(t));
  }
  const double q = c.acceptance["quantile"].get<double>();
  const double bound = std::pow(static_cast<double>(c.n), c.acceptance["epsilon"].get<double>());
  const double n = static_cast<double>(c.n);
  std::vector<SummaryRow> rows;
  for (std::size_t k = 0; k < spec.etas.size(); ++k) {
    const double scale = std::pow(n, 1.0 + spec.nu) * spec.etas[k];
    for (const char* which : {"perturbed", "centered"}) {
      std::vector<double> v;
      for (const auto& t : trials)
        v.push_back(scale * (which[0] == 'p' ? t.perturbed : t.centered).at(k));
      rows.push_back(at_most("local-law " + std::string(which),
                             "q" + fmt(100 * q) + " N^(1+nu) eta |g-m| at eta=" + fmt(spec.etas[k]),
                             stats::quantile(v, q), bound));
    }
  }
  rows.push_back(at_most("local-law invariant", "max |Re g~|", real_part,
                         c.acceptance["max_real_part"].get<double>()));
  rows.push_back(at_most("local-law invariant", "max ||g-m| - |Im g - Im m||", discrepancy,
                         c.acceptance["max_real_part"].get<double>()));
  return rows;
}

std::vector<SummaryRow> summarize_edge(const ExperimentConfig& c,
                                       std::span<const TrialRecord> recs) {
  std::map<std::size_t, std::vector<double>> by_n;
  std::vector<double> gaps;
  for (const auto& r : recs) {
    if (r.observables.contains("error"))
      by_n[r.observables.at("n").get<std::size_t>()].push_back(r.observables.at("error").get<double>());
    if (r.observables.contains("f_gap")) gaps.push_back(r.observables["f_gap"].get<double>());
  }
  const double constant = c.acceptance["constant"].get<double>();
  std::vector<SummaryRow> rows;
  std::vector<double> logn, loge;
  for (const auto& [n, errs] : by_n) {
    const double med = stats::median(errs);
    rows.push_back(at_most("edge-rigidity", "median |rho2-1| at N=" + std::to_string(n), med,
                           constant / std::sqrt(static_cast<double>(n))));
    logn.push_back(std::log(static_cast<double>(n)));
    loge.push_back(std::log(med));
  }
  if (by_n.size() >= 2) {
    const double slope = least_squares_slope(logn, loge);
    const double lo = c.acceptance["slope_min"].get<double>();
    const double hi = c.acceptance["slope_max"].get<double>();
    rows.push_back({"edge-rigidity", "slope of log median error vs log N (min " + fmt(lo) + ")",
                    slope, hi, slope >= lo && slope <= hi});
  }
  if (!c.acceptance["f_gap_max"].is_null() && !gaps.empty()) {
    const double max_gap = c.acceptance["f_gap_max"].get<double>();
    const double frac =
        static_cast<double>(std::count_if(gaps.begin(), gaps.end(), [&](double g) { return g <= max_gap; })) /
        static_cast<double>(gaps.size());
    rows.push_back(at_least("top-eigenvalue", "fraction with |lambda1-f| <= " + fmt(max_gap), frac,
                            c.acceptance["f_gap_fraction"].get<double>()));
  }
  return rows;
}

std::vector<SummaryRow> summarize_fraction(const std::string& criterion, const std::string& what,
                                           const std::vector<double>& values, double bound,
                                           double fraction) {
  const double frac =
      static_cast<double>(std::count_if(values.begin(), values.end(), [&](double v) { return v <= bound; })) /
      static_cast<double>(values.size());
  return {at_least(criterion, "fraction of trials with " + what + " <= " + fmt(bound), frac, fraction),
          {criterion + " detail", "median " + what, stats::median(values), bound, true}};
}

std::vector<SummaryRow> summarize_universality(const ExperimentConfig& c,
                                               std::span<const TrialRecord> recs) {
  const std::size_t meta = c.grid["meta_repetitions"].get<std::size_t>();
  const double alpha = c.acceptance["alpha"].get<double>();
  std::vector<stats::EdgeFunctionals> er(meta), gin(meta);
  std::vector<std::vector<double>> gin_scaled(meta);
  for (const auto& r : recs) {
    const auto k = r.observables.at("meta").get<std::size_t>();
    const bool g = r.observables.at("ensemble").get<std::string>() == "ginibre";
    auto& dst = g ? gin[k] : er[k];
    dst.fluct.push_back(r.observables.at("fluct").get<double>());
    for (double v : r.observables.at("count").get<std::vector<double>>()) dst.count.push_back(v);
    for (double v : r.observables.at("min_distance").get<std::vector<double>>())
      dst.min_distance.push_back(v);
    if (g) gin_scaled[k].push_back(r.observables.at("fluct_scaled").get<double>());
  }
  std::vector<SummaryRow> rows;
  std::size_t pass_main = 0, pass_null = 0;
  double worst_power = 0.0;
  for (std::size_t k = 0; k < meta; ++k) {
    const std::size_t next = (k + 1) % meta;
    const auto main = stats::compare_functionals(er[k], gin[k]);
    const auto null = stats::compare_functionals(er[k], er[next]);
    const auto power = stats::two_sample_ks(gin[k].fluct, gin_scaled[next], "fluct");
    bool ok_main = true, ok_null = true;
    for (const auto& t : main) {
      ok_main = ok_main && t.p_value > alpha;
      rows.push_back({"universality detail", "meta " + std::to_string(k) + " er-vs-ginibre " + t.name + " p",
                      t.p_value, alpha, true});
    }
    for (const auto& t : null) ok_null = ok_null && t.p_value > alpha;
    pass_main += ok_main;
    pass_null += ok_null;
    worst_power = std::max(worst_power, power.p_value);
  }
  const double m = static_cast<double>(meta);
  rows.push_back(at_least("universality", "fraction of repetitions with all er-vs-ginibre p > " + fmt(alpha),
                          pass_main / m, c.acceptance["pass_fraction"].get<double>()));
  rows.push_back(at_least("universality null", "fraction of repetitions with all er-vs-er p > " + fmt(alpha),
                          pass_null / m, c.acceptance["null_pass_fraction"].get<double>()));
  rows.push_back(at_most("universality power", "max p, ginibre vs scaled fluct", worst_power,
                         c.acceptance["power_p"].get<double>()));
  return rows;
}

double girko_calibration(const ExperimentConfig& c) {
  const auto tf = girko_test_function(c);
  const auto f = girko::unscaled(tf);
  girko::QuadratureSpec spec;
  spec.eta_lower = 1e-12;
  spec.tolerance = 1e-6;
  double worst = 0.0;
  for (cplx offset : {cplx(0.0), cplx(0.3, 0.2), cplx(-0.5, 0.1)}) {
    const cplx lambda = tf.center + offset;
    const girko::LogModulusFn lm = [&](cplx w) {
      girko::LogModulus out;
      out.value = std::log(std::abs(lambda - w));
      out.min_sigma = std::abs(lambda - w);
      return out;
    };
    worst = std::max(worst, std::abs(girko::girko_integral(f, lm, 1, spec).value - f(lambda)));
  }
  return worst;
}

std::vector<SummaryRow> summarize_flow(const ExperimentConfig& c, std::span<const TrialRecord> recs) {
  std::vector<SummaryRow> rows;
  const auto& times = c.grid["times"];
  const double target = 1.0 / static_cast<double>(c.n);
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> v;
    for (const auto& r : recs) v.push_back(r.observables.at("second_moment").at(k).get<double>());
    double mean = 0.0, var = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) var += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1) /
                                                static_cast<double>(v.size()))
                                   : INFINITY;
    rows.push_back(at_most("flow-variance",
                           "|mean entry variance - 1/N| at t=" + fmt(as_time(times[k])),
                           std::abs(mean - target), c.acceptance["sigmas"].get<double>() * se));
  }
  std::vector<double> corner, flat;
  for (const auto& r : recs) {
    for (double v : r.observables.at("corner_moduli").get<std::vector<double>>()) corner.push_back(v);
    for (double v : r.observables.at("flat_moduli").get<std::vector<double>>()) flat.push_back(v);
  }
  const auto ks = stats::two_sample_ks(corner, flat, "moduli");
  rows.push_back(at_least("corner", "KS p, corner vs f e e^T moduli", ks.p_value,
                          c.acceptance["alpha"].get<double>()));
  return rows;
}

}  // namespace

std::vector<SummaryRow> summarize(const ExperimentConfig& c, std::span<const TrialRecord> recs) {
  if (recs.empty()) return {};
  const double n = static_cast<double>(c.n);
  switch (c.experiment) {
    case Experiment::local_law:
      return summarize_local_law(c, recs);
    case Experiment::edge_rigidity:
      return summarize_edge(c, recs);
    case Experiment::delocalization:
      return summarize_fraction("delocalization", "max sqrt(N)|u|_inf/|u|_2", column(recs, "max"),
                                std::pow(n, c.acceptance["epsilon"].get<double>()),
                                c.acceptance["fraction"].get<double>());
    case Experiment::universality:
      return summarize_universality(c, recs);
    case Experiment::girko_xcheck: {
      const auto errs = column(recs, "rel_error");
      return {at_most("girko-xcheck", "max relative |girko - direct|",
                      *std::max_element(errs.begin(), errs.end()),
                      c.acceptance["rel_tol"].get<double>()),
              at_most("girko-xcheck", "Green's identity calibration", girko_calibration(c),
                      c.acceptance["calibration_tol"].get<double>())};
    }
    case Experiment::prop51: {
      const double envelope = recs[0].observables.at("envelope").get<double>();
      return {at_most("prop51", "median |offdiag + (1+m^2)/w|", stats::median(column(recs, "deviation")),
                      std::pow(n, c.acceptance["epsilon"].get<double>()) * envelope)};
    }
    case Experiment::flow_variance:
      return summarize_flow(c, recs);
    case Experiment::circular_law: {
      const double a = c.grid["a"].get<double>();
      return summarize_fraction(
          "circular-law", "|linear statistic - disc integral|", column(recs, "deviation"),
          std::pow(n, 2 * a - 1 + c.acceptance["epsilon"].get<double>()),
          c.acceptance["fraction"].get<double>());
    }
  }
  return {};
}

bool RunResult::all_pass() const {
  return std::all_of(summary.begin(), summary.end(), [](const SummaryRow& r) { return r.pass; });
}

// ---------------------------------------------------------------------------
// Persistence

Json record_header(const ExperimentConfig& c) {
  return {{"type", "header"},
          {"experiment", to_string(c.experiment)},
          {"config", c.scientific_document()},
          {"config_hash", c.hash()},
          {"version", RMTLAB_VERSION},
          {"backend", spectral::backend_id(c.spectral.backend)},
          {"rng", Rng::algorithm},
          {"trials", trial_count(c)}};
}

Json record_line(const ExperimentConfig& c, const TrialRecord& r) {
  return {{"type", "trial"},
          {"trial", r.trial},
          {"stream", r.stream},
          {"backend", spectral::backend_id(c.spectral.backend)},
          {"observables", r.observables}};
}

namespace {

void write_summary(const ExperimentConfig& c, const std::vector<SummaryRow>& rows,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "# experiment=" << to_string(c.experiment) << "\n";
  out << "# config_hash=" << c.hash() << "\n";
  out << "# version=" << RMTLAB_VERSION << "\n";
  out << "# backend=" << spectral::backend_id(c.spectral.backend) << "\n";
  out << "criterion,quantity,value,bound,pass\n";
  for (const auto& r : rows)
    out << r.criterion << ",\"" << r.quantity << "\"," << fmt(r.value) << "," << fmt(r.bound) << ","
        << (r.pass ? "true" : "false") << "\n";
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

RunResult run(const ExperimentConfig& c) {
  if (c.spectral.backend == spectral::Backend::accelerated && !spectral::accelerated_available())
    throw NumericalError("accelerated backend requested but not built");
  RunResult result;
  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);
  result.records_path = dir / "records.ndjson";
  result.timings_path = dir / "timings.ndjson";
  result.summary_path = dir / "summary.csv";

  std::ofstream records(result.records_path), timings(result.timings_path);
  if (!records || !timings) throw Error("cannot open output files in " + dir.string());
  const Json header = record_header(c);
  records << header.dump() << "\n";
  timings << Json{{"type", "header"},
                  {"config_hash", c.hash()},
                  {"version", RMTLAB_VERSION},
                  {"parallel", c.parallel},
                  {"out_dir", c.out_dir}}
                 .dump()
          << "\n";
  records.flush();

  const std::size_t total = trial_count(c);
  std::vector<std::optional<TrialRecord>> done(total);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex sink;
  std::size_t written = 0;
  std::exception_ptr failure;
  std::size_t failed_trial = total;

  const auto flush_prefix = [&] {
    while (written < total && done[written]) {
      records << record_line(c, *done[written]).dump() << "\n";
      timings << Json{{"trial", done[written]->trial}, {"seconds", done[written]->seconds}}.dump() << "\n";
      ++written;
    }
    records.flush();
  };

  const auto worker = [&] {
    while (!stop) {
      const std::size_t id = next.fetch_add(1);
      if (id >= total) return;
      try {
        auto rec = run_trial(c, id);
        std::lock_guard lock(sink);
        done[id] = std::move(rec);
        flush_prefix();
      } catch (...) {
        std::lock_guard lock(sink);
        if (id < failed_trial) {
          failed_trial = id;
          failure = std::current_exception();
        }
        stop = true;
      }
    }
  };

  const std::size_t width = std::min<std::size_t>(c.parallel, std::max<std::size_t>(total, 1));
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < width; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (failure) {
    // Keep everything that finished, in id order, then mark the abort.
    for (std::size_t id = written; id < total; ++id)
      if (done[id]) records << record_line(c, *done[id]).dump() << "\n";
    std::string what = "unknown error";
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    records << Json{{"type", "abort"}, {"trial", failed_trial}, {"error", what}}.dump() << "\n";
    records.flush();
    std::rethrow_exception(failure);
  }

  for (auto& r : done) result.records.push_back(std::move(*r));
  result.summary = summarize(c, result.records);
  write_summary(c, result.summary, result.summary_path);
  return result;
}

RecordFile read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open records " + path.string());
  RecordFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto type = j.value("type", "");
    if (type == "header") {
      file.header = j;
    } else if (type == "trial") {
      TrialRecord r;
      r.trial = j.at("trial").get<std::uint64_t>();
      r.stream = j.at("stream").get<std::uint64_t>();
      r.observables = j.at("observables");
      file.records.push_back(std::move(r));
    } else if (type == "abort") {
      file.aborted = true;
    } else {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown record type");
    }
  }
  if (file.header.is_null()) throw ConfigError(path.string() + ": missing header line");
  return file;
}

// ---------------------------------------------------------------------------
// Plot tables

std::string_view to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::local_law: return "local-law";
    case PlotKind::scaling: return "scaling";
    case PlotKind::universality: return "universality";
  }
  return "";
}

PlotKind parse_plot_kind(std::string_view name) {
  for (PlotKind k : {PlotKind::local_law, PlotKind::scaling, PlotKind::universality})
    if (name == to_string(k)) return k;
  throw ConfigError("unknown plot kind '" + std::string(name) +
                    "' (known: local-law, scaling, universality)");
}

PlotTable emit_plot_data(const RecordFile& file, PlotKind kind) {
  PlotTable t;
  switch (kind) {
    case PlotKind::local_law: t.columns = {"eta", "q10", "q50", "q90", "bound"}; break;
    case PlotKind::scaling: t.columns = {"n", "median_error"}; break;
    case PlotKind::universality: t.columns = {"functional", "ensemble", "value"}; break;
  }
  if (file.records.empty()) return t;

  const auto config = parse_config(file.header.at("config"));
  const Experiment needed = kind == PlotKind::local_law   ? Experiment::local_law
                            : kind == PlotKind::scaling   ? Experiment::edge_rigidity
                                                          : Experiment::universality;
  if (config.experiment != needed)
    throw ConfigError("plot kind " + std::string(to_string(kind)) + " needs " +
                      std::string(to_string(needed)) + " records, got " +
                      std::string(to_string(config.experiment)));

  if (kind == PlotKind::local_law) {
    const auto spec = local_law_spec(config);
    const double n = static_cast<double>(config.n);
    const double bound = std::pow(n, config.acceptance["epsilon"].get<double>());
    for (std::size_t k = 0; k < spec.etas.size(); ++k) {
      std::vector<double> v;
      const double scale = std::pow(n, 1.0 + spec.nu) * spec.etas[k];
      for (const auto& r : file.records)
        v.push_back(scale * r.observables.at("perturbed").at(k).get<double>());
      t.rows.push_back({fmt(spec.etas[k]), fmt(stats::quantile(v, 0.1)), fmt(stats::quantile(v, 0.5)),
                        fmt(stats::quantile(v, 0.9)), fmt(bound)});
    }
  } else if (kind == PlotKind::scaling) {
    std::map<std::size_t, std::vector<double>> by_n;
    for (const auto& r : file.records)
      if (r.observables.contains("error"))
        by_n[r.observables.at("n").get<std::size_t>()].push_back(r.observables.at("error").get<double>());
    std::vector<double> logn, loge;
    for (const auto& [n, errs] : by_n) {
      const double med = stats::median(errs);
      t.rows.push_back({std::to_string(n), fmt(med)});
      logn.push_back(std::log(static_cast<double>(n)));
      loge.push_back(std::log(med));
    }
    if (by_n.size() >= 2) t.slope = least_squares_slope(logn, loge);
  } else {
    for (const auto& r : file.records) {
      const auto ens = r.observables.at("ensemble").get<std::string>();
      t.rows.push_back({"fluct", ens, fmt(r.observables.at("fluct").get<double>())});
      for (const auto& v : r.observables.at("min_distance"))
        t.rows.push_back({"min-distance", ens, fmt(v.get<double>())});
      for (const auto& v : r.observables.at("count"))
        t.rows.push_back({"count", ens, fmt(v.get<double>())});
    }
  }
  return t;
}

void write_csv(const PlotTable& table, const std::filesystem::path& path,
               const std::vector<std::string>& comments) {
  std::ofstream out(path);
  for (const auto& c : comments) out << "# " << c << "\n";
  if (table.slope) out << "# slope=" << fmt(*table.slope) << "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << table.columns[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace rmtlab::harness
