#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rmtlab/spectral.hpp"

namespace rmtlab::harness {

using Json = nlohmann::json;

enum class Experiment {
  local_law,
  edge_rigidity,
  delocalization,
  universality,
  girko_xcheck,
  prop51,
  flow_variance,
  circular_law,
};

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view name);
std::vector<std::string> experiment_names();

// A validated config. `document` is the normalized form (defaults filled in)
// that is serialized into every output header.
struct ExperimentConfig {
  Experiment experiment = Experiment::edge_rigidity;
  std::size_t n = 256;
  double p = 0.1;
  bool zero_diagonal = false;
  std::vector<std::size_t> sizes;  // edge-rigidity scaling; defaults to {n}
  std::size_t trials = 0;
  std::uint64_t seed = 1;
  std::size_t parallel = 1;
  spectral::SpectralConfig spectral;
  Json grid;
  Json acceptance;
  std::string out_dir = "out";
  Json document;

  // The document without execution-only keys (output, parallel); this is
  // what record headers embed and what the hash covers.
  Json scientific_document() const;
  // SHA-256 of the compact scientific document.
  std::string hash() const;
};

// Throws ConfigError on schema violations, including unknown keys.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallel;
  std::optional<std::string> backend;
  std::optional<std::string> out_dir;
};

ExperimentConfig apply_overrides(const ExperimentConfig& config, const Overrides& ov);

// Full schema (keys, defaults, meaning) as JSON, per experiment.
Json schema();

struct TrialRecord {
  std::uint64_t trial = 0;
  std::uint64_t stream = 0;
  Json observables;
  double seconds = 0.0;
};

// Total number of trial ids; an experiment may fan one "trial" out into
// several ids (sizes, ensembles, meta-repetitions).
std::size_t trial_count(const ExperimentConfig& config);
TrialRecord run_trial(const ExperimentConfig& config, std::uint64_t trial);

struct SummaryRow {
  std::string criterion;
  std::string quantity;
  double value = 0.0;
  double bound = 0.0;
  bool pass = true;
};

std::vector<SummaryRow> summarize(const ExperimentConfig& config,
                                  std::span<const TrialRecord> records);

struct RunResult {
  std::vector<TrialRecord> records;
  std::vector<SummaryRow> summary;
  std::filesystem::path records_path, timings_path, summary_path;

  bool all_pass() const;
};

Json record_header(const ExperimentConfig& config);
Json record_line(const ExperimentConfig& config, const TrialRecord& record);

// Runs every trial on `parallel` workers and writes records.ndjson (header
// line, then trial lines in trial-id order), timings.ndjson and summary.csv
// under config.out_dir. A failing trial stops the run: completed records are
// kept, an abort line is appended and the error is rethrown.
RunResult run(const ExperimentConfig& config);

struct RecordFile {
  Json header;
  std::vector<TrialRecord> records;
  bool aborted = false;
};

RecordFile read_records(const std::filesystem::path& path);

enum class PlotKind { local_law, scaling, universality };

std::string_view to_string(PlotKind kind);
// Throws ConfigError listing the known kinds.
PlotKind parse_plot_kind(std::string_view name);

struct PlotTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::optional<double> slope;  // scaling: least-squares slope of log value vs log N
};

PlotTable emit_plot_data(const RecordFile& records, PlotKind kind);
void write_csv(const PlotTable& table, const std::filesystem::path& path,
               const std::vector<std::string>& comments = {});

// Least-squares slope of y against x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace rmtlab::harness
