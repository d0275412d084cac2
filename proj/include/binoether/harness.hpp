#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "binoether/common.hpp"

namespace binoether::harness {

enum class Model { toda, nse, kdv, mkdv };

const char* model_name(Model m);
Model parse_model(const std::string& name);  // ValidationError on unknown

// Flat key=value experiment description. Unknown keys, malformed values,
// out-of-range parameters and non-positive tolerance overrides raise
// ValidationError. dt is required before run() (0 means "not set" in the
// file format; defaults() fills the per-model canonical step).
struct ExperimentConfig {
  Model model = Model::toda;

  int n = 3;             // toda chain length
  double length = 40.0;  // field box size
  int grid_n = 256;      // field grid points

  // random (toda) | gaussian (nse, kdv, mkdv) | soliton (kdv) |
  // planewave (nse). initial_path, when set, loads a snapshot instead.
  std::string preset;
  std::string initial_path;
  double amplitude = 0.0;  // 0 picks the preset default
  double width = 0.0;      // gaussian denominator d in a*exp(-(x-c)^2/d)
  double center = 0.0;
  double speed = 0.25;  // soliton speed c
  int mode = 4;         // planewave wavenumber index

  std::string method = "leapfrog";  // toda integrator: leapfrog | rk4
  double dt = 0.0;
  double t_end = 0.0;  // 0 picks the per-model default horizon
  std::uint64_t seed = 4;

  std::string out;              // report destination ("" = stdout table only)
  std::string format = "json";  // json | csv

  // Per-check tolerance overrides, keyed by check name.
  std::map<std::string, double> tolerances;

  static ExperimentConfig defaults(Model m);
  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// pass is |value| <= tolerance when above is false, value >= tolerance when
// above is true (rank / ratio / nonzero-norm style checks).
struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool above = false;
  bool pass = false;
  std::string provenance;
};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (t, value)
};

struct Report {
  ExperimentConfig config;
  std::map<std::string, double> calibration;
  std::vector<Series> series;
  std::vector<CheckResult> checks;
  std::vector<std::string> notes;
  std::string timestamp;  // the one field excluded from determinism

  bool all_pass() const;
};

// Calibrates (cached), integrates the configured trajectory into the
// invariant time series, then runs the full per-model check suite.
Report run(const ExperimentConfig& config);

// Single JSON document: config, calibration, series, checks, notes, meta.
// Doubles serialize shortest-round-trip, so parse(to_json(r)) is lossless.
std::string to_json(const Report& report);
Report parse_report(const std::string& json_text);

// json: single file at path. csv: directory at path with one <series>.csv
// per time series plus checks.csv. Unwritable paths raise IoError.
void emit(const Report& report, const std::string& format,
          const std::string& path);

// Equality up to the timestamp field.
bool equivalent(const Report& a, const Report& b);

std::string check_line(const std::string& model, const CheckResult& c);

struct VerifySummary {
  std::vector<Report> reports;
  std::vector<std::string> errors;  // one message per failed model run
  int exit_code = 0;                // worst of: 0 ok, 1 check fail, 2/3/4 errors
  double seconds = 0.0;
};

// Canonical suite over the requested models (all four when empty) with the
// per-model default configs at the given seed. Reports land in out_dir when
// it is nonempty (combined verify_all.json, or per-model CSV directories).
VerifySummary verify_all(const std::vector<Model>& models, std::uint64_t seed,
                         const std::string& out_dir,
                         const std::string& format);

std::string summary_table(const VerifySummary& s);

// BINOETHER_THREADS clamped to [1, 64]; 1 when unset or malformed.
int max_threads();

}  // namespace binoether::harness
