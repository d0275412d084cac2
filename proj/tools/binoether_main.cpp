#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"

#include "binoether/common.hpp"
#include "binoether/harness.hpp"

using namespace binoether;

namespace {

int finish_run(const harness::ExperimentConfig& cfg) {
  harness::Report report = harness::run(cfg);
  int passed = 0;
  for (const auto& c : report.checks) {
    std::puts(harness::check_line(harness::model_name(cfg.model), c).c_str());
    if (c.pass) ++passed;
  }
  for (const auto& note : report.notes)
    std::printf("  note: %s\n", note.c_str());
  std::printf("run: %d/%zu checks passed\n", passed, report.checks.size());
  return report.all_pass() ? 0 : 1;
}

void add_field_options(CLI::App* sub, harness::ExperimentConfig& cfg) {
  sub->add_option("--grid-n", cfg.grid_n, "grid points (power of two)")
      ->capture_default_str();
  sub->add_option("--length", cfg.length, "box length")->capture_default_str();
  sub->add_option("--preset", cfg.preset, "initial-condition preset")
      ->capture_default_str();
  sub->add_option("--initial", cfg.initial_path,
                  "snapshot file overriding the preset");
  sub->add_option("--amplitude", cfg.amplitude,
                  "preset amplitude (0 = preset default)");
  sub->add_option("--width", cfg.width,
                  "gaussian width denominator (0 = preset default)");
  sub->add_option("--center", cfg.center, "preset center");
  sub->add_option("--speed", cfg.speed, "soliton speed c")
      ->capture_default_str();
  sub->add_option("--mode", cfg.mode, "planewave wavenumber index")
      ->capture_default_str();
  sub->add_option("--dt", cfg.dt, "time step")->capture_default_str();
  sub->add_option("--t-end", cfg.t_end, "integration horizon")
      ->capture_default_str();
  sub->add_option("--seed", cfg.seed, "rng seed")->capture_default_str();
  sub->add_option("--out", cfg.out, "report destination");
  sub->add_option("--format", cfg.format, "json or csv")
      ->capture_default_str();
}

std::vector<harness::Model> parse_models_csv(const std::string& csv) {
  std::vector<harness::Model> models;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    std::string tok = csv.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) models.push_back(harness::parse_model(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return models;
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::setNbThreads(harness::max_threads());

  CLI::App app{"non-Noether symmetry verification for Toda, NSE, KdV, mKdV"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run one configured experiment");
  std::string config_path;
  run_cmd->add_option("--config", config_path, "key = value config file")
      ->required();

  auto* verify_cmd =
      app.add_subcommand("verify-all", "run the canonical acceptance suite");
  std::string models_csv;
  std::uint64_t verify_seed = 4;
  std::string verify_out;
  std::string verify_format = "json";
  verify_cmd->add_option("--models", models_csv,
                         "comma-separated subset of toda,nse,kdv,mkdv");
  verify_cmd->add_option("--seed", verify_seed, "rng seed")
      ->capture_default_str();
  verify_cmd->add_option("--out", verify_out, "report directory");
  verify_cmd->add_option("--format", verify_format, "json or csv")
      ->capture_default_str();

  auto toda_cfg = harness::ExperimentConfig::defaults(harness::Model::toda);
  auto* toda_cmd = app.add_subcommand("toda", "Toda chain suite");
  toda_cmd->add_option("--n", toda_cfg.n, "chain length")
      ->capture_default_str();
  toda_cmd->add_option("--dt", toda_cfg.dt, "time step")
      ->capture_default_str();
  toda_cmd->add_option("--t-end", toda_cfg.t_end, "integration horizon")
      ->capture_default_str();
  toda_cmd->add_option("--preset", toda_cfg.preset, "initial-condition preset")
      ->capture_default_str();
  toda_cmd->add_option("--method", toda_cfg.method, "leapfrog or rk4")
      ->capture_default_str();
  toda_cmd->add_option("--amplitude", toda_cfg.amplitude,
                       "random preset amplitude (0 = 1.0)");
  toda_cmd->add_option("--seed", toda_cfg.seed, "rng seed")
      ->capture_default_str();
  toda_cmd->add_option("--out", toda_cfg.out, "report destination");
  toda_cmd->add_option("--format", toda_cfg.format, "json or csv")
      ->capture_default_str();

  auto nse_cfg = harness::ExperimentConfig::defaults(harness::Model::nse);
  auto* nse_cmd = app.add_subcommand("nse", "nonlinear Schrodinger suite");
  add_field_options(nse_cmd, nse_cfg);
  auto kdv_cfg = harness::ExperimentConfig::defaults(harness::Model::kdv);
  auto* kdv_cmd = app.add_subcommand("kdv", "KdV suite");
  add_field_options(kdv_cmd, kdv_cfg);
  auto mkdv_cfg = harness::ExperimentConfig::defaults(harness::Model::mkdv);
  auto* mkdv_cmd = app.add_subcommand("mkdv", "mKdV suite");
  add_field_options(mkdv_cmd, mkdv_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_cmd->parsed()) return finish_run(harness::load_config(config_path));
    if (verify_cmd->parsed()) {
      auto summary = harness::verify_all(parse_models_csv(models_csv),
                                         verify_seed, verify_out,
                                         verify_format);
      std::fputs(harness::summary_table(summary).c_str(), stdout);
      return summary.exit_code;
    }
    if (toda_cmd->parsed()) return finish_run(toda_cfg);
    if (nse_cmd->parsed()) return finish_run(nse_cfg);
    if (kdv_cmd->parsed()) return finish_run(kdv_cfg);
    if (mkdv_cmd->parsed()) return finish_run(mkdv_cfg);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const CalibrationError& e) {
    std::fprintf(stderr, "calibration error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
