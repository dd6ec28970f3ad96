// rsoanom: per-object orbital anomaly detection pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rsoanom/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

std::pair<std::string, std::string> split_pair(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == s.size()) {
    throw rsoanom::ConfigError(fmt::format("--chi2 expects two window names like baseline,leadup, got '{}'", s));
  }
  return {s.substr(0, comma), s.substr(comma + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  using namespace rsoanom;
  namespace pl = rsoanom::pipeline;

  CLI::App app{"Orbital-element anomaly detection for tracked space objects"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Run configuration (JSON)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--workers", workers, "Worker threads (outputs do not depend on this)")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Run seed");

  auto* ingest = app.add_subcommand("ingest", "Load TLEs, apply the selection criteria and report");
  std::string tle_path, fetch_path;
  auto* tle_opt = ingest->add_option("--tle", tle_path, "TLE file");
  ingest->add_option("--fetch", fetch_path, "Catalog client config; secret comes from the environment")
      ->excludes(tle_opt);

  auto* label = app.add_subcommand("label", "IQR outlier labels per object and element");
  std::string label_window = "train";
  label->add_option("--window", label_window, "Window to label");

  auto* train = app.add_subcommand("train", "Train one model per selected object (resumable)");
  std::string train_window = "train";
  bool force = false;
  train->add_option("--window", train_window, "Training window (train or train4y)");
  train->add_flag("--force", force, "Retrain even when an up-to-date model exists");

  auto* score = app.add_subcommand("score", "Score a window with the trained models");
  std::string score_window;
  score->add_option("--window", score_window, "Window to score")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Compare detectors against labels");
  std::string grid_path;
  bool temporal = false;
  evaluate->add_option("--grid", grid_path, "Hyperparameter grid file");
  evaluate->add_flag("--temporal", temporal, "Sweep training windows of 5..1 years");

  auto* stats_cmd = app.add_subcommand("stats", "Anomaly statistics from the trained models");
  std::string chi2;
  bool monthly = false, diffs = false, corr = false;
  stats_cmd->add_option("--chi2", chi2, "Two windows to compare, e.g. baseline,leadup");
  stats_cmd->add_flag("--monthly", monthly, "Monthly anomaly counts");
  stats_cmd->add_flag("--diffs", diffs, "Consecutive differences and percent changes");
  stats_cmd->add_flag("--corr", corr, "Element correlations by mission class and regime");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string scenario_path;
  synth_cmd->add_option("--scenario", scenario_path, "Scenario file (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const auto log = pl::stderr_logger();
  try {
    pl::RunConfig cfg = config_path.empty() ? pl::RunConfig{} : pl::load_run_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (workers) cfg.workers = *workers;
    if (seed) cfg.seed = *seed;
    if (!tle_path.empty()) {
      cfg.data.tle = std::filesystem::absolute(tle_path).string();
      cfg.data.fetch.reset();
    }
    if (!fetch_path.empty()) {
      cfg.data.fetch = std::filesystem::absolute(fetch_path).string();
      cfg.data.tle.reset();
    }
    cfg.validate();

    std::vector<std::string> failures;
    if (*ingest) {
      failures = pl::cmd_ingest(cfg, log);
    } else if (*label) {
      failures = pl::cmd_label(cfg, label_window, log);
    } else if (*train) {
      if (train_window != "train" && train_window != "train4y") {
        throw ConfigError(fmt::format("train --window must be train or train4y, got '{}'", train_window));
      }
      failures = pl::cmd_train(cfg, train_window, force, log).failures;
    } else if (*score) {
      failures = pl::cmd_score(cfg, score_window, log);
    } else if (*evaluate) {
      pl::EvaluateOptions opt;
      if (!grid_path.empty()) opt.grid = grid_path;
      opt.temporal = temporal;
      failures = pl::cmd_evaluate(cfg, opt, log);
    } else if (*stats_cmd) {
      pl::StatsOptions opt;
      if (!chi2.empty()) opt.chi2 = split_pair(chi2);
      opt.monthly = monthly;
      opt.diffs = diffs;
      opt.corr = corr;
      failures = pl::cmd_stats(cfg, opt, log);
    } else if (*synth_cmd) {
      failures = pl::cmd_synth(cfg, scenario_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(scenario_path),
                               log);
    }
    if (!failures.empty()) log(fmt::format("completed with {} per-object problem(s); see manifest.json", failures.size()));
    return 0;
  } catch (const ConfigError& e) {
    log(fmt::format("config error: {}", e.what()));
    return kExitConfig;
  } catch (const DataError& e) {
    log(fmt::format("data error: {}", e.what()));
    return kExitData;
  } catch (const AuthError& e) {
    log(fmt::format("authentication error: {}", e.what()));
    return kExitData;
  } catch (const HttpError& e) {
    log(fmt::format("catalog error: {}", e.what()));
    return kExitData;
  } catch (const PayloadError& e) {
    log(fmt::format("catalog payload error: {}", e.what()));
    return kExitData;
  } catch (const std::exception& e) {
    log(fmt::format("internal error: {}", e.what()));
    return kExitInternal;
  }
}
