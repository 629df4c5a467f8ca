#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "shift/harness.hpp"

using namespace shift;

int main(int argc, char** argv) {
  CLI::App app{"shiftlab: gridworld laboratory for observation attacks and defenses"};
  app.require_subcommand(1);

  std::string config_path, out_dir, cell;
  long long seed = -1;
  app.add_option("--config", config_path, "experiment config file (defaults when omitted)");
  app.add_option("--out", out_dir, "output root (else $SHIFTLAB_OUT, else ./out)");
  app.add_option("--seed", seed, "replace run.seeds with this single seed");

  CLI::App* train_victim = app.add_subcommand("train-victim", "train and cache the DQN victim");
  CLI::App* train_diffusion =
      app.add_subcommand("train-diffusion", "train and cache the conditional denoiser");
  CLI::App* train_ae =
      app.add_subcommand("train-ae", "train and cache the realism autoencoder");
  CLI::App* attack_eval = app.add_subcommand(
      "attack-eval", "run the attack x defense grid and write logs and summary.csv");
  attack_eval->add_option("--cell", cell,
                          "single grid cell, ATTACKxDEFENSE (e.g. pgdxnone, shift-oxpurifier)");
  CLI::App* detect_eval = app.add_subcommand(
      "detect-eval", "score undefended logs with the MAD and CUSUM detectors");
  CLI::App* report = app.add_subcommand("report", "render digest, tables, and plots");

  CLI11_PARSE(app, argc, argv);

  try {
    harness::ExperimentConfig cfg =
        config_path.empty() ? harness::ExperimentConfig{} : harness::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
    harness::validate(cfg);

    if (train_victim->parsed()) {
      std::printf("victim checkpoint: %s\n", harness::cmd_train_victim(cfg).c_str());
    } else if (train_diffusion->parsed()) {
      std::printf("denoiser checkpoint: %s\n", harness::cmd_train_diffusion(cfg).c_str());
    } else if (train_ae->parsed()) {
      std::printf("autoencoder checkpoint: %s\n", harness::cmd_train_ae(cfg).c_str());
    } else if (attack_eval->parsed()) {
      auto rows = harness::cmd_attack_eval(cfg, cell);
      std::printf("%-11s %-10s %8s %8s %8s\n", "attack", "defense", "reward", "dev%", "frac");
      for (const auto& r : rows)
        std::printf("%-11s %-10s %8.2f %8.1f %8.2f\n", r.attack.c_str(), r.defense.c_str(),
                    r.reward_mean, r.dev_pct, r.attacked_frac);
      std::printf("artifacts: %s\n", harness::artifact_dir(cfg).c_str());
    } else if (detect_eval->parsed()) {
      auto rows = harness::cmd_detect_eval(cfg);
      std::printf("%-11s %9s %6s %6s  %s\n", "attack", "episodes", "mad", "cusum", "verdict");
      for (const auto& r : rows)
        std::printf("%-11s %9d %6d %6d  %s %s\n", r.attack.c_str(), r.episodes, r.mad_flagged,
                    r.cusum_flagged, r.mad_detected ? "mad" : "-",
                    r.cusum_detected ? "cusum" : "-");
    } else if (report->parsed()) {
      std::printf("report: %s\n", harness::cmd_report(cfg).c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
