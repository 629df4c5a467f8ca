#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shift/attacks.hpp"
#include "shift/defense.hpp"
#include "shift/diffusion.hpp"
#include "shift/env.hpp"
#include "shift/metrics.hpp"
#include "shift/realism.hpp"
#include "shift/victim.hpp"

// Experiment plumbing: config files, trajectory logs, artifact caching, the
// attack x defense evaluation grid, and report rendering.
namespace shift::harness {

// ---------------------------------------------------------------------------
// configuration

struct DiffusionTrainHyper {
  int steps = 45000;
  int batch_size = 32;
  double lr = 1e-3;
  // lr is scaled by 0.3 / 0.1 / 0.03 when training crosses these steps
  int lr_drop1 = 12000;
  int lr_drop2 = 25000;
  int lr_drop3 = 38000;
  int hidden1 = 512;
  int hidden2 = 384;
  int greedy_episodes = 120;  // epsilon-greedy on the exact planner
  int random_episodes = 80;   // uniform random policy
  double greedy_eps = 0.3;
  double drop_rate = 0.1;
  // Conditioning windows are corrupted with Gaussian noise of std U(0, cond_noise)
  // per item so the model tolerates the imperfect frames SHIFT-I feeds back.
  double cond_noise = 0.1;
  int eval_every = 5000;  // projection-accuracy probes during training
  int eval_windows = 100;
  std::uint64_t data_seed_greedy = 11;
  std::uint64_t data_seed_random = 12;
  std::uint64_t model_seed = 1234;
  std::uint64_t batch_seed = 555;
};

// Everything an experiment needs in one place. Training-relevant fields feed
// the artifact-cache hash; evaluation knobs only feed the provenance hash.
struct ExperimentConfig {
  env::EnvConfig env;
  victim::DqnHyper victim;
  diffusion::NoiseParams noise;
  DiffusionTrainHyper dtrain;
  realism::AEHyper ae;
  attacks::AttackConfig attack;
  defense::DetectorConfig detector;
  int stealth_k = diffusion::kHistoryLen;
  std::uint64_t train_seed = 7;  // victim training; AE uses a fixed offset
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int episodes_per_seed = 1;
  double sigma_partial = -1.0;  // negative = second ladder rung
  bool ablation = true;         // attack-eval also sweeps gamma2 x realism
  std::string out_dir;          // empty = $SHIFTLAB_OUT, else ./out
};

void validate(const ExperimentConfig& cfg);

// Plain `section.key = value` text, '#' comments, any order, unknown keys are
// ConfigError. Unspecified keys keep their defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);  // IoError when unreadable

// Canonical form: every key, fixed order, shortest round-trip numbers.
std::string serialize_config(const ExperimentConfig& cfg);
// The subset of the canonical form that affects checkpoint training.
std::string serialize_training_config(const ExperimentConfig& cfg);

std::uint64_t fnv1a(const std::string& text);
std::uint64_t config_hash(const ExperimentConfig& cfg);  // provenance, all keys
std::uint64_t train_hash(const ExperimentConfig& cfg);   // artifact cache key
std::string hash_hex(std::uint64_t h);

// ---------------------------------------------------------------------------
// trajectory logs

struct StepRecord {
  int t = 0;
  int true_state = -1;      // canonical state index
  int observed_frame = -1;  // index into the frame sidecar
  int action = 0;
  int clean_action = 0;  // greedy action on the true render
  double reward = 0.0;
  bool attacked = false;
  double omega = 0.0;             // importance weight of the true state
  double w1_adjacent = 0.0;       // W1(observed_t, observed_{t-1}); 0 at t=0
  double w1_vs_prev_true = 0.0;   // W1(observed_t, true render at t-1); 0 at t=0
  double recon = 0.0;             // AE reconstruction error of the observed frame
  double ssim_vs_true = 0.0;      // SSIM(observed, true render)
  double realism = 0.0;           // L2 to the nearest valid render
  bool semantics_changed = false;
  bool history_aligned = true;
  double l2_vs_true = 0.0;  // L2(observed, true render)
  double faith = -1.0;      // trailing-window faithfulness; -1 until warm
};

struct TrajectoryLog {
  int version = 1;
  std::uint64_t config = 0;
  std::string attack = "none";
  std::string defense = "none";
  std::uint64_t seed = 0;
  int episode = 0;
  int frame_size = 0;
  std::vector<StepRecord> steps;
  std::vector<env::Frame> frames;  // observed frames, referenced by index
};

// Text log at `path` plus a packed binary sidecar at `path`.frames.
void save_log(const TrajectoryLog& log, const std::string& path);
// FormatError on unknown versions or malformed files, IoError when unreadable.
TrajectoryLog load_log(const std::string& path);

// ---------------------------------------------------------------------------
// artifacts

inline constexpr const char* kOutEnvVar = "SHIFTLAB_OUT";

std::string out_root(const ExperimentConfig& cfg);
// out_root/t<train-hash>, created on first use; checkpoints cache here.
std::string artifact_dir(const ExperimentConfig& cfg);
std::string victim_path(const ExperimentConfig& cfg);
std::string denoiser_path(const ExperimentConfig& cfg);
std::string ae_path(const ExperimentConfig& cfg);
std::string logs_dir(const ExperimentConfig& cfg);
void ensure_dir(const std::string& path);
bool file_exists(const std::string& path);

// ---------------------------------------------------------------------------
// runner

struct TrainedStack {
  victim::QModel q;
  diffusion::DenoiserModel dm;
  realism::AEModel ae;
};

// Each returns the checkpoint path, training only on cache miss, and writes a
// training-curve CSV next to the checkpoint.
std::string cmd_train_victim(const ExperimentConfig& cfg);
std::string cmd_train_diffusion(const ExperimentConfig& cfg);
std::string cmd_train_ae(const ExperimentConfig& cfg);

// Loads all three checkpoints; ConfigError naming the first missing one.
TrainedStack load_stack(const ExperimentConfig& cfg);

struct EvalWindow {
  diffusion::HistoryWindow cond;
  int true_state = -1;  // canonical index of the frame the window predicts
};

// Fresh epsilon-greedy rollouts, seed-disjoint from training by construction.
std::vector<EvalWindow> heldout_windows(const ExperimentConfig& cfg, int episodes,
                                        std::uint64_t seed);

struct CellSpec {
  attacks::AttackConfig attack;
  bool purifier = false;
};

std::string cell_defense_name(bool purifier);

struct CellSummary {
  std::string attack = "none";
  std::string defense = "none";
  int episodes = 0;
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double dev_pct = 0.0;        // % of steps whose action differs from clean
  double attacked_frac = 0.0;  // mean attacked fraction per episode
  double recon_mean = 0.0;     // over attacked steps; all steps when none
  double w1_adj_mean = 0.0;
  double w1_prev_true_mean = 0.0;
  double ssim_mean = 0.0;
  double l2_mean = 0.0;
  double sem_rate = 0.0;    // semantics-changing fraction of attacked steps
  double align_rate = 0.0;  // history-aligned fraction of all steps
  double faith_mean = 0.0;  // over steps with a full trailing window
};

struct CellResult {
  CellSummary summary;
  std::vector<TrajectoryLog> logs;
};

// One victim episode under the given attack and defense. All randomness
// derives from (run_seed, episode) so reruns are bit-identical.
TrajectoryLog run_episode(const ExperimentConfig& cfg, const TrainedStack& stack,
                          const env::StateSpace& space, const metrics::RenderIndex& ridx,
                          const CellSpec& spec, std::uint64_t run_seed, int episode);

// cfg.seeds x cfg.episodes_per_seed episodes of one grid cell.
CellResult run_cell(const ExperimentConfig& cfg, const TrainedStack& stack,
                    const env::StateSpace& space, const metrics::RenderIndex& ridx,
                    const CellSpec& spec);

CellSummary summarize_cell(const std::string& attack, const std::string& defense,
                           const std::vector<TrajectoryLog>& logs);

// Runs the full attack x defense grid (or one `cell`, "ATTACKxDEFENSE"),
// writes per-episode logs, summary.csv, l2_samples.csv, and the ablation
// sweep when enabled. Returns the summary rows.
std::vector<CellSummary> cmd_attack_eval(const ExperimentConfig& cfg,
                                         const std::string& cell = "");

struct DetectRow {
  std::string attack = "none";
  int episodes = 0;
  int mad_flagged = 0;    // episodes the MAD rule flags
  int cusum_flagged = 0;  // episodes the CUSUM rule flags
  bool mad_detected = false;
  bool cusum_detected = false;
};

// Scores the undefended logs written by cmd_attack_eval: clean statistics
// come from the attack=none cell (ConfigError when absent), each episode's
// adjacent-W1 series feeds both detectors, and a cell is Detected when at
// least half its episodes flag. Writes detect.csv.
std::vector<DetectRow> cmd_detect_eval(const ExperimentConfig& cfg);

// Renders report/digest.txt, report/table2.csv, and PGM plots from the CSV
// artifacts. Missing inputs degrade to "no data". Returns the report dir.
std::string cmd_report(const ExperimentConfig& cfg);

}  // namespace shift::harness
