#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "shift/harness.hpp"
#include "shift/nn.hpp"

namespace shift::harness {

namespace {

// Rollout windows for conditional training: epsilon-greedy over the exact
// planner (eps = 1 gives the uniform random policy). Windows never straddle
// episode boundaries.
void collect_windows(const env::EnvConfig& ecfg, const env::ValueIterationResult& vi,
                     int episodes, std::uint64_t seed, double eps,
                     std::vector<diffusion::TrainItem>& out, std::vector<int>* truth) {
  const int k = diffusion::kHistoryLen;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0, 1);
  std::uniform_int_distribution<int> rand_a(0, env::kNumActions - 1);
  for (int e = 0; e < episodes; ++e) {
    env::EnvState s = env::reset(ecfg);
    std::vector<env::Frame> frames;
    std::vector<int> acts, idxs;
    frames.push_back(env::render(ecfg, s));
    idxs.push_back(vi.space.index_of(vi.space.canonical(s)));
    bool done = false;
    while (!done) {
      int si = vi.space.index_of(vi.space.canonical(s));
      int a;
      if (unit(rng) < eps) {
        a = rand_a(rng);
      } else {
        a = 0;
        for (int j = 1; j < env::kNumActions; ++j)
          if (vi.q(si, j) > vi.q(si, a)) a = j;
      }
      auto r = env::step(ecfg, s, static_cast<env::Action>(a));
      acts.push_back(a);
      s = r.next;
      done = r.done;
      frames.push_back(env::render(ecfg, s));
      idxs.push_back(vi.space.index_of(vi.space.canonical(s)));
    }
    for (int t = k; t < static_cast<int>(frames.size()); ++t) {
      diffusion::TrainItem it;
      it.target = frames[t];
      for (int j = t - k; j < t; ++j) {
        it.cond.frames.push_back(frames[j]);
        it.cond.actions.push_back(acts[j]);
      }
      out.push_back(std::move(it));
      if (truth) truth->push_back(idxs[t]);
    }
  }
}

// W1 needs positive mass on both sides; degenerate frames get the extreme
// distance so a blacked-out observation still reads as a large jump.
double safe_w1(const env::Frame& a, const env::Frame& b) {
  bool za = !(a.maxCoeff() > 0.0), zb = !(b.maxCoeff() > 0.0);
  if (za && zb) return 0.0;
  if (za || zb) return 1.0;
  return metrics::wasserstein1(a, b);
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs), s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::string episode_log_path(const ExperimentConfig& cfg, const std::string& attack,
                             const std::string& defense, std::uint64_t seed, int episode) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "/%s_%s_s%llu_e%d.log", attack.c_str(), defense.c_str(),
                static_cast<unsigned long long>(seed), episode);
  return logs_dir(cfg) + buf;
}

void parse_cell(const std::string& cell, attacks::Variant& v, bool& purifier) {
  std::string attack;
  if (cell.size() > 9 && cell.substr(cell.size() - 9) == "xpurifier") {
    attack = cell.substr(0, cell.size() - 9);
    purifier = true;
  } else if (cell.size() > 5 && cell.substr(cell.size() - 5) == "xnone") {
    attack = cell.substr(0, cell.size() - 5);
    purifier = false;
  } else {
    throw FormatError("cell must be ATTACKxDEFENSE with defense none|purifier: " + cell);
  }
  v = attacks::variant_from_name(attack);
}

}  // namespace

std::string cell_defense_name(bool purifier) { return purifier ? "purifier" : "none"; }

std::string cmd_train_victim(const ExperimentConfig& cfg) {
  validate(cfg);
  std::string path = victim_path(cfg);
  if (file_exists(path)) return path;
  victim::TrainLog tl;
  victim::QModel q = victim::train_dqn(cfg.env, cfg.victim, cfg.train_seed, &tl);
  victim::save_qmodel(q, path);
  std::ofstream csv(artifact_dir(cfg) + "/victim_curve.csv");
  csv << "# config " << hash_hex(config_hash(cfg)) << "\n";
  csv << "step,loss,eval_return\n";
  for (std::size_t i = 0; i < tl.steps.size(); ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", tl.steps[i], tl.losses[i],
                  tl.eval_returns[i]);
    csv << buf;
  }
  return path;
}

std::string cmd_train_diffusion(const ExperimentConfig& cfg) {
  validate(cfg);
  std::string path = denoiser_path(cfg);
  if (file_exists(path)) return path;

  env::ValueIterationResult vi = env::value_iteration(cfg.env);
  std::vector<diffusion::TrainItem> items;
  collect_windows(cfg.env, vi, cfg.dtrain.greedy_episodes, cfg.dtrain.data_seed_greedy,
                  cfg.dtrain.greedy_eps, items, nullptr);
  collect_windows(cfg.env, vi, cfg.dtrain.random_episodes, cfg.dtrain.data_seed_random, 1.0, items,
                  nullptr);
  if (items.empty()) throw ConfigError("diffusion data episodes produced no windows");

  std::vector<diffusion::TrainItem> held;
  std::vector<int> held_truth;
  collect_windows(cfg.env, vi, 10, 99, cfg.dtrain.greedy_eps, held, &held_truth);
  metrics::RenderIndex ridx = metrics::build_render_index(vi.space);

  diffusion::DenoiserModel m =
      diffusion::make_denoiser(cfg.noise, cfg.env.frame_size, diffusion::kHistoryLen,
                               cfg.dtrain.hidden1, cfg.dtrain.hidden2, cfg.dtrain.model_seed);
  nn::AdamState opt = nn::make_adam(m.net, cfg.dtrain.lr);
  std::mt19937_64 rng(cfg.dtrain.batch_seed);
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);

  std::ofstream csv(artifact_dir(cfg) + "/diffusion_curve.csv");
  csv << "# config " << hash_hex(config_hash(cfg)) << "\n";
  csv << "step,loss,projection_rate\n";

  const int eval_n = std::min<int>(cfg.dtrain.eval_windows, static_cast<int>(held.size()));
  double loss_avg = 0.0;
  for (int s = 1; s <= cfg.dtrain.steps; ++s) {
    if (s == cfg.dtrain.lr_drop1) opt.lr = 0.3 * cfg.dtrain.lr;
    if (s == cfg.dtrain.lr_drop2) opt.lr = 0.1 * cfg.dtrain.lr;
    if (s == cfg.dtrain.lr_drop3) opt.lr = 0.03 * cfg.dtrain.lr;
    std::vector<diffusion::TrainItem> batch;
    batch.reserve(cfg.dtrain.batch_size);
    for (int b = 0; b < cfg.dtrain.batch_size; ++b) batch.push_back(items[pick(rng)]);
    loss_avg += diffusion::train_step(m, opt, batch, cfg.dtrain.drop_rate, rng,
                                      cfg.dtrain.cond_noise)
                    .loss;
    if (s % cfg.dtrain.eval_every == 0 || s == cfg.dtrain.steps) {
      int hits = 0;
      for (int i = 0; i < eval_n; ++i) {
        env::Frame f = diffusion::sample_conditional(m, held[i].cond, 7000 + i);
        if (metrics::realism_distance(f, ridx).state_index == held_truth[i]) ++hits;
      }
      int window = (s % cfg.dtrain.eval_every == 0) ? cfg.dtrain.eval_every
                                                    : s % cfg.dtrain.eval_every;
      char buf[96];
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", s, loss_avg / window,
                    eval_n ? static_cast<double>(hits) / eval_n : 0.0);
      csv << buf;
      loss_avg = 0.0;
    }
  }
  diffusion::save_denoiser(m, path);
  return path;
}

std::string cmd_train_ae(const ExperimentConfig& cfg) {
  validate(cfg);
  std::string path = ae_path(cfg);
  if (file_exists(path)) return path;
  env::StateSpace space = env::enumerate_valid_states(cfg.env);
  std::vector<env::Frame> frames;
  frames.reserve(space.size());
  for (const auto& s : space.states) frames.push_back(env::render(cfg.env, s));
  realism::AEModel ae = realism::train_autoencoder(frames, cfg.ae, nn::mix_seed(cfg.train_seed, 3));
  realism::save_ae(ae, path);
  double err = 0.0;
  for (const auto& f : frames) err += realism::reconstruction_error(ae, f);
  std::ofstream csv(artifact_dir(cfg) + "/ae_curve.csv");
  csv << "# config " << hash_hex(config_hash(cfg)) << "\n";
  csv << "frames,mean_reconstruction_error\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu,%.17g\n", frames.size(), err / frames.size());
  csv << buf;
  return path;
}

TrainedStack load_stack(const ExperimentConfig& cfg) {
  for (const std::string& p : {victim_path(cfg), denoiser_path(cfg), ae_path(cfg)})
    if (!file_exists(p))
      throw ConfigError("missing checkpoint " + p + "; run the train commands first");
  TrainedStack st;
  st.q = victim::load_qmodel(victim_path(cfg));
  st.dm = diffusion::load_denoiser(denoiser_path(cfg));
  st.ae = realism::load_ae(ae_path(cfg));
  if (st.dm.frame_size != cfg.env.frame_size || st.ae.frame_size != cfg.env.frame_size)
    throw ConfigError("checkpoint frame size does not match the environment");
  return st;
}

std::vector<EvalWindow> heldout_windows(const ExperimentConfig& cfg, int episodes,
                                        std::uint64_t seed) {
  env::ValueIterationResult vi = env::value_iteration(cfg.env);
  std::vector<diffusion::TrainItem> items;
  std::vector<int> truth;
  collect_windows(cfg.env, vi, episodes, seed, cfg.dtrain.greedy_eps, items, &truth);
  std::vector<EvalWindow> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    out.push_back({std::move(items[i].cond), truth[i]});
  return out;
}

TrajectoryLog run_episode(const ExperimentConfig& cfg, const TrainedStack& stack,
                          const env::StateSpace& space, const metrics::RenderIndex& ridx,
                          const CellSpec& spec, std::uint64_t run_seed, int episode) {
  const env::EnvConfig& e = cfg.env;
  const int k = cfg.stealth_k;
  std::uint64_t ep_seed = nn::mix_seed(run_seed, static_cast<std::uint64_t>(episode));
  attacks::AttackConfig acfg = spec.attack;
  acfg.seed = nn::mix_seed(ep_seed, 1);
  std::uint64_t purify_base = nn::mix_seed(ep_seed, 2);
  double sp = cfg.sigma_partial < 0 ? defense::default_sigma_partial(cfg.noise)
                                    : cfg.sigma_partial;

  TrajectoryLog log;
  log.config = config_hash(cfg);
  log.attack = attacks::variant_name(acfg.variant);
  log.defense = cell_defense_name(spec.purifier);
  log.seed = run_seed;
  log.episode = episode;
  log.frame_size = e.frame_size;

  attacks::AttackState ast;
  std::deque<std::pair<env::Frame, int>> defender;  // raw observations + actions
  std::vector<env::Frame> obs_win, true_win;        // trailing faithfulness window
  env::EnvState s = env::reset(e);
  env::Frame prev_obs, prev_true;
  int prev_proj = -1;

  for (int t = 0; t < e.horizon; ++t) {
    env::Frame f_true = env::render(e, s);
    int s_idx = space.index_of(space.canonical(s));
    double omega = victim::importance_weight(stack.q, f_true);

    bool attacked = false;
    env::Frame obs = attacks::shift_step(ast, e, s, acfg, stack.dm, stack.q, &stack.ae, &attacked);

    env::Frame obs_final = obs;
    if (spec.purifier && static_cast<int>(defender.size()) >= diffusion::kHistoryLen) {
      diffusion::HistoryWindow w = attacks::window_from_pairs(defender);
      obs_final = defense::purify(stack.dm, obs, w, sp, nn::mix_seed(purify_base, t));
    }

    int a = static_cast<int>(victim::greedy_action(stack.q, obs_final));
    env::StepResult sr = env::step(e, s, static_cast<env::Action>(a));

    StepRecord r;
    r.t = t;
    r.true_state = s_idx;
    r.observed_frame = t;
    r.action = a;
    r.clean_action = static_cast<int>(victim::greedy_action(stack.q, f_true));
    r.reward = sr.reward;
    r.attacked = attacked;
    r.omega = omega;
    r.w1_adjacent = t > 0 ? safe_w1(obs, prev_obs) : 0.0;
    r.w1_vs_prev_true = t > 0 ? safe_w1(obs, prev_true) : 0.0;
    r.recon = realism::reconstruction_error(stack.ae, obs);
    r.ssim_vs_true = metrics::ssim(obs, f_true);
    metrics::Projection proj = metrics::realism_distance(obs, ridx);
    r.realism = proj.distance;
    r.semantics_changed = metrics::is_semantics_changing(obs, s_idx, ridx);
    r.history_aligned = t == 0 ? true : metrics::is_history_aligned(obs, prev_proj, space, ridx);
    r.l2_vs_true = std::sqrt((obs - f_true).square().sum());

    obs_win.push_back(obs);
    true_win.push_back(f_true);
    if (static_cast<int>(obs_win.size()) > k) {
      obs_win.erase(obs_win.begin());
      true_win.erase(true_win.begin());
    }
    r.faith = static_cast<int>(obs_win.size()) == k
                  ? metrics::faithfulness_score(obs_win, true_win)
                  : -1.0;

    attacks::push_executed(ast, f_true, obs, a);
    defender.emplace_back(obs, a);
    while (static_cast<int>(defender.size()) > diffusion::kHistoryLen) defender.pop_front();

    log.steps.push_back(r);
    log.frames.push_back(obs);
    prev_obs = obs;
    prev_true = f_true;
    prev_proj = proj.state_index;
    s = sr.next;
  }
  return log;
}

CellSummary summarize_cell(const std::string& attack, const std::string& defense,
                           const std::vector<TrajectoryLog>& logs) {
  CellSummary c;
  c.attack = attack;
  c.defense = defense;
  c.episodes = static_cast<int>(logs.size());

  std::vector<double> rewards, fracs;
  long long dev = 0, steps = 0, aligned = 0;
  // stealth pools: attacked steps when the cell attacked at all, else all steps
  long long pool_n = 0, sem = 0;
  double recon = 0, ssim = 0, l2 = 0;
  double w1a = 0, w1p = 0;
  long long w1n = 0;
  double faith = 0;
  long long faith_n = 0;
  bool any_attacked = false;
  for (const auto& log : logs)
    for (const auto& r : log.steps)
      if (r.attacked) any_attacked = true;

  for (const auto& log : logs) {
    double ret = 0;
    int att = 0;
    for (const auto& r : log.steps) {
      ret += r.reward;
      ++steps;
      if (r.action != r.clean_action) ++dev;
      if (r.attacked) ++att;
      if (r.history_aligned) ++aligned;
      if (r.t > 0) {
        w1a += r.w1_adjacent;
        w1p += r.w1_vs_prev_true;
        ++w1n;
      }
      if (r.faith >= 0) {
        faith += r.faith;
        ++faith_n;
      }
      if (!any_attacked || r.attacked) {
        recon += r.recon;
        ssim += r.ssim_vs_true;
        l2 += r.l2_vs_true;
        if (r.semantics_changed) ++sem;
        ++pool_n;
      }
    }
    rewards.push_back(ret);
    fracs.push_back(log.steps.empty() ? 0.0 : static_cast<double>(att) / log.steps.size());
  }
  c.reward_mean = mean_of(rewards);
  c.reward_std = sample_std(rewards);
  c.dev_pct = steps ? 100.0 * dev / steps : 0.0;
  c.attacked_frac = mean_of(fracs);
  c.recon_mean = pool_n ? recon / pool_n : 0.0;
  c.ssim_mean = pool_n ? ssim / pool_n : 0.0;
  c.l2_mean = pool_n ? l2 / pool_n : 0.0;
  c.sem_rate = pool_n ? static_cast<double>(sem) / pool_n : 0.0;
  c.w1_adj_mean = w1n ? w1a / w1n : 0.0;
  c.w1_prev_true_mean = w1n ? w1p / w1n : 0.0;
  c.align_rate = steps ? static_cast<double>(aligned) / steps : 0.0;
  c.faith_mean = faith_n ? faith / faith_n : 0.0;
  return c;
}

CellResult run_cell(const ExperimentConfig& cfg, const TrainedStack& stack,
                    const env::StateSpace& space, const metrics::RenderIndex& ridx,
                    const CellSpec& spec) {
  CellResult res;
  for (std::uint64_t seed : cfg.seeds)
    for (int e = 0; e < cfg.episodes_per_seed; ++e)
      res.logs.push_back(run_episode(cfg, stack, space, ridx, spec, seed, e));
  res.summary = summarize_cell(attacks::variant_name(spec.attack.variant),
                               cell_defense_name(spec.purifier), res.logs);
  return res;
}

namespace {

void write_summary_csv(const ExperimentConfig& cfg, const std::string& path,
                       const std::vector<CellSummary>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# config " << hash_hex(config_hash(cfg)) << "\n";
  out << "attack,defense,episodes,reward_mean,reward_std,dev_pct,attacked_frac,recon,"
         "w1_adj,w1_prev_true,ssim,l2,sem_rate,align_rate,faith\n";
  for (const auto& c : rows) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                  c.attack.c_str(), c.defense.c_str(), c.episodes, c.reward_mean, c.reward_std,
                  c.dev_pct, c.attacked_frac, c.recon_mean, c.w1_adj_mean, c.w1_prev_true_mean,
                  c.ssim_mean, c.l2_mean, c.sem_rate, c.align_rate, c.faith_mean);
    out << buf;
  }
}

}  // namespace

std::vector<CellSummary> cmd_attack_eval(const ExperimentConfig& cfg, const std::string& cell) {
  validate(cfg);
  TrainedStack stack = load_stack(cfg);
  env::StateSpace space = env::enumerate_valid_states(cfg.env);
  metrics::RenderIndex ridx = metrics::build_render_index(space);

  bool filtered = !cell.empty();
  attacks::Variant only_v = attacks::Variant::None;
  bool only_p = false;
  if (filtered) parse_cell(cell, only_v, only_p);

  const std::vector<attacks::Variant> grid = {
      attacks::Variant::None,   attacks::Variant::Pgd,    attacks::Variant::MinBest,
      attacks::Variant::Rotate, attacks::Variant::Transform, attacks::Variant::ShiftO,
      attacks::Variant::ShiftI};

  std::vector<CellSummary> rows;
  std::vector<std::pair<std::string, double>> l2_samples;
  for (attacks::Variant v : grid) {
    for (bool purifier : {false, true}) {
      if (filtered && (v != only_v || purifier != only_p)) continue;
      CellSpec spec;
      spec.attack = cfg.attack;
      spec.attack.variant = v;
      spec.purifier = purifier;
      CellResult res = run_cell(cfg, stack, space, ridx, spec);
      for (const auto& log : res.logs)
        save_log(log, episode_log_path(cfg, log.attack, log.defense, log.seed, log.episode));
      if (!purifier && (v == attacks::Variant::ShiftO || v == attacks::Variant::Pgd))
        for (const auto& log : res.logs)
          for (const auto& r : log.steps)
            if (r.attacked && l2_samples.size() < 4000)
              l2_samples.emplace_back(log.attack, r.l2_vs_true);
      rows.push_back(res.summary);
    }
  }

  std::string dir = artifact_dir(cfg);
  write_summary_csv(cfg, dir + (filtered ? "/summary_" + cell + ".csv" : "/summary.csv"), rows);

  if (!filtered && !l2_samples.empty()) {
    std::ofstream out(dir + "/l2_samples.csv");
    out << "# config " << hash_hex(config_hash(cfg)) << "\n";
    out << "attack,l2\n";
    for (const auto& [name, val] : l2_samples) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s,%.6g\n", name.c_str(), val);
      out << buf;
    }
  }

  if (!filtered && cfg.ablation) {
    std::ofstream out(dir + "/ablation.csv");
    out << "# config " << hash_hex(config_hash(cfg)) << "\n";
    out << "gamma2,use_realism,episodes,reward_mean,dev_pct,recon,l2\n";
    for (double g2 : {0.0, 1.0, 2.0, 4.0}) {
      for (bool realism_on : {true, false}) {
        CellSpec spec;
        spec.attack = cfg.attack;
        spec.attack.variant = attacks::Variant::ShiftO;
        spec.attack.gamma2 = g2;
        spec.attack.use_realism = realism_on;
        spec.purifier = false;
        CellResult res = run_cell(cfg, stack, space, ridx, spec);
        const CellSummary& c = res.summary;
        char buf[192];
        std::snprintf(buf, sizeof buf, "%.3g,%s,%d,%.6g,%.6g,%.6g,%.6g\n", g2,
                      realism_on ? "true" : "false", c.episodes, c.reward_mean, c.dev_pct,
                      c.recon_mean, c.l2_mean);
        out << buf;
      }
    }
  }
  return rows;
}

std::vector<DetectRow> cmd_detect_eval(const ExperimentConfig& cfg) {
  validate(cfg);
  std::string dir = logs_dir(cfg);
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".log")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());

  std::map<std::string, std::vector<TrajectoryLog>> by_attack;
  for (const auto& p : paths) {
    TrajectoryLog log = load_log(p);
    if (log.defense != "none") continue;  // detectors watch the raw stream
    by_attack[log.attack].push_back(std::move(log));
  }
  auto clean_it = by_attack.find("none");
  if (clean_it == by_attack.end())
    throw ConfigError("no clean (attack=none, defense=none) logs under " + dir +
                      "; run attack-eval first");

  // Reference stats come from adjacent true frames; the monitored analog swaps
  // the current frame for the observation, i.e. the w1_prev_true series. The
  // adjacent-observed series is logged too but does not separate dense-noise
  // attacks upward (their adjacent W1 sits below the clean median).
  std::vector<double> clean_series;
  for (const auto& log : clean_it->second)
    for (const auto& r : log.steps)
      if (r.t > 0) clean_series.push_back(r.w1_vs_prev_true);
  defense::CleanStats stats = defense::clean_stats(clean_series);

  std::vector<DetectRow> rows;
  const std::vector<std::string> order = {"none",      "pgd",     "minbest", "rotate",
                                          "transform", "shift-o", "shift-i"};
  for (const auto& name : order) {
    auto it = by_attack.find(name);
    if (it == by_attack.end()) continue;
    DetectRow row;
    row.attack = name;
    row.episodes = static_cast<int>(it->second.size());
    for (const auto& log : it->second) {
      std::vector<double> series;
      for (const auto& r : log.steps)
        if (r.t > 0) series.push_back(r.w1_vs_prev_true);
      std::vector<bool> flags = defense::mad_detect(series, stats, cfg.detector);
      if (std::find(flags.begin(), flags.end(), true) != flags.end()) ++row.mad_flagged;
      if (defense::cusum_detect(series, stats, cfg.detector).has_value()) ++row.cusum_flagged;
    }
    row.mad_detected = 2 * row.mad_flagged >= row.episodes;
    row.cusum_detected = 2 * row.cusum_flagged >= row.episodes;
    rows.push_back(row);
  }

  std::ofstream out(artifact_dir(cfg) + "/detect.csv");
  out << "# config " << hash_hex(config_hash(cfg)) << "\n";
  out << "attack,episodes,mad_flagged,cusum_flagged,mad_detected,cusum_detected\n";
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%s,%s\n", r.attack.c_str(), r.episodes,
                  r.mad_flagged, r.cusum_flagged, r.mad_detected ? "true" : "false",
                  r.cusum_detected ? "true" : "false");
    out << buf;
  }
  return rows;
}

}  // namespace shift::harness
