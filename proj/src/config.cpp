#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "shift/harness.hpp"

namespace shift::harness {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

long long parse_ll(const std::string& key, const std::string& v) {
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config key " + key + ": not an integer: '" + v + "'");
  return x;
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_ll(key, v));
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config key " + key + ": not an unsigned integer: '" + v + "'");
  return x;
}

double parse_dbl(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config key " + key + ": not a number: '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key " + key + ": not a bool: '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F one) {
  std::vector<T> out;
  for (const auto& tok : split_list(v)) out.push_back(one(key, tok));
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

void emit_training(std::ostringstream& o, const ExperimentConfig& c) {
  o << "env.grid_size = " << c.env.grid_size << "\n";
  o << "env.num_lanes = " << c.env.num_lanes << "\n";
  o << "env.lane_speeds = " << join(c.env.lane_speeds) << "\n";
  o << "env.car_start_cols = " << join(c.env.car_start_cols) << "\n";
  o << "env.car_width = " << c.env.car_width << "\n";
  o << "env.frame_size = " << c.env.frame_size << "\n";
  o << "env.horizon = " << c.env.horizon << "\n";
  o << "env.discount = " << fmt(c.env.discount) << "\n";
  o << "victim.total_steps = " << c.victim.total_steps << "\n";
  o << "victim.replay_capacity = " << c.victim.replay_capacity << "\n";
  o << "victim.batch_size = " << c.victim.batch_size << "\n";
  o << "victim.learn_start = " << c.victim.learn_start << "\n";
  o << "victim.target_sync = " << c.victim.target_sync << "\n";
  o << "victim.lr = " << fmt(c.victim.lr) << "\n";
  o << "victim.eps_start = " << fmt(c.victim.eps_start) << "\n";
  o << "victim.eps_end = " << fmt(c.victim.eps_end) << "\n";
  o << "victim.eps_decay_steps = " << c.victim.eps_decay_steps << "\n";
  o << "victim.eval_every = " << c.victim.eval_every << "\n";
  o << "victim.eval_episodes = " << c.victim.eval_episodes << "\n";
  o << "victim.pass_fraction = " << fmt(c.victim.pass_fraction) << "\n";
  o << "victim.hidden1 = " << c.victim.hidden1 << "\n";
  o << "victim.hidden2 = " << c.victim.hidden2 << "\n";
  o << "noise.sigma_data = " << fmt(c.noise.sigma_data) << "\n";
  o << "noise.p_mean = " << fmt(c.noise.p_mean) << "\n";
  o << "noise.p_std = " << fmt(c.noise.p_std) << "\n";
  o << "noise.steps = " << c.noise.steps << "\n";
  o << "noise.sigma_min = " << fmt(c.noise.sigma_min) << "\n";
  o << "noise.sigma_max = " << fmt(c.noise.sigma_max) << "\n";
  o << "diffusion.steps = " << c.dtrain.steps << "\n";
  o << "diffusion.batch_size = " << c.dtrain.batch_size << "\n";
  o << "diffusion.lr = " << fmt(c.dtrain.lr) << "\n";
  o << "diffusion.lr_drop1 = " << c.dtrain.lr_drop1 << "\n";
  o << "diffusion.lr_drop2 = " << c.dtrain.lr_drop2 << "\n";
  o << "diffusion.lr_drop3 = " << c.dtrain.lr_drop3 << "\n";
  o << "diffusion.hidden1 = " << c.dtrain.hidden1 << "\n";
  o << "diffusion.hidden2 = " << c.dtrain.hidden2 << "\n";
  o << "diffusion.greedy_episodes = " << c.dtrain.greedy_episodes << "\n";
  o << "diffusion.random_episodes = " << c.dtrain.random_episodes << "\n";
  o << "diffusion.greedy_eps = " << fmt(c.dtrain.greedy_eps) << "\n";
  o << "diffusion.drop_rate = " << fmt(c.dtrain.drop_rate) << "\n";
  o << "diffusion.cond_noise = " << fmt(c.dtrain.cond_noise) << "\n";
  o << "diffusion.eval_every = " << c.dtrain.eval_every << "\n";
  o << "diffusion.eval_windows = " << c.dtrain.eval_windows << "\n";
  o << "diffusion.data_seed_greedy = " << c.dtrain.data_seed_greedy << "\n";
  o << "diffusion.data_seed_random = " << c.dtrain.data_seed_random << "\n";
  o << "diffusion.model_seed = " << c.dtrain.model_seed << "\n";
  o << "diffusion.batch_seed = " << c.dtrain.batch_seed << "\n";
  o << "ae.steps = " << c.ae.steps << "\n";
  o << "ae.batch_size = " << c.ae.batch_size << "\n";
  o << "ae.lr = " << fmt(c.ae.lr) << "\n";
  o << "ae.hidden = " << c.ae.hidden << "\n";
  o << "ae.bottleneck = " << c.ae.bottleneck << "\n";
  o << "ae.holdout_fraction = " << fmt(c.ae.holdout_fraction) << "\n";
  o << "ae.eval_every = " << c.ae.eval_every << "\n";
  o << "ae.pass_error = " << fmt(c.ae.pass_error) << "\n";
  o << "run.train_seed = " << c.train_seed << "\n";
}

void emit_eval(std::ostringstream& o, const ExperimentConfig& c) {
  o << "attack.variant = " << attacks::variant_name(c.attack.variant) << "\n";
  o << "attack.xi = " << fmt(c.attack.xi) << "\n";
  o << "attack.gamma2 = " << fmt(c.attack.gamma2) << "\n";
  o << "attack.epsilon = " << fmt(c.attack.epsilon) << "\n";
  o << "attack.iters = " << c.attack.iters << "\n";
  o << "attack.degrees = " << fmt(c.attack.degrees) << "\n";
  o << "attack.dx = " << c.attack.dx << "\n";
  o << "attack.dy = " << c.attack.dy << "\n";
  o << "attack.use_realism = " << (c.attack.use_realism ? "true" : "false") << "\n";
  o << "detector.mad_threshold = " << fmt(c.detector.mad_threshold) << "\n";
  o << "detector.cusum_drift = " << fmt(c.detector.cusum_drift) << "\n";
  o << "detector.cusum_threshold = " << fmt(c.detector.cusum_threshold) << "\n";
  o << "detector.window = " << c.detector.window << "\n";
  o << "stealth.k = " << c.stealth_k << "\n";
  o << "run.seeds = " << join(c.seeds) << "\n";
  o << "run.episodes_per_seed = " << c.episodes_per_seed << "\n";
  o << "run.sigma_partial = " << fmt(c.sigma_partial) << "\n";
  o << "run.ablation = " << (c.ablation ? "true" : "false") << "\n";
  o << "run.out_dir = " << c.out_dir << "\n";
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  env::validate(cfg.env);
  diffusion::validate(cfg.noise);
  attacks::validate(cfg.attack);
  defense::validate(cfg.detector);
  if (cfg.seeds.empty()) throw ConfigError("run.seeds must be nonempty");
  if (cfg.episodes_per_seed <= 0) throw ConfigError("run.episodes_per_seed must be positive");
  if (cfg.stealth_k <= 0) throw ConfigError("stealth.k must be positive");
  if (cfg.sigma_partial > cfg.noise.sigma_max)
    throw ConfigError("run.sigma_partial exceeds noise.sigma_max");
  if (cfg.dtrain.steps <= 0 || cfg.dtrain.batch_size <= 0)
    throw ConfigError("diffusion training steps and batch size must be positive");
  if (cfg.dtrain.hidden1 <= 0 || cfg.dtrain.hidden2 <= 0)
    throw ConfigError("diffusion hidden widths must be positive");
  if (cfg.dtrain.greedy_episodes + cfg.dtrain.random_episodes <= 0)
    throw ConfigError("diffusion training needs at least one data episode");
  if (cfg.dtrain.greedy_eps < 0 || cfg.dtrain.greedy_eps > 1)
    throw ConfigError("diffusion.greedy_eps must lie in [0,1]");
  if (cfg.dtrain.drop_rate < 0 || cfg.dtrain.drop_rate > 1)
    throw ConfigError("diffusion.drop_rate must lie in [0,1]");
  if (cfg.dtrain.cond_noise < 0)
    throw ConfigError("diffusion.cond_noise must be nonnegative");
  if (cfg.dtrain.eval_every <= 0 || cfg.dtrain.eval_windows < 0)
    throw ConfigError("diffusion eval cadence must be positive");
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("duplicate config key: " + key);
    kv[key] = val;
  }

  ExperimentConfig c;
  auto geti = [&](const char* k, int& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = parse_int(k, it->second), kv.erase(it);
  };
  auto getd = [&](const char* k, double& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = parse_dbl(k, it->second), kv.erase(it);
  };
  auto getb = [&](const char* k, bool& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = parse_bool(k, it->second), kv.erase(it);
  };
  auto getu = [&](const char* k, std::uint64_t& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = parse_u64(k, it->second), kv.erase(it);
  };
  auto gets = [&](const char* k, std::string& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = it->second, kv.erase(it);
  };

  geti("env.grid_size", c.env.grid_size);
  geti("env.num_lanes", c.env.num_lanes);
  if (auto it = kv.find("env.lane_speeds"); it != kv.end()) {
    c.env.lane_speeds = parse_list<int>("env.lane_speeds", it->second, parse_int);
    kv.erase(it);
  }
  if (auto it = kv.find("env.car_start_cols"); it != kv.end()) {
    c.env.car_start_cols = parse_list<int>("env.car_start_cols", it->second, parse_int);
    kv.erase(it);
  }
  geti("env.car_width", c.env.car_width);
  geti("env.frame_size", c.env.frame_size);
  geti("env.horizon", c.env.horizon);
  getd("env.discount", c.env.discount);

  geti("victim.total_steps", c.victim.total_steps);
  geti("victim.replay_capacity", c.victim.replay_capacity);
  geti("victim.batch_size", c.victim.batch_size);
  geti("victim.learn_start", c.victim.learn_start);
  geti("victim.target_sync", c.victim.target_sync);
  getd("victim.lr", c.victim.lr);
  getd("victim.eps_start", c.victim.eps_start);
  getd("victim.eps_end", c.victim.eps_end);
  geti("victim.eps_decay_steps", c.victim.eps_decay_steps);
  geti("victim.eval_every", c.victim.eval_every);
  geti("victim.eval_episodes", c.victim.eval_episodes);
  getd("victim.pass_fraction", c.victim.pass_fraction);
  geti("victim.hidden1", c.victim.hidden1);
  geti("victim.hidden2", c.victim.hidden2);

  getd("noise.sigma_data", c.noise.sigma_data);
  getd("noise.p_mean", c.noise.p_mean);
  getd("noise.p_std", c.noise.p_std);
  geti("noise.steps", c.noise.steps);
  getd("noise.sigma_min", c.noise.sigma_min);
  getd("noise.sigma_max", c.noise.sigma_max);

  geti("diffusion.steps", c.dtrain.steps);
  geti("diffusion.batch_size", c.dtrain.batch_size);
  getd("diffusion.lr", c.dtrain.lr);
  geti("diffusion.lr_drop1", c.dtrain.lr_drop1);
  geti("diffusion.lr_drop2", c.dtrain.lr_drop2);
  geti("diffusion.lr_drop3", c.dtrain.lr_drop3);
  geti("diffusion.hidden1", c.dtrain.hidden1);
  geti("diffusion.hidden2", c.dtrain.hidden2);
  geti("diffusion.greedy_episodes", c.dtrain.greedy_episodes);
  geti("diffusion.random_episodes", c.dtrain.random_episodes);
  getd("diffusion.greedy_eps", c.dtrain.greedy_eps);
  getd("diffusion.drop_rate", c.dtrain.drop_rate);
  getd("diffusion.cond_noise", c.dtrain.cond_noise);
  geti("diffusion.eval_every", c.dtrain.eval_every);
  geti("diffusion.eval_windows", c.dtrain.eval_windows);
  getu("diffusion.data_seed_greedy", c.dtrain.data_seed_greedy);
  getu("diffusion.data_seed_random", c.dtrain.data_seed_random);
  getu("diffusion.model_seed", c.dtrain.model_seed);
  getu("diffusion.batch_seed", c.dtrain.batch_seed);

  geti("ae.steps", c.ae.steps);
  geti("ae.batch_size", c.ae.batch_size);
  getd("ae.lr", c.ae.lr);
  geti("ae.hidden", c.ae.hidden);
  geti("ae.bottleneck", c.ae.bottleneck);
  getd("ae.holdout_fraction", c.ae.holdout_fraction);
  geti("ae.eval_every", c.ae.eval_every);
  getd("ae.pass_error", c.ae.pass_error);

  if (auto it = kv.find("attack.variant"); it != kv.end()) {
    c.attack.variant = attacks::variant_from_name(it->second);
    kv.erase(it);
  }
  getd("attack.xi", c.attack.xi);
  getd("attack.gamma2", c.attack.gamma2);
  getd("attack.epsilon", c.attack.epsilon);
  geti("attack.iters", c.attack.iters);
  getd("attack.degrees", c.attack.degrees);
  geti("attack.dx", c.attack.dx);
  geti("attack.dy", c.attack.dy);
  getb("attack.use_realism", c.attack.use_realism);

  getd("detector.mad_threshold", c.detector.mad_threshold);
  getd("detector.cusum_drift", c.detector.cusum_drift);
  getd("detector.cusum_threshold", c.detector.cusum_threshold);
  geti("detector.window", c.detector.window);

  geti("stealth.k", c.stealth_k);

  getu("run.train_seed", c.train_seed);
  if (auto it = kv.find("run.seeds"); it != kv.end()) {
    c.seeds = parse_list<std::uint64_t>("run.seeds", it->second, parse_u64);
    kv.erase(it);
  }
  geti("run.episodes_per_seed", c.episodes_per_seed);
  getd("run.sigma_partial", c.sigma_partial);
  getb("run.ablation", c.ablation);
  gets("run.out_dir", c.out_dir);

  if (!kv.empty()) throw ConfigError("unknown config key: " + kv.begin()->first);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_training_config(const ExperimentConfig& cfg) {
  std::ostringstream o;
  emit_training(o, cfg);
  return o.str();
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream o;
  emit_training(o, cfg);
  emit_eval(o, cfg);
  return o.str();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  // out_dir is pure plumbing; moving artifacts must not change provenance
  ExperimentConfig c = cfg;
  c.out_dir.clear();
  return fnv1a(serialize_config(c));
}

std::uint64_t train_hash(const ExperimentConfig& cfg) {
  return fnv1a(serialize_training_config(cfg));
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace shift::harness
