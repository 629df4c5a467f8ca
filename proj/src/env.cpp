#include "shift/env.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

namespace shift::env {

namespace {

int mod(int a, int m) {
  int r = a % m;
  return r < 0 ? r + m : r;
}

void validate_state(const EnvConfig& cfg, const EnvState& s) {
  if (s.agent_row < 0 || s.agent_row >= cfg.grid_size)
    throw StateError("agent_row out of range");
  if (static_cast<int>(s.car_cols.size()) != cfg.num_lanes)
    throw StateError("car_cols size mismatch");
  for (int c : s.car_cols)
    if (c < 0 || c >= cfg.grid_size) throw StateError("car column out of range");
  if (s.tick < 0) throw StateError("negative tick");
}

}  // namespace

void validate(const EnvConfig& cfg) {
  if (cfg.grid_size < 4) throw ConfigError("grid_size must be at least 4");
  if (cfg.num_lanes < 1) throw ConfigError("need at least one lane");
  if (static_cast<int>(cfg.lane_speeds.size()) != cfg.num_lanes)
    throw ConfigError("lane_speeds size must equal num_lanes");
  if (static_cast<int>(cfg.car_start_cols.size()) != cfg.num_lanes)
    throw ConfigError("car_start_cols size must equal num_lanes");
  for (int v : cfg.lane_speeds) {
    if (v == 0) throw ConfigError("lane speeds must be nonzero");
    if (std::abs(v) >= cfg.grid_size) throw ConfigError("|lane speed| must be < grid_size");
  }
  for (int c : cfg.car_start_cols)
    if (c < 0 || c >= cfg.grid_size) throw ConfigError("car start column out of range");
  if (cfg.car_width < 1 || cfg.car_width >= cfg.grid_size)
    throw ConfigError("car_width must be in [1, grid_size-1]");
  if (cfg.frame_size < cfg.grid_size) throw ConfigError("frame_size must be >= grid_size");
  if (cfg.horizon < 1) throw ConfigError("horizon must be positive");
  if (cfg.discount < 0.0 || cfg.discount >= 1.0)
    throw ConfigError("discount must be in [0, 1)");
  std::set<int> rows;
  for (int l = 0; l < cfg.num_lanes; ++l) {
    int r = lane_row(cfg, l);
    if (r <= 0 || r >= cfg.grid_size - 1)
      throw ConfigError("lane rows must leave the top and bottom rows free");
    rows.insert(r);
  }
  if (static_cast<int>(rows.size()) != cfg.num_lanes)
    throw ConfigError("lane rows collide; use a bigger grid or fewer lanes");
}

int lane_row(const EnvConfig& cfg, int l) {
  return (l + 1) * cfg.grid_size / (cfg.num_lanes + 1);
}

int agent_col(const EnvConfig& cfg) { return cfg.grid_size / 2; }

int phase_period(const EnvConfig& cfg) {
  int period = 1;
  for (int v : cfg.lane_speeds) {
    int p = cfg.grid_size / std::gcd(std::abs(v), cfg.grid_size);
    period = std::lcm(period, p);
  }
  return period;
}

std::vector<int> car_cols_at(const EnvConfig& cfg, int tick) {
  std::vector<int> cols(cfg.num_lanes);
  for (int l = 0; l < cfg.num_lanes; ++l)
    cols[l] = mod(cfg.car_start_cols[l] + cfg.lane_speeds[l] * tick, cfg.grid_size);
  return cols;
}

bool car_covers(const EnvConfig& cfg, int col, int c) {
  return mod(c - col, cfg.grid_size) < cfg.car_width;
}

EnvState reset(const EnvConfig& cfg) {
  validate(cfg);
  return EnvState{cfg.grid_size - 1, car_cols_at(cfg, 0), 0};
}

StepResult step(const EnvConfig& cfg, const EnvState& state, Action action) {
  validate(cfg);
  validate_state(cfg, state);
  StepResult out;
  out.next.tick = state.tick + 1;
  out.next.car_cols.resize(cfg.num_lanes);
  for (int l = 0; l < cfg.num_lanes; ++l)
    out.next.car_cols[l] = mod(state.car_cols[l] + cfg.lane_speeds[l], cfg.grid_size);

  int row = state.agent_row;
  if (action == Action::Up) row -= 1;
  if (action == Action::Down) row += 1;
  row = std::clamp(row, 0, cfg.grid_size - 1);

  bool collided = false;
  for (int l = 0; l < cfg.num_lanes && !collided; ++l)
    collided = row == lane_row(cfg, l) && car_covers(cfg, out.next.car_cols[l], agent_col(cfg));

  if (collided) {
    out.reward = -1.0;
    row = cfg.grid_size - 1;
  } else if (row == 0) {
    out.reward = 1.0;
    row = cfg.grid_size - 1;
  }
  out.next.agent_row = row;
  out.done = out.next.tick >= cfg.horizon;
  return out;
}

Frame render(const EnvConfig& cfg, const EnvState& state) {
  validate(cfg);
  validate_state(cfg, state);
  const int off = (cfg.frame_size - cfg.grid_size) / 2;
  Frame f = Frame::Zero(cfg.frame_size, cfg.frame_size);
  for (int l = 0; l < cfg.num_lanes; ++l) {
    int r = off + lane_row(cfg, l);
    for (int c = 0; c < cfg.grid_size; ++c) f(r, off + c) = 0.2;
    for (int k = 0; k < cfg.car_width; ++k)
      f(r, off + mod(state.car_cols[l] + k, cfg.grid_size)) = 0.6;
  }
  f(off + state.agent_row, off + agent_col(cfg)) = 1.0;
  return f;
}

EnvState unrender(const EnvConfig& cfg, const Frame& frame) {
  validate(cfg);
  if (frame.rows() != cfg.frame_size || frame.cols() != cfg.frame_size)
    throw ShapeError("frame has the wrong shape");
  const int off = (cfg.frame_size - cfg.grid_size) / 2;

  int agent_r = -1;
  int ones = 0;
  for (int i = 0; i < cfg.frame_size; ++i)
    for (int j = 0; j < cfg.frame_size; ++j)
      if (frame(i, j) == 1.0) {
        ++ones;
        agent_r = i;
        if (j != off + agent_col(cfg)) throw NotAValidRender("agent off its column");
      }
  if (ones != 1) throw NotAValidRender("expected exactly one agent pixel");
  agent_r -= off;
  if (agent_r < 0 || agent_r >= cfg.grid_size) throw NotAValidRender("agent outside grid");

  std::vector<int> cols(cfg.num_lanes, -1);
  for (int l = 0; l < cfg.num_lanes; ++l) {
    const int r = off + lane_row(cfg, l);
    std::vector<bool> covered(cfg.grid_size, false);
    int count = 0;
    for (int c = 0; c < cfg.grid_size; ++c)
      if (frame(r, off + c) == 0.6) {
        covered[c] = true;
        ++count;
      }
    if (count != cfg.car_width) throw NotAValidRender("car pixels missing or extra");
    for (int c = 0; c < cfg.grid_size; ++c) {
      if (!covered[c]) continue;
      bool lead = !covered[mod(c - 1, cfg.grid_size)];
      if (lead) {
        bool run = true;
        for (int k = 0; k < cfg.car_width; ++k) run = run && covered[mod(c + k, cfg.grid_size)];
        if (run) cols[l] = c;
      }
    }
    if (cols[l] < 0) throw NotAValidRender("car pixels are not a contiguous run");
  }

  const int period = phase_period(cfg);
  int phase = -1;
  for (int p = 0; p < period && phase < 0; ++p)
    if (car_cols_at(cfg, p) == cols) phase = p;
  if (phase < 0) throw NotAValidRender("car columns match no phase");

  EnvState s{agent_r, cols, phase};
  Frame check = render(cfg, s);
  if ((check != frame).any()) throw NotAValidRender("frame is not an exact render");
  return s;
}

int StateSpace::index_of(const EnvState& s) const {
  if (static_cast<int>(s.car_cols.size()) != cfg.num_lanes) return -1;
  if (s.agent_row < 0 || s.agent_row >= cfg.grid_size) return -1;
  int phase = mod(s.tick, period);
  if (car_cols_at(cfg, phase) != s.car_cols) return -1;
  return index_table[phase * cfg.grid_size + s.agent_row];
}

EnvState StateSpace::canonical(const EnvState& s) const {
  return EnvState{s.agent_row, s.car_cols, mod(s.tick, period)};
}

StateSpace enumerate_valid_states(const EnvConfig& cfg) {
  validate(cfg);
  StateSpace space;
  space.cfg = cfg;
  space.period = phase_period(cfg);
  if (static_cast<long long>(space.period) * cfg.grid_size > 1000000)
    throw CapacityError("state space exceeds the enumeration cap");

  std::vector<char> seen(space.period * cfg.grid_size, 0);
  std::deque<EnvState> queue;
  EnvState s0 = reset(cfg);
  seen[s0.tick * cfg.grid_size + s0.agent_row] = 1;
  queue.push_back(s0);
  while (!queue.empty()) {
    EnvState s = queue.front();
    queue.pop_front();
    space.states.push_back(s);
    for (int a = 0; a < kNumActions; ++a) {
      EnvState n = step(cfg, s, static_cast<Action>(a)).next;
      n.tick = mod(n.tick, space.period);
      int key = n.tick * cfg.grid_size + n.agent_row;
      if (!seen[key]) {
        seen[key] = 1;
        queue.push_back(n);
      }
    }
  }
  std::sort(space.states.begin(), space.states.end(), [](const EnvState& a, const EnvState& b) {
    return a.tick != b.tick ? a.tick < b.tick : a.agent_row < b.agent_row;
  });
  space.index_table.assign(space.period * cfg.grid_size, -1);
  for (int i = 0; i < space.size(); ++i)
    space.index_table[space.states[i].tick * cfg.grid_size + space.states[i].agent_row] = i;
  return space;
}

std::vector<EnvState> reachable_next(const StateSpace& space, const EnvState& state) {
  if (!space.contains(state)) throw StateError("state is not in the valid set");
  EnvState c = space.canonical(state);
  std::vector<EnvState> out;
  for (int a = 0; a < kNumActions; ++a) {
    EnvState n = space.canonical(step(space.cfg, c, static_cast<Action>(a)).next);
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  }
  return out;
}

ValueIterationResult value_iteration(const EnvConfig& cfg, double tol, int max_iterations) {
  ValueIterationResult res;
  res.space = enumerate_valid_states(cfg);
  const int n = res.space.size();
  const double g = cfg.discount;

  // Cache transitions once; the MDP is tiny and deterministic.
  Eigen::MatrixXd reward(n, kNumActions);
  Eigen::MatrixXi nxt(n, kNumActions);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < kNumActions; ++a) {
      StepResult r = step(cfg, res.space.states[i], static_cast<Action>(a));
      reward(i, a) = r.reward;
      int j = res.space.index_of(res.space.canonical(r.next));
      if (j < 0) throw StateError("state space is not closed under step");
      nxt(i, a) = j;
    }

  res.q = Eigen::MatrixXd::Zero(n, kNumActions);
  Eigen::VectorXd vmax = Eigen::VectorXd::Zero(n);
  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    double diff = 0.0;
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < kNumActions; ++a) {
        double qn = reward(i, a) + g * vmax(nxt(i, a));
        diff = std::max(diff, std::abs(qn - res.q(i, a)));
        res.q(i, a) = qn;
      }
    for (int i = 0; i < n; ++i) vmax(i) = res.q.row(i).maxCoeff();
    if (diff < tol) break;
  }
  if (res.iterations >= max_iterations)
    throw ConvergenceError("value iteration hit the iteration cap");
  res.greedy_return = greedy_rollout_return(cfg, res.space, res.q);
  return res;
}

double greedy_rollout_return(const EnvConfig& cfg, const StateSpace& space,
                             const Eigen::MatrixXd& q) {
  EnvState s = reset(cfg);
  double total = 0.0;
  for (int t = 0; t < cfg.horizon; ++t) {
    int i = space.index_of(space.canonical(s));
    if (i < 0) throw StateError("rollout left the valid set");
    int best = 0;
    q.row(i).maxCoeff(&best);
    StepResult r = step(cfg, s, static_cast<Action>(best));
    total += r.reward;
    s = r.next;
  }
  return total;
}

Eigen::VectorXd flatten(const Frame& f) {
  Eigen::VectorXd v(f.size());
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) v(i * f.cols() + j) = f(i, j);
  return v;
}

Frame unflatten(const Eigen::VectorXd& v, int frame_size) {
  if (v.size() != static_cast<Eigen::Index>(frame_size) * frame_size)
    throw ShapeError("vector size does not match frame size");
  Frame f(frame_size, frame_size);
  for (int i = 0; i < frame_size; ++i)
    for (int j = 0; j < frame_size; ++j) f(i, j) = v(i * frame_size + j);
  return f;
}

}  // namespace shift::env
