#include "shift/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "shift/nn.hpp"

namespace shift::attacks {

namespace {

int greedy_of(const victim::QModel& q, const Eigen::VectorXd& flat) {
  Eigen::VectorXd qv = nn::forward1(q.net, flat);
  int a = 0;
  for (int j = 1; j < env::kNumActions; ++j)
    if (qv(j) > qv(a)) a = j;
  return a;
}

Eigen::VectorXd clamp_linf(const Eigen::VectorXd& x, const Eigen::VectorXd& center, double eps) {
  Eigen::ArrayXd a = x.array().min(center.array() + eps).max(center.array() - eps);
  return a.max(0.0).min(1.0).matrix();
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::None: return "none";
    case Variant::ShiftO: return "shift-o";
    case Variant::ShiftI: return "shift-i";
    case Variant::Pgd: return "pgd";
    case Variant::MinBest: return "minbest";
    case Variant::Rotate: return "rotate";
    case Variant::Transform: return "transform";
  }
  throw DomainError("unknown attack variant");
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::None, Variant::ShiftO, Variant::ShiftI, Variant::Pgd,
                    Variant::MinBest, Variant::Rotate, Variant::Transform})
    if (name == variant_name(v)) return v;
  throw FormatError("unknown attack variant: " + name);
}

void validate(const AttackConfig& cfg) {
  if (cfg.xi < 0.0 || cfg.xi > 1.0) throw ConfigError("xi must lie in [0,1]");
  if (cfg.gamma2 < 0.0) throw ConfigError("gamma2 must be nonnegative");
  if (cfg.epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
  if (cfg.iters < 0) throw ConfigError("iters must be nonnegative");
  if (std::abs(cfg.degrees) > 45.0) throw ConfigError("rotation limited to 45 degrees");
}

bool should_attack(AttackState& st, double omega, int t, double xi) {
  if (xi < 0.0 || xi > 1.0) throw DomainError("xi must lie in [0,1]");
  st.importance_history.push_back(omega);
  if (t < diffusion::kHistoryLen) return false;  // conditioning window still cold
  if (!(static_cast<double>(st.attacks_so_far) < t * xi)) return false;
  std::vector<double> s = st.importance_history;
  std::sort(s.begin(), s.end());
  int n = static_cast<int>(s.size());
  int idx = static_cast<int>(std::floor((1.0 - xi) * n));
  idx = std::clamp(idx, 0, n - 1);
  return omega >= s[idx];
}

diffusion::HistoryWindow window_from_pairs(const std::deque<std::pair<env::Frame, int>>& pairs) {
  if (static_cast<int>(pairs.size()) < diffusion::kHistoryLen)
    throw WarmupError("history window is cold");
  diffusion::HistoryWindow w;
  std::size_t start = pairs.size() - diffusion::kHistoryLen;
  for (std::size_t i = start; i < pairs.size(); ++i) {
    w.frames.push_back(pairs[i].first);
    w.actions.push_back(pairs[i].second);
  }
  return w;
}

void push_executed(AttackState& st, const env::Frame& true_frame, const env::Frame& observed,
                   int action) {
  st.true_pairs.emplace_back(true_frame, action);
  st.imagined_pairs.emplace_back(observed, action);
  while (static_cast<int>(st.true_pairs.size()) > diffusion::kHistoryLen) st.true_pairs.pop_front();
  while (static_cast<int>(st.imagined_pairs.size()) > diffusion::kHistoryLen)
    st.imagined_pairs.pop_front();
}

env::Frame shift_step(AttackState& st, const env::EnvConfig& ecfg, const env::EnvState& true_state,
                      const AttackConfig& cfg, const diffusion::DenoiserModel& m,
                      const victim::QModel& q, const realism::AEModel* ae, bool* attacked) {
  validate(cfg);
  env::Frame true_frame = env::render(ecfg, true_state);
  double omega = victim::importance_weight(q, true_frame);
  bool attack = should_attack(st, omega, st.t, cfg.xi);
  std::uint64_t step_seed = nn::mix_seed(cfg.seed, static_cast<std::uint64_t>(st.t));
  ++st.t;

  const realism::AEModel* guide_ae = cfg.use_realism ? ae : nullptr;
  env::Frame obs = true_frame;
  switch (cfg.variant) {
    case Variant::None:
      attack = false;
      break;
    case Variant::ShiftO:
      if (attack) {
        diffusion::HistoryWindow w = window_from_pairs(st.true_pairs);
        obs = diffusion::guided_sample(m, w, q, true_frame, cfg.gamma2, guide_ae, step_seed);
      }
      break;
    case Variant::ShiftI: {
      if (static_cast<int>(st.imagined_pairs.size()) < diffusion::kHistoryLen) {
        attack = false;  // cold start passes the true frame through
        break;
      }
      diffusion::HistoryWindow w = window_from_pairs(st.imagined_pairs);
      if (attack) {
        w.actions.back() = diffusion::kNullAction;
        obs = diffusion::guided_sample(m, w, q, true_frame, cfg.gamma2, guide_ae, step_seed);
      } else {
        // Off steps still come from the model, conditioned on the imagined
        // past and the action the victim really took.
        obs = diffusion::sample_conditional(m, w, step_seed);
      }
      break;
    }
    case Variant::Pgd:
      if (attack) obs = pgd_attack(q, true_frame, cfg.epsilon, cfg.iters);
      break;
    case Variant::MinBest:
      if (attack) obs = minbest_attack(q, true_frame, cfg.epsilon, cfg.iters);
      break;
    case Variant::Rotate:
      if (attack) obs = rotate_attack(true_frame, cfg.degrees);
      break;
    case Variant::Transform:
      if (attack) obs = transform_attack(true_frame, cfg.dx, cfg.dy);
      break;
  }
  if (attack) ++st.attacks_so_far;
  if (attacked) *attacked = attack;
  return obs;
}

env::Frame pgd_attack(const victim::QModel& q, const env::Frame& frame, double epsilon,
                      int iters) {
  if (epsilon < 0.0) throw DomainError("epsilon must be nonnegative");
  if (iters < 0) throw DomainError("iters must be nonnegative");
  Eigen::VectorXd x0 = env::flatten(frame);
  if (q.net.input_dim() != x0.size()) throw ShapeError("Q network does not match frame size");
  if (epsilon == 0.0 || iters == 0) return frame;

  const int a0 = greedy_of(q, x0);
  const double step = epsilon / 4.0;
  Eigen::VectorXd x = x0;
  for (int it = 0; it < iters; ++it) {
    auto ce = [&](const Eigen::MatrixXd& y, Eigen::MatrixXd& dldy) {
      Eigen::VectorXd z = y.col(0);
      Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
      Eigen::VectorXd p = (e / e.sum()).matrix();
      dldy = p;
      dldy(a0, 0) -= 1.0;
      return -std::log(std::max(p(a0), 1e-300));
    };
    nn::Gradients g = nn::grad(q.net, x, ce);
    x = clamp_linf(x + step * g.dx.col(0).array().sign().matrix(), x0, epsilon);
  }
  return env::unflatten(x, static_cast<int>(frame.rows()));
}

env::Frame minbest_attack(const victim::QModel& q, const env::Frame& frame, double epsilon,
                          int iters) {
  if (epsilon < 0.0) throw DomainError("epsilon must be nonnegative");
  if (iters < 0) throw DomainError("iters must be nonnegative");
  Eigen::VectorXd x0 = env::flatten(frame);
  if (q.net.input_dim() != x0.size()) throw ShapeError("Q network does not match frame size");
  if (epsilon == 0.0 || iters == 0) return frame;

  const int a0 = greedy_of(q, x0);
  const double step = epsilon / 4.0;
  Eigen::VectorXd x = x0;
  for (int it = 0; it < iters; ++it) {
    auto best_q = [&](const Eigen::MatrixXd& y, Eigen::MatrixXd& dldy) {
      dldy.setZero(y.rows(), y.cols());
      dldy(a0, 0) = 1.0;
      return y(a0, 0);
    };
    nn::Gradients g = nn::grad(q.net, x, best_q);
    x = clamp_linf(x - step * g.dx.col(0).array().sign().matrix(), x0, epsilon);
  }
  return env::unflatten(x, static_cast<int>(frame.rows()));
}

env::Frame rotate_attack(const env::Frame& frame, double degrees) {
  if (std::abs(degrees) > 45.0) throw DomainError("rotation limited to 45 degrees");
  if (frame.rows() != frame.cols()) throw ShapeError("rotation expects a square frame");
  const int F = static_cast<int>(frame.rows());
  const double th = degrees * M_PI / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const double ctr = (F - 1) / 2.0;

  env::Frame out = env::Frame::Zero(F, F);
  for (int i = 0; i < F; ++i) {
    for (int j = 0; j < F; ++j) {
      // inverse-map the output pixel into the source frame
      double u = j - ctr, v = i - ctr;
      double sc = ctr + c * u + s * v;
      double sr = ctr - s * u + c * v;
      int r0 = static_cast<int>(std::floor(sr));
      int c0 = static_cast<int>(std::floor(sc));
      double fr = sr - r0, fc = sc - c0;
      double acc = 0.0;
      for (int di = 0; di < 2; ++di) {
        for (int dj = 0; dj < 2; ++dj) {
          int r = r0 + di, cc2 = c0 + dj;
          if (r < 0 || r >= F || cc2 < 0 || cc2 >= F) continue;
          double w = (di ? fr : 1.0 - fr) * (dj ? fc : 1.0 - fc);
          acc += w * frame(r, cc2);
        }
      }
      out(i, j) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

env::Frame transform_attack(const env::Frame& frame, int dx, int dy) {
  const int R = static_cast<int>(frame.rows());
  const int C = static_cast<int>(frame.cols());
  if (std::abs(dx) >= C || std::abs(dy) >= R) throw DomainError("shift exceeds frame size");
  env::Frame out = env::Frame::Zero(R, C);
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      int si = i - dy, sj = j - dx;
      if (si >= 0 && si < R && sj >= 0 && sj < C) out(i, j) = frame(si, sj);
    }
  }
  return out;
}

}  // namespace shift::attacks
