#include "shift/victim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace shift::victim {

namespace {

Eigen::VectorXd q_of_flat(const QModel& q, const Eigen::VectorXd& x) {
  if (x.size() != q.net.input_dim()) throw ShapeError("frame does not match Q network input");
  return nn::forward1(q.net, x);
}

int argmax_low_tie(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

}  // namespace

Eigen::VectorXd q_values(const QModel& q, const env::Frame& frame) {
  return q_of_flat(q, env::flatten(frame));
}

env::Action greedy_action(const QModel& q, const env::Frame& frame) {
  return static_cast<env::Action>(argmax_low_tie(q_values(q, frame)));
}

double importance_weight(const QModel& q, const env::Frame& frame) {
  Eigen::VectorXd v = q_values(q, frame);
  return v.maxCoeff() - v.minCoeff();
}

double evaluate_greedy(const env::EnvConfig& cfg, const QModel& q, int episodes) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env::EnvState s = env::reset(cfg);
    bool done = false;
    while (!done) {
      env::Action a = greedy_action(q, env::render(cfg, s));
      env::StepResult r = env::step(cfg, s, a);
      total += r.reward;
      s = r.next;
      done = r.done;
    }
  }
  return total / episodes;
}

QModel train_dqn(const env::EnvConfig& cfg, const DqnHyper& hyper, std::uint64_t seed,
                 TrainLog* log) {
  env::validate(cfg);
  if (hyper.total_steps <= 0 || hyper.batch_size <= 0 || hyper.replay_capacity <= 0)
    throw ConfigError("nonpositive DQN budget");

  env::ValueIterationResult vi = env::value_iteration(cfg);
  const env::StateSpace& space = vi.space;
  const double target_return = hyper.pass_fraction * vi.greedy_return;
  const int F = cfg.frame_size;
  const int in_dim = F * F;

  // Every reachable observation, pre-rendered once; replay stores indices.
  Eigen::MatrixXd renders(in_dim, space.size());
  for (int i = 0; i < space.size(); ++i)
    renders.col(i) = env::flatten(env::render(cfg, space.states[i]));

  std::mt19937_64 rng(seed);
  QModel model;
  model.net = nn::make_mlp({{in_dim, hyper.hidden1, nn::Activation::SiLU},
                            {hyper.hidden1, hyper.hidden2, nn::Activation::SiLU},
                            {hyper.hidden2, env::kNumActions, nn::Activation::Identity}},
                           rng());
  nn::Mlp target = model.net;
  nn::AdamState opt = nn::make_adam(model.net, hyper.lr);

  struct Transition {
    int state, next;
    int action;
    double reward;
  };
  std::vector<Transition> replay;
  replay.reserve(hyper.replay_capacity);
  std::size_t write_pos = 0;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, env::kNumActions - 1);

  env::EnvState s = env::reset(cfg);
  int s_idx = space.index_of(space.canonical(s));
  double loss_accum = 0.0;
  long loss_count = 0;
  long updates = 0;
  std::vector<double> eval_curve;

  auto record = [&](int step, double eval) {
    if (!log) return;
    log->steps.push_back(step);
    log->losses.push_back(loss_count > 0 ? loss_accum / loss_count : 0.0);
    log->eval_returns.push_back(eval);
  };

  for (int step = 1; step <= hyper.total_steps; ++step) {
    double frac = std::min(1.0, static_cast<double>(step) / hyper.eps_decay_steps);
    double eps = hyper.eps_start + frac * (hyper.eps_end - hyper.eps_start);

    int a;
    if (unit(rng) < eps) {
      a = random_action(rng);
    } else {
      a = argmax_low_tie(nn::forward1(model.net, renders.col(s_idx)));
    }

    env::StepResult r = env::step(cfg, s, static_cast<env::Action>(a));
    int next_idx = space.index_of(space.canonical(r.next));

    Transition t{s_idx, next_idx, a, r.reward};
    if (static_cast<int>(replay.size()) < hyper.replay_capacity) {
      replay.push_back(t);
    } else {
      replay[write_pos] = t;
      write_pos = (write_pos + 1) % replay.size();
    }

    s = r.done ? env::reset(cfg) : r.next;
    s_idx = space.index_of(space.canonical(s));

    if (static_cast<int>(replay.size()) >= hyper.learn_start) {
      std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
      Eigen::MatrixXd x(in_dim, hyper.batch_size);
      Eigen::MatrixXd nx(in_dim, hyper.batch_size);
      std::vector<int> acts(hyper.batch_size);
      Eigen::VectorXd rew(hyper.batch_size);
      for (int b = 0; b < hyper.batch_size; ++b) {
        const Transition& tr = replay[pick(rng)];
        x.col(b) = renders.col(tr.state);
        nx.col(b) = renders.col(tr.next);
        acts[b] = tr.action;
        rew(b) = tr.reward;
      }
      // Episodes end only by truncation, so every transition bootstraps.
      Eigen::MatrixXd qn = nn::forward(target, nx);
      Eigen::VectorXd y = rew + cfg.discount * qn.colwise().maxCoeff().transpose();

      auto td_loss = [&](const Eigen::MatrixXd& out, Eigen::MatrixXd& dldy) {
        dldy.setZero(out.rows(), out.cols());
        double l = 0.0;
        for (int b = 0; b < out.cols(); ++b) {
          double d = out(acts[b], b) - y(b);
          l += d * d;
          dldy(acts[b], b) = 2.0 * d / out.cols();
        }
        return l / out.cols();
      };
      nn::Gradients g = nn::grad(model.net, x, td_loss);
      nn::adam_step(model.net, opt, g);
      loss_accum += g.loss;
      ++loss_count;
      ++updates;
      if (updates % hyper.target_sync == 0) target = model.net;
    }

    if (step % hyper.eval_every == 0 && static_cast<int>(replay.size()) >= hyper.learn_start) {
      double ret = evaluate_greedy(cfg, model, hyper.eval_episodes);
      eval_curve.push_back(ret);
      record(step, ret);
      loss_accum = 0.0;
      loss_count = 0;
      if (ret >= target_return) {
        model.q_floor = nn::forward(model.net, renders).minCoeff();
        return model;
      }
    }
  }

  double final_ret = evaluate_greedy(cfg, model, hyper.eval_episodes);
  eval_curve.push_back(final_ret);
  record(hyper.total_steps, final_ret);
  if (final_ret >= target_return) {
    model.q_floor = nn::forward(model.net, renders).minCoeff();
    return model;
  }
  throw TrainingError("DQN missed " + std::to_string(target_return) + " (reached " +
                          std::to_string(final_ret) + ")",
                      eval_curve);
}

void save_qmodel(const QModel& q, const std::string& path) {
  char meta[64];
  std::snprintf(meta, sizeof meta, "q_floor=%.17g", q.q_floor);
  nn::save_model(q.net, path, meta);
}

QModel load_qmodel(const std::string& path) {
  nn::LoadedModel lm = nn::load_model(path);
  QModel q;
  q.net = std::move(lm.model);
  double floor = 0.0;
  if (std::sscanf(lm.meta.c_str(), "q_floor=%lg", &floor) != 1)
    throw FormatError("checkpoint lacks a q_floor field: " + path);
  q.q_floor = floor;
  return q;
}

}  // namespace shift::victim
