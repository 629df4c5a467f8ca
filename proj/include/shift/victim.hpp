#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shift/env.hpp"
#include "shift/nn.hpp"

namespace shift::victim {

// Q network over a single flattened frame. q_floor is the smallest action
// value the trained net produces anywhere on the clean state space; guidance
// code shifts by it so the tilted weight stays positive on clean inputs.
struct QModel {
  nn::Mlp net;
  double q_floor = 0.0;
};

struct DqnHyper {
  int total_steps = 30000;      // environment interactions
  int replay_capacity = 20000;
  int batch_size = 32;
  int learn_start = 500;        // steps collected before updates begin
  int target_sync = 250;        // updates between target refreshes
  double lr = 1e-3;
  double eps_start = 1.0;       // linear exploration decay
  double eps_end = 0.05;
  int eps_decay_steps = 8000;
  int eval_every = 1000;        // steps between greedy evaluations
  int eval_episodes = 10;
  double pass_fraction = 0.9;   // of the value-iteration optimal return
  int hidden1 = 96;
  int hidden2 = 64;
};

struct TrainLog {
  std::vector<int> steps;
  std::vector<double> losses;       // running mean since previous eval
  std::vector<double> eval_returns;
};

Eigen::VectorXd q_values(const QModel& q, const env::Frame& frame);

// Argmax of q_values, ties toward the lowest action index.
env::Action greedy_action(const QModel& q, const env::Frame& frame);

// State importance: spread between the best and worst action value.
double importance_weight(const QModel& q, const env::Frame& frame);

// Mean undiscounted greedy return over `episodes` fresh episodes.
double evaluate_greedy(const env::EnvConfig& cfg, const QModel& q, int episodes);

// Standard DQN with a replay buffer and a frozen target net. Stops early once
// the greedy policy clears pass_fraction of the value-iteration optimum;
// throws TrainingError carrying the eval curve if the budget runs out first.
QModel train_dqn(const env::EnvConfig& cfg, const DqnHyper& hyper, std::uint64_t seed,
                 TrainLog* log = nullptr);

void save_qmodel(const QModel& q, const std::string& path);
QModel load_qmodel(const std::string& path);

}  // namespace shift::victim
