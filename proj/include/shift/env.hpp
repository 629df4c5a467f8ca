#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "shift/errors.hpp"

namespace shift::env {

// Grayscale observation, frame_size x frame_size, values in [0,1].
// (i,j) indexes pixel row i, column j.
using Frame = Eigen::ArrayXXd;

enum class Action : int { Up = 0, Down = 1, Stay = 2 };
inline constexpr int kNumActions = 3;
inline constexpr const char* kActionNames[kNumActions] = {"up", "down", "stay"};

// Deterministic lane-crossing gridworld. The agent climbs from the bottom row
// to row 0 across num_lanes horizontal traffic lanes; cars cycle at fixed
// integer speeds, so the whole world state is (agent_row, car phase).
struct EnvConfig {
  int grid_size = 12;
  int num_lanes = 3;
  std::vector<int> lane_speeds = {2, -3, 4};    // cells per step, nonzero
  std::vector<int> car_start_cols = {0, 5, 6};  // leading cell at tick 0
  int car_width = 2;                            // cells, drawn to the right of the leading cell
  int frame_size = 16;
  int horizon = 64;
  double discount = 0.97;
};

struct EnvState {
  int agent_row = 0;
  std::vector<int> car_cols;  // leading cell per lane
  int tick = 0;

  bool operator==(const EnvState& o) const {
    return agent_row == o.agent_row && car_cols == o.car_cols && tick == o.tick;
  }
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

// Throws ConfigError unless the config is internally consistent.
void validate(const EnvConfig& cfg);

// Pixel row of lane l inside the grid.
int lane_row(const EnvConfig& cfg, int l);
// Fixed column the agent occupies.
int agent_col(const EnvConfig& cfg);
// Smallest p > 0 with car_cols(t + p) == car_cols(t) for all t.
int phase_period(const EnvConfig& cfg);
// Leading cells of all cars at the given tick.
std::vector<int> car_cols_at(const EnvConfig& cfg, int tick);
// True if the car in lane l with leading cell col covers column c.
bool car_covers(const EnvConfig& cfg, int col, int c);

EnvState reset(const EnvConfig& cfg);

// Cars advance, then the agent moves (clamped to the grid). A collision pays
// -1 and sends the agent back to the bottom row; reaching row 0 pays +1 and
// also resets to the bottom row. Collision wins when both would apply.
StepResult step(const EnvConfig& cfg, const EnvState& state, Action action);

Frame render(const EnvConfig& cfg, const EnvState& state);

// Exact inverse of render. Throws NotAValidRender when the frame is not a
// bit-exact render of any state, ShapeError on a wrong-sized frame.
EnvState unrender(const EnvConfig& cfg, const Frame& frame);

// Set of states reachable from reset, with ticks canonicalized to [0, period).
// states are sorted by (tick, agent_row); index(row, phase) gives the position
// in states or -1.
struct StateSpace {
  EnvConfig cfg;
  int period = 1;
  std::vector<EnvState> states;

  bool contains(const EnvState& s) const { return index_of(s) >= 0; }
  int index_of(const EnvState& s) const;
  EnvState canonical(const EnvState& s) const;
  int size() const { return static_cast<int>(states.size()); }

  // filled by enumerate_valid_states
  std::vector<int> index_table;  // period * grid_size entries, -1 = unreachable
};

StateSpace enumerate_valid_states(const EnvConfig& cfg);

// Distinct canonical successors of a state under all actions.
// Throws StateError if the state is not in the space.
std::vector<EnvState> reachable_next(const StateSpace& space, const EnvState& state);

struct ValueIterationResult {
  StateSpace space;
  Eigen::MatrixXd q;  // |states| x kNumActions
  int iterations = 0;
  double greedy_return = 0.0;  // undiscounted return of the greedy policy over one horizon
};

// Exact Q iteration over the canonical state space, sup-norm tolerance tol.
ValueIterationResult value_iteration(const EnvConfig& cfg, double tol = 1e-8,
                                     int max_iterations = 200000);

// Undiscounted return of the greedy policy w.r.t. q over cfg.horizon steps.
double greedy_rollout_return(const EnvConfig& cfg, const StateSpace& space,
                             const Eigen::MatrixXd& q);

// Row-major flattening shared by every consumer of frames.
Eigen::VectorXd flatten(const Frame& f);
Frame unflatten(const Eigen::VectorXd& v, int frame_size);

}  // namespace shift::env
