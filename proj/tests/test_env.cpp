#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "shift/env.hpp"

using namespace shift;
using namespace shift::env;

namespace {

// Small single-lane world used where exhaustive hand checks are practical.
EnvConfig tiny_config() {
  EnvConfig cfg;
  cfg.grid_size = 4;
  cfg.num_lanes = 1;
  cfg.lane_speeds = {1};
  cfg.car_start_cols = {0};
  cfg.car_width = 1;
  cfg.frame_size = 8;
  cfg.horizon = 16;
  cfg.discount = 0.9;
  return cfg;
}

}  // namespace

TEST_CASE("reset puts the agent at the bottom with cars at their start columns") {
  EnvConfig cfg;
  EnvState s = reset(cfg);
  CHECK(s.agent_row == cfg.grid_size - 1);
  CHECK(s.car_cols == cfg.car_start_cols);
  CHECK(s.tick == 0);
}

TEST_CASE("config validation rejects inconsistent settings") {
  EnvConfig cfg;
  cfg.lane_speeds = {0, 1, 2};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = EnvConfig{};
  cfg.lane_speeds = {12, 1, 1};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = EnvConfig{};
  cfg.frame_size = 11;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = EnvConfig{};
  cfg.discount = 1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = EnvConfig{};
  cfg.car_width = 12;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = EnvConfig{};
  cfg.car_start_cols = {0, 5};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("stepping onto row 0 pays +1 and resets to the bottom row") {
  EnvConfig cfg = tiny_config();
  // phase 0 state, car at column 0; Up from row 1 cannot collide (no lane at row 0)
  EnvState s{1, {0}, 0};
  StepResult r = step(cfg, s, Action::Up);
  CHECK(r.reward == 1.0);
  CHECK(r.next.agent_row == cfg.grid_size - 1);
  CHECK(r.next.tick == 1);
  CHECK(r.next.car_cols[0] == 1);
}

TEST_CASE("collision pays -1, resets the agent, and beats the goal rule") {
  EnvConfig cfg = tiny_config();
  // moving onto the lane row exactly when the car reaches the agent column
  EnvState s{3, {1}, 1};  // car will be at column 2 == agent column next tick
  StepResult r = step(cfg, s, Action::Up);
  CHECK(r.reward == -1.0);
  CHECK(r.next.agent_row == 3);
}

TEST_CASE("moves clamp at the grid boundary") {
  EnvConfig cfg = tiny_config();
  EnvState s{3, {0}, 0};
  StepResult r = step(cfg, s, Action::Down);
  CHECK(r.next.agent_row == 3);
  CHECK(r.reward == 0.0);
}

TEST_CASE("episode terminates exactly at the horizon") {
  EnvConfig cfg = tiny_config();
  EnvState s = reset(cfg);
  for (int t = 0; t < cfg.horizon; ++t) {
    StepResult r = step(cfg, s, Action::Stay);
    CHECK(r.done == (t + 1 == cfg.horizon));
    s = r.next;
  }
}

TEST_CASE("step is deterministic") {
  EnvConfig cfg;
  EnvState s = reset(cfg);
  for (int a = 0; a < kNumActions; ++a) {
    StepResult r1 = step(cfg, s, static_cast<Action>(a));
    StepResult r2 = step(cfg, s, static_cast<Action>(a));
    CHECK(r1.next == r2.next);
    CHECK(r1.reward == r2.reward);
  }
}

TEST_CASE("step rejects malformed states") {
  EnvConfig cfg;
  EnvState s = reset(cfg);
  s.agent_row = cfg.grid_size;
  CHECK_THROWS_AS(step(cfg, s, Action::Stay), StateError);
  s = reset(cfg);
  s.car_cols.pop_back();
  CHECK_THROWS_AS(step(cfg, s, Action::Stay), StateError);
}

TEST_CASE("render uses the documented intensity levels") {
  EnvConfig cfg;
  Frame f = render(cfg, reset(cfg));
  int agents = 0, cars = 0, markers = 0, other = 0;
  for (int i = 0; i < cfg.frame_size; ++i)
    for (int j = 0; j < cfg.frame_size; ++j) {
      double v = f(i, j);
      if (v == 1.0)
        ++agents;
      else if (v == 0.6)
        ++cars;
      else if (v == 0.2)
        ++markers;
      else if (v != 0.0)
        ++other;
    }
  CHECK(agents == 1);
  CHECK(cars == cfg.num_lanes * cfg.car_width);
  CHECK(markers == cfg.num_lanes * (cfg.grid_size - cfg.car_width));
  CHECK(other == 0);
}

TEST_CASE("hand enumeration of the tiny world gives 11 canonical states") {
  // Row 0 is transient (goal resets) and the lane cell is excluded at the one
  // phase where the car sits on the agent column, so the reachable set is
  // rows {1,2,3} x phases {0..3} minus (row 2, phase 2).
  EnvConfig cfg = tiny_config();
  StateSpace space = enumerate_valid_states(cfg);
  CHECK(space.period == 4);
  CHECK(space.size() == 11);
  std::set<std::pair<int, int>> expect;
  for (int p = 0; p < 4; ++p)
    for (int row : {1, 2, 3})
      if (!(row == 2 && p == 2)) expect.insert({p, row});
  std::set<std::pair<int, int>> got;
  for (const EnvState& s : space.states) {
    got.insert({s.tick, s.agent_row});
    CHECK(s.car_cols[0] == s.tick);  // speed 1 from column 0
  }
  CHECK(got == expect);
}

TEST_CASE("the valid set is closed under step and contains reset") {
  for (EnvConfig cfg : {tiny_config(), EnvConfig{}}) {
    StateSpace space = enumerate_valid_states(cfg);
    CHECK(space.contains(space.canonical(reset(cfg))));
    for (const EnvState& s : space.states)
      for (int a = 0; a < kNumActions; ++a) {
        EnvState n = space.canonical(step(cfg, s, static_cast<Action>(a)).next);
        CHECK(space.contains(n));
      }
  }
}

TEST_CASE("default world: 123 canonical states over a 12-phase cycle") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  CHECK(space.period == 12);
  CHECK(space.size() == 123);
}

TEST_CASE("render is injective on the valid set and unrender inverts it") {
  for (EnvConfig cfg : {tiny_config(), EnvConfig{}}) {
    StateSpace space = enumerate_valid_states(cfg);
    std::set<std::string> seen;
    for (const EnvState& s : space.states) {
      Frame f = render(cfg, s);
      std::string key(reinterpret_cast<const char*>(f.data()), sizeof(double) * f.size());
      CHECK(seen.insert(key).second);
      EnvState back = unrender(cfg, f);
      CHECK(back == s);
    }
  }
}

TEST_CASE("unrender rejects anything that is not an exact render") {
  EnvConfig cfg;
  Frame f = render(cfg, reset(cfg));

  SUBCASE("a perturbed pixel") {
    f(0, 0) += 1e-6;
    CHECK_THROWS_AS(unrender(cfg, f), NotAValidRender);
  }
  SUBCASE("wrong shape") {
    Frame g = Frame::Zero(5, 5);
    CHECK_THROWS_AS(unrender(cfg, g), ShapeError);
  }
  SUBCASE("agent drawn over a car hides it") {
    EnvState s = reset(cfg);
    s.agent_row = lane_row(cfg, 0);        // overlap state, unreachable in play
    s.car_cols[0] = agent_col(cfg);        // leading car cell under the agent
    Frame g = render(cfg, s);
    CHECK_THROWS_AS(unrender(cfg, g), NotAValidRender);
  }
  SUBCASE("two agent pixels") {
    f(1, 1) = 1.0;
    CHECK_THROWS_AS(unrender(cfg, f), NotAValidRender);
  }
}

TEST_CASE("reachable_next yields distinct in-set successors and checks membership") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  int interior_checked = 0;
  for (const EnvState& s : space.states) {
    auto nexts = reachable_next(space, s);
    CHECK(nexts.size() >= 1);
    CHECK(nexts.size() <= 3);
    for (const EnvState& n : nexts) CHECK(space.contains(n));
    // interior: all three moves stay on distinct rows with no reset triggered
    bool interior = s.agent_row > 1 && s.agent_row < cfg.grid_size - 1;
    for (int a = 0; a < kNumActions && interior; ++a)
      interior = step(cfg, s, static_cast<Action>(a)).reward == 0.0;
    if (interior) {
      CHECK(nexts.size() == 3);
      ++interior_checked;
    }
  }
  CHECK(interior_checked > 0);

  EnvState bogus = reset(cfg);
  bogus.car_cols[0] = (bogus.car_cols[0] + 1) % cfg.grid_size;
  CHECK_THROWS_AS(reachable_next(space, bogus), StateError);
}

TEST_CASE("value iteration satisfies its own fixed point") {
  EnvConfig cfg;
  ValueIterationResult vi = value_iteration(cfg);
  for (int i = 0; i < vi.space.size(); ++i)
    for (int a = 0; a < kNumActions; ++a) {
      StepResult r = step(cfg, vi.space.states[i], static_cast<Action>(a));
      int j = vi.space.index_of(vi.space.canonical(r.next));
      double target = r.reward + cfg.discount * vi.q.row(j).maxCoeff();
      CHECK(std::abs(vi.q(i, a) - target) < 1e-7);
    }
}

TEST_CASE("with discount 0 the Q table equals immediate rewards exactly") {
  EnvConfig cfg = tiny_config();
  cfg.discount = 0.0;
  ValueIterationResult vi = value_iteration(cfg);
  for (int i = 0; i < vi.space.size(); ++i)
    for (int a = 0; a < kNumActions; ++a) {
      StepResult r = step(cfg, vi.space.states[i], static_cast<Action>(a));
      CHECK(vi.q(i, a) == r.reward);
    }
}

TEST_CASE("greedy policy beats 1000 random policies") {
  EnvConfig cfg;
  ValueIterationResult vi = value_iteration(cfg);
  // one crossing per 12-step cycle, no collisions, horizon 64
  CHECK(vi.greedy_return == 5.0);
  double best_random = -1e9;
  for (int seed = 0; seed < 1000; ++seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    EnvState s = reset(cfg);
    double total = 0.0;
    for (int t = 0; t < cfg.horizon; ++t) {
      StepResult r = step(cfg, s, static_cast<Action>(pick(rng)));
      total += r.reward;
      s = r.next;
    }
    best_random = std::max(best_random, total);
  }
  CHECK(vi.greedy_return >= best_random);
}

TEST_CASE("flatten and unflatten are inverse and row-major") {
  EnvConfig cfg;
  Frame f = render(cfg, reset(cfg));
  Eigen::VectorXd v = flatten(f);
  CHECK(v.size() == cfg.frame_size * cfg.frame_size);
  CHECK(v(3 * cfg.frame_size + 5) == f(3, 5));
  Frame g = unflatten(v, cfg.frame_size);
  CHECK((g == f).all());
  CHECK_THROWS_AS(unflatten(v, cfg.frame_size + 1), ShapeError);
}
