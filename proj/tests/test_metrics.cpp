#include <doctest.h>

#include <cmath>
#include <random>

#include "shift/metrics.hpp"
#include "support/lp_oracle.hpp"
#include "support/ssim_reference.hpp"

using namespace shift;
using namespace shift::env;
using namespace shift::metrics;

namespace {

Frame random_frame(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Frame f(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) f(i, j) = unit(rng);
  return f;
}

}  // namespace

TEST_CASE("wasserstein1 of identical frames is zero") {
  EnvConfig cfg;
  Frame f = render(cfg, reset(cfg));
  CHECK(wasserstein1(f, f) == 0.0);
}

TEST_CASE("wasserstein1 of two unit spikes is their distance over the diagonal") {
  Frame a = Frame::Zero(4, 4), b = Frame::Zero(4, 4);
  a(0, 0) = 1.0;
  b(3, 3) = 1.0;
  CHECK(wasserstein1(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  b(3, 3) = 0.0;
  b(0, 3) = 0.7;  // mass normalization makes the scale irrelevant
  CHECK(wasserstein1(a, b) == doctest::Approx(3.0 / std::hypot(3.0, 3.0)).epsilon(1e-12));
}

TEST_CASE("wasserstein1 splits mass optimally in a hand-checkable case") {
  Frame a = Frame::Zero(4, 4), b = Frame::Zero(4, 4);
  a(0, 0) = 0.5;
  a(0, 2) = 0.5;
  b(0, 1) = 1.0;
  CHECK(wasserstein1(a, b) == doctest::Approx(1.0 / std::hypot(3.0, 3.0)).epsilon(1e-12));
}

TEST_CASE("wasserstein1 is invariant to intensity scaling") {
  std::mt19937_64 rng(3);
  Frame a = random_frame(4, rng), b = random_frame(4, rng);
  CHECK(wasserstein1(a, b) == doctest::Approx(wasserstein1(2.5 * a, b)).epsilon(1e-12));
}

TEST_CASE("wasserstein1 matches the LP oracle on 50 random pairs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Frame a = random_frame(4, rng), b = random_frame(4, rng);
    double fast = wasserstein1(a, b);
    double lp = testsupport::wasserstein1_lp(a, b);
    CHECK(std::abs(fast - lp) <= 1e-6);
  }
}

TEST_CASE("wasserstein1 is symmetric and satisfies the triangle inequality") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    Frame a = random_frame(4, rng), b = random_frame(4, rng), c = random_frame(4, rng);
    double ab = wasserstein1(a, b), ba = wasserstein1(b, a);
    double bc = wasserstein1(b, c), ac = wasserstein1(a, c);
    CHECK(std::abs(ab - ba) <= 1e-9);
    CHECK(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("wasserstein1 rejects bad inputs") {
  Frame a = Frame::Zero(4, 4), b = Frame::Zero(5, 5);
  CHECK_THROWS_AS(wasserstein1(a, b), ShapeError);
  Frame z = Frame::Zero(4, 4), ok = Frame::Constant(4, 4, 0.1);
  CHECK_THROWS_AS(wasserstein1(z, ok), DomainError);
  Frame neg = Frame::Constant(4, 4, 0.1);
  neg(1, 1) = -0.2;
  CHECK_THROWS_AS(wasserstein1(neg, ok), DomainError);
}

TEST_CASE("ssim of a frame with itself is 1") {
  EnvConfig cfg;
  Frame f = render(cfg, reset(cfg));
  CHECK(ssim(f, f) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim of flat 0 against flat 1 collapses to the C1 constant") {
  Frame a = Frame::Zero(16, 16), b = Frame::Constant(16, 16, 1.0);
  double c1 = 1e-4;
  CHECK(ssim(a, b) == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-12));
}

TEST_CASE("ssim matches the independently coded reference on 50 random pairs") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    Frame a = random_frame(16, rng), b = random_frame(16, rng);
    CHECK(std::abs(ssim(a, b) - testsupport::ssim_reference(a, b)) <= 1e-6);
    CHECK(ssim(a, b) < 1.0);
  }
}

TEST_CASE("ssim validates its inputs") {
  Frame a = Frame::Zero(8, 8), b = Frame::Zero(9, 9);
  CHECK_THROWS_AS(ssim(a, b), ShapeError);
  Frame c = Frame::Zero(4, 4);
  CHECK_THROWS_AS(ssim(c, c, 7), DomainError);
}

TEST_CASE("every valid render projects onto itself at distance zero") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  RenderIndex idx = build_render_index(space);
  for (int i = 0; i < space.size(); ++i) {
    Frame f = render(cfg, space.states[i]);
    Projection p = realism_distance(f, idx);
    CHECK(p.distance == 0.0);
    CHECK(p.state_index == i);
    auto set = projection_set(f, idx);
    REQUIRE(set.size() == 1);
    CHECK(set[0] == i);
  }
}

TEST_CASE("renders are well separated so ties need real ambiguity") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  RenderIndex idx = build_render_index(space);
  double min_gap = 1e9;
  for (int i = 0; i < idx.size(); ++i)
    for (int j = i + 1; j < idx.size(); ++j)
      min_gap = std::min(min_gap, (idx.renders.row(i) - idx.renders.row(j)).norm());
  CHECK(min_gap > 1e-3);
}

TEST_CASE("uniform noise is far from the valid set") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  RenderIndex idx = build_render_index(space);
  StealthThresholds th = default_thresholds(idx, 4);
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    Frame noise = random_frame(cfg.frame_size, rng);
    CHECK(realism_distance(noise, idx).distance > th.delta1);
  }
}

TEST_CASE("semantics change iff the nearest render is another state") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  RenderIndex idx = build_render_index(space);
  Frame f0 = render(cfg, space.states[0]);
  CHECK_FALSE(is_semantics_changing(f0, 0, idx));
  CHECK(is_semantics_changing(f0, 1, idx));
  CHECK_THROWS_AS(is_semantics_changing(f0, -1, idx), DomainError);
}

TEST_CASE("history alignment accepts exactly the one-step successors") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  RenderIndex idx = build_render_index(space);
  for (int i : {0, 7, 40}) {
    auto successors = reachable_next(space, space.states[i]);
    for (const EnvState& n : successors)
      CHECK(is_history_aligned(render(cfg, n), i, space, idx));
    // a state two phases away can never be a one-step successor
    for (const EnvState& s : space.states)
      if (s.tick == (space.states[i].tick + 2) % space.period) {
        CHECK_FALSE(is_history_aligned(render(cfg, s), i, space, idx));
        break;
      }
  }
}

TEST_CASE("faithfulness sums window distances and is zero on truth") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  std::vector<Frame> truth;
  for (int i = 0; i < 4; ++i) truth.push_back(render(cfg, space.states[i]));
  CHECK(faithfulness_score(truth, truth) == 0.0);

  std::vector<Frame> shifted = truth;
  shifted[2] = truth[2] + 0.01;  // adds 0.01 to every pixel
  double expect = 0.01 * 16.0;   // sqrt(256 * 0.01^2)
  CHECK(faithfulness_score(shifted, truth) == doctest::Approx(expect).epsilon(1e-12));
  shifted.pop_back();
  CHECK_THROWS_AS(faithfulness_score(shifted, truth), ShapeError);
}

TEST_CASE("default thresholds scale the realism bound by the window") {
  EnvConfig cfg;
  StateSpace space = enumerate_valid_states(cfg);
  RenderIndex idx = build_render_index(space);
  StealthThresholds th = default_thresholds(idx, 4);
  CHECK(th.delta1 > 0.0);
  CHECK(th.delta2 == doctest::Approx(4.0 * th.delta1).epsilon(1e-15));
}

TEST_CASE("episode reward is the undiscounted sum") {
  CHECK(episode_reward({1.0, -1.0, 1.0, 0.0}) == 1.0);
  CHECK(episode_reward({}) == 0.0);
}

TEST_CASE("deviation rate counts disagreements as a percentage") {
  CHECK(deviation_rate({0, 1, 2, 0}, {0, 1, 2, 0}) == 0.0);
  CHECK(deviation_rate({0, 1, 2, 0}, {0, 2, 2, 1}) == 50.0);
  CHECK_THROWS_AS(deviation_rate({}, {}), ShapeError);
  CHECK_THROWS_AS(deviation_rate({1}, {1, 2}), ShapeError);
}
