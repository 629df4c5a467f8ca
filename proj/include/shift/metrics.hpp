#pragma once

#include <Eigen/Dense>
#include <vector>

#include "shift/env.hpp"
#include "shift/errors.hpp"

namespace shift::metrics {

// Exact Wasserstein-1 distance between two frames viewed as intensity
// distributions (each normalized to total mass 1). Ground metric: Euclidean
// pixel distance divided by the diagonal, i.e. the largest possible pixel
// distance hypot(F-1, F-1), so values live in [0, 1].
// Solved exactly with successive shortest augmenting paths.
// Throws ShapeError on mismatched shapes, DomainError on negative pixels or
// an all-zero frame.
double wasserstein1(const env::Frame& a, const env::Frame& b);

// Mean local SSIM over all fully-contained window x window patches, uniform
// weighting, dynamic range L = 1, C1 = (0.01)^2, C2 = (0.03)^2, population
// (divide-by-N) moments.
double ssim(const env::Frame& a, const env::Frame& b, int window = 7);

// Flattened renders of every canonical state, used for nearest-render
// queries. Row i corresponds to space.states[i].
struct RenderIndex {
  int frame_size = 0;
  Eigen::MatrixXd renders;  // n x frame_size^2

  int size() const { return static_cast<int>(renders.rows()); }
};

RenderIndex build_render_index(const env::StateSpace& space);

struct Projection {
  double distance = 0.0;  // L2 over pixels to the nearest render
  int state_index = -1;
};

// Distance from the frame to the nearest valid render, with its argmin.
Projection realism_distance(const env::Frame& f, const RenderIndex& idx);

// All state indices whose render distance is within tie_tol of the minimum.
std::vector<int> projection_set(const env::Frame& f, const RenderIndex& idx,
                                double tie_tol = 1e-9);

// True when some nearest render belongs to a state other than the true one.
bool is_semantics_changing(const env::Frame& f, int true_state_index, const RenderIndex& idx,
                           double tie_tol = 1e-9);

// True when some nearest render is a one-step successor of the previous
// observation's projected state.
bool is_history_aligned(const env::Frame& f, int prev_state_index, const env::StateSpace& space,
                        const RenderIndex& idx, double tie_tol = 1e-9);

// Sum over the window of L2 distances between what was observed and the true
// renders. Window vectors must have equal nonzero length.
double faithfulness_score(const std::vector<env::Frame>& observed,
                          const std::vector<env::Frame>& true_frames);

struct StealthThresholds {
  double delta1 = 0.0;  // per-frame realism bound
  double delta2 = 0.0;  // window faithfulness bound
  int k = 4;
};

// delta1 = 99th percentile (nearest-rank) over states of the distance from a
// render to its closest other render; delta2 = k * delta1.
StealthThresholds default_thresholds(const RenderIndex& idx, int k);

double episode_reward(const std::vector<double>& rewards);

// Percentage of positions where the two greedy action sequences disagree.
double deviation_rate(const std::vector<int>& observed_actions,
                      const std::vector<int>& true_actions);

}  // namespace shift::metrics
