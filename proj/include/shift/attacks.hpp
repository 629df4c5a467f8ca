#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "shift/diffusion.hpp"
#include "shift/env.hpp"
#include "shift/realism.hpp"
#include "shift/victim.hpp"

namespace shift::attacks {

enum class Variant : int { None = 0, ShiftO, ShiftI, Pgd, MinBest, Rotate, Transform };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // FormatError on unknown

struct AttackConfig {
  Variant variant = Variant::None;
  double xi = 1.0;               // fraction of steps the scheduler may attack
  double gamma2 = 2.0;           // policy-guidance strength (SHIFT variants)
  double epsilon = 15.0 / 255;   // l_inf budget (PGD / MinBest)
  int iters = 10;
  double degrees = 1.0;          // rotation baseline
  int dx = 1, dy = 0;            // transform baseline
  bool use_realism = true;       // realism guidance inside guided_sample
  std::uint64_t seed = 0;
};

void validate(const AttackConfig& cfg);

// Per-episode attacker state. The windows hold the last kHistoryLen executed
// (frame, action) pairs; SHIFT-O reads the true one, SHIFT-I its own imagined
// one. A window is warm once it holds kHistoryLen pairs.
struct AttackState {
  int t = 0;  // environment steps seen so far
  std::vector<double> importance_history;
  int attacks_so_far = 0;
  std::deque<std::pair<env::Frame, int>> true_pairs;
  std::deque<std::pair<env::Frame, int>> imagined_pairs;
};

// Scheduler rule: appends omega to the importance history, then answers
// whether step t may be attacked — omega at or above the (1-xi) empirical
// quantile, attack budget attacks_so_far < t*xi not yet spent, and the
// history window warm (t >= kHistoryLen).
bool should_attack(AttackState& st, double omega, int t, double xi);

// Produces the frame the victim will observe at the current step and advances
// the scheduler. ae may be null (no realism guidance). Does not record the
// executed action; call push_executed afterwards.
env::Frame shift_step(AttackState& st, const env::EnvConfig& ecfg, const env::EnvState& true_state,
                      const AttackConfig& cfg, const diffusion::DenoiserModel& m,
                      const victim::QModel& q, const realism::AEModel* ae, bool* attacked = nullptr);

// Records the executed transition in both history windows.
void push_executed(AttackState& st, const env::Frame& true_frame, const env::Frame& observed,
                   int action);

diffusion::HistoryWindow window_from_pairs(const std::deque<std::pair<env::Frame, int>>& pairs);

// Iterated sign-gradient ascent on cross-entropy against the clean greedy
// action, projected to the epsilon l_inf ball and [0,1]; iters steps of
// size epsilon/4.
env::Frame pgd_attack(const victim::QModel& q, const env::Frame& frame, double epsilon, int iters);

// Same loop descending the clean-best action's Q value.
env::Frame minbest_attack(const victim::QModel& q, const env::Frame& frame, double epsilon,
                          int iters);

// Bilinear rotation about the frame center, zero-filled, clamped to [0,1].
// |degrees| <= 45.
env::Frame rotate_attack(const env::Frame& frame, double degrees);

// Integer translation by (dx right, dy down), zero-filled. |dx|,|dy| < size.
env::Frame transform_attack(const env::Frame& frame, int dx, int dy);

}  // namespace shift::attacks
