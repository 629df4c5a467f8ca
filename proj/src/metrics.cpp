#include "shift/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace shift::metrics {

double ssim(const env::Frame& a, const env::Frame& b, int window) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("frame shape mismatch");
  if (window < 1 || window > a.rows() || window > a.cols())
    throw DomainError("ssim window does not fit the frame");
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const double n = static_cast<double>(window) * window;

  double total = 0.0;
  int count = 0;
  for (int i = 0; i + window <= a.rows(); ++i)
    for (int j = 0; j + window <= a.cols(); ++j) {
      auto pa = a.block(i, j, window, window);
      auto pb = b.block(i, j, window, window);
      double mx = pa.mean();
      double my = pb.mean();
      double vx = (pa - mx).square().sum() / n;
      double vy = (pb - my).square().sum() / n;
      double cov = ((pa - mx) * (pb - my)).sum() / n;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / count;
}

RenderIndex build_render_index(const env::StateSpace& space) {
  RenderIndex idx;
  idx.frame_size = space.cfg.frame_size;
  idx.renders.resize(space.size(), idx.frame_size * idx.frame_size);
  for (int i = 0; i < space.size(); ++i)
    idx.renders.row(i) = env::flatten(env::render(space.cfg, space.states[i])).transpose();
  return idx;
}

Projection realism_distance(const env::Frame& f, const RenderIndex& idx) {
  if (idx.size() == 0) throw DomainError("empty render index");
  if (f.rows() != idx.frame_size || f.cols() != idx.frame_size)
    throw ShapeError("frame shape mismatch");
  Eigen::VectorXd v = env::flatten(f);
  Eigen::VectorXd d2 = (idx.renders.rowwise() - v.transpose()).rowwise().squaredNorm();
  Projection p;
  p.distance = std::sqrt(d2.minCoeff(&p.state_index));
  return p;
}

std::vector<int> projection_set(const env::Frame& f, const RenderIndex& idx, double tie_tol) {
  if (idx.size() == 0) throw DomainError("empty render index");
  if (f.rows() != idx.frame_size || f.cols() != idx.frame_size)
    throw ShapeError("frame shape mismatch");
  Eigen::VectorXd v = env::flatten(f);
  Eigen::VectorXd d = (idx.renders.rowwise() - v.transpose()).rowwise().norm();
  double dmin = d.minCoeff();
  std::vector<int> out;
  for (int i = 0; i < d.size(); ++i)
    if (d(i) <= dmin + tie_tol) out.push_back(i);
  return out;
}

bool is_semantics_changing(const env::Frame& f, int true_state_index, const RenderIndex& idx,
                           double tie_tol) {
  if (true_state_index < 0 || true_state_index >= idx.size())
    throw DomainError("true state index out of range");
  for (int i : projection_set(f, idx, tie_tol))
    if (i != true_state_index) return true;
  return false;
}

bool is_history_aligned(const env::Frame& f, int prev_state_index, const env::StateSpace& space,
                        const RenderIndex& idx, double tie_tol) {
  if (prev_state_index < 0 || prev_state_index >= space.size())
    throw DomainError("previous state index out of range");
  std::vector<int> successors;
  for (const env::EnvState& n : env::reachable_next(space, space.states[prev_state_index]))
    successors.push_back(space.index_of(n));
  for (int i : projection_set(f, idx, tie_tol))
    if (std::find(successors.begin(), successors.end(), i) != successors.end()) return true;
  return false;
}

double faithfulness_score(const std::vector<env::Frame>& observed,
                          const std::vector<env::Frame>& true_frames) {
  if (observed.empty() || observed.size() != true_frames.size())
    throw ShapeError("faithfulness windows must match and be nonempty");
  double total = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i].rows() != true_frames[i].rows() ||
        observed[i].cols() != true_frames[i].cols())
      throw ShapeError("frame shape mismatch in faithfulness window");
    total += std::sqrt((observed[i] - true_frames[i]).square().sum());
  }
  return total;
}

StealthThresholds default_thresholds(const RenderIndex& idx, int k) {
  if (idx.size() < 2) throw DomainError("need at least two states for thresholds");
  if (k < 1) throw DomainError("window must be positive");
  std::vector<double> second_nearest(idx.size());
  for (int i = 0; i < idx.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < idx.size(); ++j)
      if (j != i) best = std::min(best, (idx.renders.row(i) - idx.renders.row(j)).norm());
    second_nearest[i] = best;
  }
  std::sort(second_nearest.begin(), second_nearest.end());
  int rank = static_cast<int>(std::ceil(0.99 * second_nearest.size())) - 1;
  rank = std::clamp(rank, 0, static_cast<int>(second_nearest.size()) - 1);
  StealthThresholds th;
  th.k = k;
  th.delta1 = second_nearest[rank];
  th.delta2 = k * th.delta1;
  return th;
}

double episode_reward(const std::vector<double>& rewards) {
  double total = 0.0;
  for (double r : rewards) total += r;
  return total;
}

double deviation_rate(const std::vector<int>& observed_actions,
                      const std::vector<int>& true_actions) {
  if (observed_actions.empty() || observed_actions.size() != true_actions.size())
    throw ShapeError("action sequences must match and be nonempty");
  int mismatch = 0;
  for (std::size_t i = 0; i < observed_actions.size(); ++i)
    if (observed_actions[i] != true_actions[i]) ++mismatch;
  return 100.0 * mismatch / static_cast<double>(observed_actions.size());
}

}  // namespace shift::metrics
