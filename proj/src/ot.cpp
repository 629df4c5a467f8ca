#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "shift/metrics.hpp"

namespace shift::metrics {

namespace {

struct Point {
  double mass;
  int r, c;
};

std::vector<Point> mass_points(const env::Frame& f) {
  std::vector<Point> pts;
  double total = 0.0;
  for (int i = 0; i < f.rows(); ++i)
    for (int j = 0; j < f.cols(); ++j) {
      double v = f(i, j);
      if (v < 0.0) throw DomainError("negative pixel intensity");
      if (v > 0.0) {
        pts.push_back({v, i, j});
        total += v;
      }
    }
  if (pts.empty()) throw DomainError("all-zero frame has no intensity distribution");
  for (Point& p : pts) p.mass /= total;
  return pts;
}

}  // namespace

// Successive shortest augmenting paths with node potentials. The bipartite
// transport graph is dense, so Dijkstra is a pair of array scans; backward
// arcs exist wherever flow is positive.
double wasserstein1(const env::Frame& a, const env::Frame& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("frame shape mismatch");
  const double diag = std::hypot(static_cast<double>(a.rows() - 1),
                                 static_cast<double>(a.cols() - 1));
  std::vector<Point> src = mass_points(a);
  std::vector<Point> snk = mass_points(b);
  const int S = static_cast<int>(src.size());
  const int T = static_cast<int>(snk.size());

  Eigen::MatrixXd cost(S, T);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < T; ++j)
      cost(i, j) = std::hypot(static_cast<double>(src[i].r - snk[j].r),
                              static_cast<double>(src[i].c - snk[j].c)) /
                   diag;

  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(S, T);
  std::vector<double> rem_a(S), rem_b(T);
  for (int i = 0; i < S; ++i) rem_a[i] = src[i].mass;
  for (int j = 0; j < T; ++j) rem_b[j] = snk[j].mass;
  std::vector<double> pot_s(S, 0.0), pot_t(T, 0.0);

  const double inf = std::numeric_limits<double>::infinity();
  const double mass_eps = 1e-15;
  // Each augmentation exhausts a source, a sink, or a backward arc; cap the
  // loop defensively anyway.
  const long max_augment = 4L * (S + T) * std::max(S, T) + 64;

  for (long it = 0; it < max_augment; ++it) {
    bool any = false;
    for (int i = 0; i < S && !any; ++i) any = rem_a[i] > mass_eps;
    if (!any) break;

    // Dijkstra over 2 layers: node ids [0,S) sources, [S, S+T) sinks.
    std::vector<double> dist(S + T, inf);
    std::vector<int> prev(S + T, -1);  // for sinks: source feeding it; for sources: sink
    std::vector<char> done(S + T, 0);
    for (int i = 0; i < S; ++i)
      if (rem_a[i] > mass_eps) dist[i] = 0.0;

    int target = -1;
    while (true) {
      int u = -1;
      double best = inf;
      for (int v = 0; v < S + T; ++v)
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      if (u < 0) break;
      done[u] = 1;
      if (u >= S && rem_b[u - S] > mass_eps) {
        target = u - S;
        break;
      }
      // Reduced costs are nonnegative up to rounding; clamp so a finalized
      // node can never be re-relaxed, which would corrupt the prev chain.
      if (u < S) {
        for (int j = 0; j < T; ++j) {
          if (done[S + j]) continue;
          double rd = std::max(cost(u, j) + pot_s[u] - pot_t[j], 0.0);
          if (dist[u] + rd < dist[S + j]) {
            dist[S + j] = dist[u] + rd;
            prev[S + j] = u;
          }
        }
      } else {
        int j = u - S;
        for (int i = 0; i < S; ++i)
          if (!done[i] && flow(i, j) > 0.0) {
            double rd = std::max(-cost(i, j) + pot_t[j] - pot_s[i], 0.0);
            if (dist[u] + rd < dist[i]) {
              dist[i] = dist[u] + rd;
              prev[i] = j;
            }
          }
      }
    }
    if (target < 0) {
      // Sinks can drain before sources through accumulated rounding; leftover
      // mass bounds the W1 error, so only a real imbalance is fatal.
      double rem = 0.0;
      for (int i = 0; i < S; ++i) rem += rem_a[i];
      if (rem <= 1e-9) break;
      throw ConvergenceError("transport search failed to reach a sink");
    }

    // Unreached nodes take the full dtarget bump, otherwise flow arcs that
    // straddle the reached set lose their zero reduced cost.
    double dtarget = dist[S + target];
    for (int i = 0; i < S; ++i) pot_s[i] += std::min(dist[i], dtarget);
    for (int j = 0; j < T; ++j) pot_t[j] += std::min(dist[S + j], dtarget);

    // Trace the alternating path back to its source, find the bottleneck.
    double bottleneck = rem_b[target];
    int start = -1;
    for (int j = target;;) {
      int i = prev[S + j];
      if (prev[i] < 0) {
        bottleneck = std::min(bottleneck, rem_a[i]);
        start = i;
        break;
      }
      int jb = prev[i];
      bottleneck = std::min(bottleneck, flow(i, jb));
      j = jb;
    }
    for (int j = target;;) {
      int i = prev[S + j];
      flow(i, j) += bottleneck;
      if (prev[i] < 0) break;
      int jb = prev[i];
      flow(i, jb) -= bottleneck;
      if (flow(i, jb) < mass_eps) flow(i, jb) = 0.0;
      j = jb;
    }
    rem_b[target] -= bottleneck;
    if (rem_b[target] < mass_eps) rem_b[target] = 0.0;
    rem_a[start] -= bottleneck;
    if (rem_a[start] < mass_eps) rem_a[start] = 0.0;
  }

  return (flow.array() * cost.array()).sum();
}

}  // namespace shift::metrics
