#include "shift/defense.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace shift::defense {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void validate(const DetectorConfig& cfg) {
  // mad_threshold = 0 is legal: it degenerates to "any run above the median".
  if (cfg.mad_threshold < 0.0 || cfg.cusum_drift <= 0.0 || cfg.cusum_threshold <= 0.0 ||
      cfg.window <= 0)
    throw ConfigError("detector parameters out of range");
}

CleanStats clean_stats(const std::vector<double>& samples) {
  if (samples.empty()) throw InsufficientDataError("no samples for clean statistics");
  CleanStats st;
  st.count = static_cast<int>(samples.size());
  st.median = median_of(samples);
  std::vector<double> dev(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) dev[i] = std::abs(samples[i] - st.median);
  st.mad = median_of(std::move(dev));
  return st;
}

std::vector<bool> mad_detect(const std::vector<double>& series, const CleanStats& stats,
                             const DetectorConfig& cfg) {
  validate(cfg);
  const double bound = stats.median + cfg.mad_threshold * stats.mad;
  std::vector<bool> flags(series.size(), false);
  int run = 0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    run = series[t] > bound ? run + 1 : 0;
    if (run >= cfg.window) flags[t] = true;
  }
  return flags;
}

std::optional<int> cusum_detect(const std::vector<double>& series, const CleanStats& stats,
                                const DetectorConfig& cfg) {
  validate(cfg);
  if (stats.mad == 0.0) throw DegenerateStatsError("MAD is zero; residual scale undefined");
  double g = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    double r = (series[t] - stats.median) / stats.mad;
    g = std::max(0.0, g + r - cfg.cusum_drift);
    if (g > cfg.cusum_threshold) return static_cast<int>(t);
  }
  return std::nullopt;
}

env::Frame purify(const diffusion::DenoiserModel& m, const env::Frame& observed,
                  const diffusion::HistoryWindow& observed_history, double sigma_partial,
                  std::uint64_t seed) {
  if (sigma_partial < 0.0 || sigma_partial > m.np.sigma_max)
    throw DomainError("sigma_partial outside the inference ladder range");
  if (sigma_partial == 0.0) return observed;
  diffusion::validate_history(observed_history, m.k, m.frame_size);
  if (observed.rows() != m.frame_size || observed.cols() != m.frame_size)
    throw ShapeError("observed frame size mismatch");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x = env::flatten(observed);
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += sigma_partial * gauss(rng);

  // Denoise at the injected level, then at every strictly smaller ladder rung.
  env::Frame f = env::unflatten(x, m.frame_size);
  f = diffusion::denoise(m, f, sigma_partial, &observed_history);
  for (double s : diffusion::sigma_schedule(m.np))
    if (s > 0.0 && s < sigma_partial) f = diffusion::denoise(m, f, s, &observed_history);
  return f.cwiseMax(0.0).cwiseMin(1.0);
}

double default_sigma_partial(const diffusion::NoiseParams& np) {
  std::vector<double> sched = diffusion::sigma_schedule(np);
  return sched.size() > 2 ? sched[1] : sched[0];
}

}  // namespace shift::defense
