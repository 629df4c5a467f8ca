#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "shift/diffusion.hpp"
#include "shift/env.hpp"

namespace shift::defense {

struct DetectorConfig {
  double mad_threshold = 5.0;
  double cusum_drift = 1.5;
  double cusum_threshold = 3.0;
  int window = 3;  // consecutive exceedances the MAD rule requires
};

void validate(const DetectorConfig& cfg);

// Median and median-absolute-deviation of the Wasserstein-1 distance between
// adjacent true frames on clean rollouts.
struct CleanStats {
  double median = 0.0;
  double mad = 0.0;
  int count = 0;
};

// Robust location/scale of a sample; throws InsufficientDataError on empty
// input.
CleanStats clean_stats(const std::vector<double>& samples);

// flags[t] is true iff series[t-window+1 .. t] all exceed
// median + mad_threshold * MAD. Same length as series; a series shorter than
// the window carries no flags.
std::vector<bool> mad_detect(const std::vector<double>& series, const CleanStats& stats,
                             const DetectorConfig& cfg);

// One-sided CUSUM on MAD-normalized residuals r_t = (x_t - median)/MAD:
//   g_t = max(0, g_{t-1} + r_t - drift), flag when g_t > threshold (strict).
// Returns the first flagged index, if any. MAD = 0 → DegenerateStatsError.
std::optional<int> cusum_detect(const std::vector<double>& series, const CleanStats& stats,
                                const DetectorConfig& cfg);

// DMBP-style purifier: renoise the observation to sigma_partial, then run the
// conditional denoise cascade down the inference ladder from that level,
// conditioned on the raw observed history. sigma_partial = 0 returns the
// observation unchanged. Deterministic given seed.
env::Frame purify(const diffusion::DenoiserModel& m, const env::Frame& observed,
                  const diffusion::HistoryWindow& observed_history, double sigma_partial,
                  std::uint64_t seed);

// Second rung of the inference ladder, the default renoise level.
double default_sigma_partial(const diffusion::NoiseParams& np);

}  // namespace shift::defense
