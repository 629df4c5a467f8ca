#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "shift/env.hpp"
#include "shift/nn.hpp"
#include "shift/realism.hpp"
#include "shift/victim.hpp"

namespace shift::diffusion {

struct NoiseParams {
  double sigma_data = 0.5;
  double p_mean = -0.4;  // ln(sigma) is Normal(p_mean, p_std^2) during training
  double p_std = 1.2;
  int steps = 5;         // reverse steps T
  double sigma_min = 0.02;
  double sigma_max = 5.0;
};

void validate(const NoiseParams& np);

struct Preconditioners {
  double c_in = 0.0, c_out = 0.0, c_noise = 0.0, c_skip = 0.0;
};

Preconditioners preconditioners(double sigma, const NoiseParams& np);

// T positive rungs from sigma_max down to sigma_min (power interpolation,
// exponent 7), then a terminal zero; T+1 values total.
std::vector<double> sigma_schedule(const NoiseParams& np);

// Conditional/unconditional mixing weight at reverse step i, which counts
// down from T at the noisiest rung to 1 at the last.
double cf_scale(int i, int steps);

// Last history slot may carry this instead of a real action; the denoiser
// learns a dedicated embedding for it.
inline constexpr int kNullAction = env::kNumActions;
inline constexpr int kHistoryLen = 4;
inline constexpr double kNullDropRate = 0.1;

struct HistoryWindow {
  std::vector<env::Frame> frames;  // oldest first, length k
  std::vector<int> actions;        // parallel; kNullAction allowed only in the last slot
};

void validate_history(const HistoryWindow& h, int k, int frame_size);

struct DenoiserModel {
  nn::Mlp net;
  NoiseParams np;
  int frame_size = 16;
  int k = kHistoryLen;
};

DenoiserModel make_denoiser(const NoiseParams& np, int frame_size, int k, int hidden1,
                            int hidden2, std::uint64_t seed);

// One preconditioned denoiser evaluation:
//   D = c_skip * noisy + c_out * F(c_in * noisy, c_noise, cond)
// cond = nullptr selects the unconditional path.
env::Frame denoise(const DenoiserModel& m, const env::Frame& noisy, double sigma,
                   const HistoryWindow* cond);

struct TrainItem {
  env::Frame target;
  HistoryWindow cond;
};

struct TrainStepStats {
  double loss = 0.0;
  int dropped = 0;       // items trained unconditionally
  int null_dropped = 0;  // items whose last action was masked to Null
};

// One optimizer step of the residual-matching objective; per item the noise
// scale is drawn log-normally and the condition dropped with drop_rate. Kept
// conditions get their frames corrupted with Gaussian noise of std drawn from
// U(0, cond_noise): at attack time the model is chained on its own samples, so
// it has to have seen imperfect windows.
TrainStepStats train_step(DenoiserModel& m, nn::AdamState& opt,
                          const std::vector<TrainItem>& batch, double drop_rate,
                          std::mt19937_64& rng, double cond_noise = 0.0);

// Full reverse ladder from pure noise, mixing conditional and unconditional
// outputs with cf_scale; the mixed output is the next iterate, so the only
// randomness is the initial draw. Pure function of seed.
env::Frame sample_conditional(const DenoiserModel& m, const HistoryWindow& cond,
                              std::uint64_t seed);

// sample_conditional plus per-rung policy guidance and an optional realism
// step on every rung but the last. The guidance gradient is d log Q~ / dx of
// the true state, where Q~ is the softplus-lifted action value and the action
// is frozen at the greedy choice for the proposed clean output of the rung.
// gamma2 = 0 with no ae reproduces sample_conditional bit for bit.
env::Frame guided_sample(const DenoiserModel& m, const HistoryWindow& cond,
                         const victim::QModel& q, const env::Frame& true_state, double gamma2,
                         const realism::AEModel* ae, std::uint64_t seed);

// Reverse-transition parameters with score guidance folded into the mean.
std::pair<Eigen::VectorXd, double> ddpm_guided_step(const Eigen::VectorXd& mu, double var,
                                                    const Eigen::VectorXd& grad_logq);

// 1-D linear-Gaussian chain for exercising ddpm_guided_step end to end with
// the exact conjugate score; used by the analytic unit harness.
struct GaussianToyConfig {
  std::vector<double> betas;  // each in (0,1)
  double data_mean = 0.0;
  double data_var = 0.01;
  // Terminal tilt: log Q(x_0) = q_slope * x_0. The chain applies the exact
  // noise-lifted gradient of log E[Q(x_0) | x_i] at every step, so the
  // terminal law is the tilted posterior N(mean - q_slope*var, var) up to
  // discretization.
  double q_slope = 0.0;
};

void validate(const GaussianToyConfig& cfg);

// One terminal sample of the guided reverse chain under the exact score.
double gaussian_toy_sample(const GaussianToyConfig& cfg, std::mt19937_64& rng);

void save_denoiser(const DenoiserModel& m, const std::string& path);
DenoiserModel load_denoiser(const std::string& path);

}  // namespace shift::diffusion
