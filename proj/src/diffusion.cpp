#include "shift/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace shift::diffusion {

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

int encoded_dim(int frame_size, int k) {
  int d = frame_size * frame_size;
  return d + 2 + k * d + k * (env::kNumActions + 1);
}

// Condition block layout: [flag | k frames | k one-hot action slots].
Eigen::VectorXd encode_condition(const HistoryWindow& h, int k, int frame_size) {
  int d = frame_size * frame_size;
  Eigen::VectorXd enc = Eigen::VectorXd::Zero(1 + k * d + k * (env::kNumActions + 1));
  enc(0) = 1.0;
  for (int j = 0; j < k; ++j) enc.segment(1 + j * d, d) = env::flatten(h.frames[j]);
  int base = 1 + k * d;
  for (int j = 0; j < k; ++j) enc(base + j * (env::kNumActions + 1) + h.actions[j]) = 1.0;
  return enc;
}

// Full network input: [c_in * noisy | c_noise | condition block or zeros].
Eigen::VectorXd encode_input(const Eigen::VectorXd& noisy_flat, const Preconditioners& p,
                             const Eigen::VectorXd* cond_enc, int k, int frame_size) {
  int d = frame_size * frame_size;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(encoded_dim(frame_size, k));
  x.head(d) = p.c_in * noisy_flat;
  x(d) = p.c_noise;
  if (cond_enc) x.tail(cond_enc->size()) = *cond_enc;
  return x;
}

Eigen::VectorXd denoise_flat(const DenoiserModel& m, const Eigen::VectorXd& noisy_flat,
                             double sigma, const Eigen::VectorXd* cond_enc) {
  Preconditioners p = preconditioners(sigma, m.np);
  Eigen::VectorXd x = encode_input(noisy_flat, p, cond_enc, m.k, m.frame_size);
  return p.c_skip * noisy_flat + p.c_out * nn::forward1(m.net, x);
}

}  // namespace

void validate(const NoiseParams& np) {
  if (np.sigma_data <= 0.0) throw ConfigError("sigma_data must be positive");
  if (np.p_std <= 0.0) throw ConfigError("p_std must be positive");
  if (np.steps < 1) throw ConfigError("need at least one reverse step");
  if (!(0.0 < np.sigma_min && np.sigma_min < np.sigma_max))
    throw ConfigError("need 0 < sigma_min < sigma_max");
}

Preconditioners preconditioners(double sigma, const NoiseParams& np) {
  if (sigma <= 0.0) throw DomainError("sigma must be positive");
  double s2 = sigma * sigma, d2 = np.sigma_data * np.sigma_data;
  Preconditioners p;
  p.c_in = 1.0 / std::sqrt(s2 + d2);
  p.c_out = sigma * np.sigma_data / std::sqrt(s2 + d2);
  p.c_skip = d2 / (d2 + s2);
  p.c_noise = 0.25 * std::log(sigma);
  return p;
}

std::vector<double> sigma_schedule(const NoiseParams& np) {
  validate(np);
  const double rho = 7.0;
  std::vector<double> sched;
  sched.reserve(np.steps + 1);
  if (np.steps == 1) {
    sched.push_back(np.sigma_max);
  } else {
    double hi = std::pow(np.sigma_max, 1.0 / rho);
    double lo = std::pow(np.sigma_min, 1.0 / rho);
    for (int r = 0; r < np.steps; ++r) {
      double t = static_cast<double>(r) / (np.steps - 1);
      sched.push_back(std::pow(hi + t * (lo - hi), rho));
    }
  }
  sched.push_back(0.0);
  return sched;
}

double cf_scale(int i, int steps) {
  return std::max(static_cast<double>(steps - i) / steps, 0.3);
}

void validate_history(const HistoryWindow& h, int k, int frame_size) {
  if (static_cast<int>(h.frames.size()) != k || static_cast<int>(h.actions.size()) != k)
    throw ShapeError("history must hold exactly k frames and k actions");
  for (const env::Frame& f : h.frames)
    if (f.rows() != frame_size || f.cols() != frame_size)
      throw ShapeError("history frame size mismatch");
  for (int j = 0; j < k; ++j) {
    int a = h.actions[j];
    if (a < 0 || a > kNullAction) throw DomainError("history action out of range");
    if (a == kNullAction && j != k - 1)
      throw DomainError("only the last history action may be Null");
  }
}

DenoiserModel make_denoiser(const NoiseParams& np, int frame_size, int k, int hidden1,
                            int hidden2, std::uint64_t seed) {
  validate(np);
  if (frame_size < 1 || k < 1) throw ConfigError("bad denoiser geometry");
  DenoiserModel m;
  m.np = np;
  m.frame_size = frame_size;
  m.k = k;
  int d = frame_size * frame_size;
  m.net = nn::make_mlp({{encoded_dim(frame_size, k), hidden1, nn::Activation::SiLU},
                        {hidden1, hidden2, nn::Activation::SiLU},
                        {hidden2, d, nn::Activation::Identity}},
                       seed);
  return m;
}

env::Frame denoise(const DenoiserModel& m, const env::Frame& noisy, double sigma,
                   const HistoryWindow* cond) {
  if (noisy.rows() != m.frame_size || noisy.cols() != m.frame_size)
    throw ShapeError("noisy frame size mismatch");
  if (cond) {
    validate_history(*cond, m.k, m.frame_size);
    Eigen::VectorXd enc = encode_condition(*cond, m.k, m.frame_size);
    return env::unflatten(denoise_flat(m, env::flatten(noisy), sigma, &enc), m.frame_size);
  }
  return env::unflatten(denoise_flat(m, env::flatten(noisy), sigma, nullptr), m.frame_size);
}

TrainStepStats train_step(DenoiserModel& m, nn::AdamState& opt,
                          const std::vector<TrainItem>& batch, double drop_rate,
                          std::mt19937_64& rng, double cond_noise) {
  if (batch.empty()) throw ConfigError("empty training batch");
  if (drop_rate < 0.0 || drop_rate > 1.0) throw DomainError("drop_rate outside [0,1]");
  if (cond_noise < 0.0) throw DomainError("cond_noise must be nonnegative");

  const int d = m.frame_size * m.frame_size;
  const int B = static_cast<int>(batch.size());
  Eigen::MatrixXd x(encoded_dim(m.frame_size, m.k), B);
  Eigen::MatrixXd y(d, B);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TrainStepStats stats;
  for (int b = 0; b < B; ++b) {
    const TrainItem& item = batch[b];
    if (item.target.rows() != m.frame_size || item.target.cols() != m.frame_size)
      throw ShapeError("target frame size mismatch");
    validate_history(item.cond, m.k, m.frame_size);

    double sigma = std::exp(m.np.p_mean + m.np.p_std * gauss(rng));
    Preconditioners p = preconditioners(sigma, m.np);

    Eigen::VectorXd target = env::flatten(item.target);
    Eigen::VectorXd noisy = target;
    for (int j = 0; j < d; ++j) noisy(j) += sigma * gauss(rng);

    bool drop = unit(rng) < drop_rate;
    if (drop) {
      ++stats.dropped;
      x.col(b) = encode_input(noisy, p, nullptr, m.k, m.frame_size);
    } else {
      HistoryWindow w = item.cond;
      // The Null token must appear in training or SHIFT-I would feed the
      // model an embedding it has never seen.
      if (unit(rng) < kNullDropRate) {
        ++stats.null_dropped;
        w.actions.back() = kNullAction;
      }
      if (cond_noise > 0.0) {
        double aug = cond_noise * unit(rng);
        for (env::Frame& f : w.frames) {
          for (int r = 0; r < f.rows(); ++r)
            for (int c = 0; c < f.cols(); ++c) f(r, c) += aug * gauss(rng);
          f = f.cwiseMax(0.0).cwiseMin(1.0);
        }
      }
      Eigen::VectorXd enc = encode_condition(w, m.k, m.frame_size);
      x.col(b) = encode_input(noisy, p, &enc, m.k, m.frame_size);
    }
    y.col(b) = (target - p.c_skip * noisy) / p.c_out;
  }

  nn::Gradients g = nn::grad(m.net, x, nn::mse_loss(y));
  if (!std::isfinite(g.loss)) throw NumericsError("denoiser loss diverged");
  nn::adam_step(m.net, opt, g);
  stats.loss = g.loss;
  return stats;
}

env::Frame sample_conditional(const DenoiserModel& m, const HistoryWindow& cond,
                              std::uint64_t seed) {
  validate_history(cond, m.k, m.frame_size);
  Eigen::VectorXd enc = encode_condition(cond, m.k, m.frame_size);
  std::vector<double> sched = sigma_schedule(m.np);
  const int T = m.np.steps;
  const int d = m.frame_size * m.frame_size;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd iter(d);
  for (int j = 0; j < d; ++j) iter(j) = sched[0] * gauss(rng);

  for (int r = 0; r < T; ++r) {
    int i = T - r;  // reverse step index, T at the noisiest rung
    double g1 = cf_scale(i, T);
    Eigen::VectorXd dc = denoise_flat(m, iter, sched[r], &enc);
    Eigen::VectorXd du = denoise_flat(m, iter, sched[r], nullptr);
    iter = g1 * dc + (1.0 - g1) * du;
  }
  return env::unflatten(iter.cwiseMax(0.0).cwiseMin(1.0), m.frame_size);
}

env::Frame guided_sample(const DenoiserModel& m, const HistoryWindow& cond,
                         const victim::QModel& q, const env::Frame& true_state, double gamma2,
                         const realism::AEModel* ae, std::uint64_t seed) {
  if (gamma2 < 0.0) throw DomainError("gamma2 must be nonnegative");
  validate_history(cond, m.k, m.frame_size);
  const int d = m.frame_size * m.frame_size;
  if (true_state.rows() != m.frame_size || true_state.cols() != m.frame_size)
    throw ShapeError("true state frame size mismatch");
  if (q.net.input_dim() != d) throw ShapeError("Q network does not match frame size");

  Eigen::VectorXd enc = encode_condition(cond, m.k, m.frame_size);
  std::vector<double> sched = sigma_schedule(m.np);
  const int T = m.np.steps;

  // The guidance field depends only on the frozen action, so one gradient per
  // action covers every rung.
  Eigen::VectorXd true_flat = env::flatten(true_state);
  Eigen::VectorXd q_true = nn::forward1(q.net, true_flat);
  std::vector<Eigen::VectorXd> grad_cache(env::kNumActions);
  auto guidance_grad = [&](int action) -> const Eigen::VectorXd& {
    if (grad_cache[action].size() == 0) {
      auto pick = [&](const Eigen::MatrixXd& y, Eigen::MatrixXd& dldy) {
        dldy.setZero(y.rows(), y.cols());
        dldy(action, 0) = 1.0;
        return y(action, 0);
      };
      nn::Gradients g = nn::grad(q.net, true_flat, pick);
      double z = q_true(action) - q.q_floor + 1.0;
      grad_cache[action] = (sigmoid(z) / softplus(z)) * g.dx.col(0);
      if (!grad_cache[action].allFinite()) throw NumericsError("non-finite policy guidance");
    }
    return grad_cache[action];
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd iter(d);
  for (int j = 0; j < d; ++j) iter(j) = sched[0] * gauss(rng);

  for (int r = 0; r < T; ++r) {
    int i = T - r;
    if (gamma2 > 0.0) {
      Eigen::VectorXd proposal = iter;
      for (int rr = r; rr < T; ++rr) proposal = denoise_flat(m, proposal, sched[rr], &enc);
      Eigen::VectorXd qv = nn::forward1(q.net, proposal);
      int astar = 0;
      for (int a = 1; a < env::kNumActions; ++a)
        if (qv(a) > qv(astar)) astar = a;
      iter -= gamma2 * guidance_grad(astar);
    }
    double g1 = cf_scale(i, T);
    Eigen::VectorXd dc = denoise_flat(m, iter, sched[r], &enc);
    Eigen::VectorXd du = denoise_flat(m, iter, sched[r], nullptr);
    iter = g1 * dc + (1.0 - g1) * du;
    if (ae && i != 1)
      iter = env::flatten(realism::realism_step(*ae, env::unflatten(iter, m.frame_size)));
  }
  return env::unflatten(iter.cwiseMax(0.0).cwiseMin(1.0), m.frame_size);
}

std::pair<Eigen::VectorXd, double> ddpm_guided_step(const Eigen::VectorXd& mu, double var,
                                                    const Eigen::VectorXd& grad_logq) {
  if (var <= 0.0) throw DomainError("step variance must be positive");
  if (mu.size() != grad_logq.size()) throw ShapeError("mean and gradient size mismatch");
  return {mu - var * grad_logq, var};
}

void validate(const GaussianToyConfig& cfg) {
  if (cfg.betas.empty()) throw ConfigError("empty beta schedule");
  for (double b : cfg.betas)
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("betas must lie in (0,1)");
  if (cfg.data_var <= 0.0) throw ConfigError("data variance must be positive");
}

double gaussian_toy_sample(const GaussianToyConfig& cfg, std::mt19937_64& rng) {
  validate(cfg);
  const int n = static_cast<int>(cfg.betas.size());
  std::vector<double> abar(n);
  double acc = 1.0;
  for (int idx = 0; idx < n; ++idx) {
    acc *= 1.0 - cfg.betas[idx];
    abar[idx] = acc;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  double x = gauss(rng);
  Eigen::VectorXd mu(1), grad(1);
  for (int idx = n - 1; idx >= 0; --idx) {
    double beta = cfg.betas[idx];
    double v = abar[idx] * cfg.data_var + 1.0 - abar[idx];
    double score = -(x - std::sqrt(abar[idx]) * cfg.data_mean) / v;
    mu(0) = (x + beta * score) / std::sqrt(1.0 - beta);
    // Exact noise-lifted guidance: d/dx log E[exp(q_slope * x_0) | x_idx]
    // for the conjugate Gaussian chain. Guiding with the raw terminal slope
    // instead overshoots the tilt by an O(1) factor.
    grad(0) = cfg.q_slope * std::sqrt(abar[idx]) * cfg.data_var / v;
    auto [mean, var] = ddpm_guided_step(mu, beta, grad);
    x = mean(0);
    if (idx > 0) x += std::sqrt(var) * gauss(rng);
  }
  return x;
}

void save_denoiser(const DenoiserModel& m, const std::string& path) {
  char meta[256];
  std::snprintf(meta, sizeof meta,
                "denoiser sd=%.17g pm=%.17g ps=%.17g T=%d smin=%.17g smax=%.17g F=%d k=%d",
                m.np.sigma_data, m.np.p_mean, m.np.p_std, m.np.steps, m.np.sigma_min,
                m.np.sigma_max, m.frame_size, m.k);
  nn::save_model(m.net, path, meta);
}

DenoiserModel load_denoiser(const std::string& path) {
  nn::LoadedModel lm = nn::load_model(path);
  DenoiserModel m;
  m.net = std::move(lm.model);
  int got = std::sscanf(lm.meta.c_str(),
                        "denoiser sd=%lg pm=%lg ps=%lg T=%d smin=%lg smax=%lg F=%d k=%d",
                        &m.np.sigma_data, &m.np.p_mean, &m.np.p_std, &m.np.steps,
                        &m.np.sigma_min, &m.np.sigma_max, &m.frame_size, &m.k);
  if (got != 8) throw FormatError("not a denoiser checkpoint: " + path);
  validate(m.np);
  return m;
}

}  // namespace shift::diffusion
