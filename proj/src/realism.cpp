#include "shift/realism.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace shift::realism {

namespace {

double holdout_error(const AEModel& ae, const Eigen::MatrixXd& holdout) {
  Eigen::MatrixXd rec = nn::forward(ae.net, holdout);
  return (rec - holdout).colwise().norm().mean();
}

}  // namespace

AEModel train_autoencoder(const std::vector<env::Frame>& frames, const AEHyper& hyper,
                          std::uint64_t seed) {
  if (frames.empty()) throw ConfigError("empty autoencoder dataset");
  const int F = static_cast<int>(frames.front().rows());
  const int dim = F * F;
  for (const env::Frame& f : frames)
    if (f.rows() != F || f.cols() != F) throw ShapeError("mixed frame sizes in dataset");

  std::mt19937_64 rng(seed);
  std::vector<int> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  int n_hold = std::max(1, static_cast<int>(frames.size() * hyper.holdout_fraction));
  int n_train = static_cast<int>(frames.size()) - n_hold;
  if (n_train < 1) throw ConfigError("dataset too small to split");

  Eigen::MatrixXd train(dim, n_train), hold(dim, n_hold);
  for (int i = 0; i < n_train; ++i) train.col(i) = env::flatten(frames[order[i]]);
  for (int i = 0; i < n_hold; ++i) hold.col(i) = env::flatten(frames[order[n_train + i]]);

  AEModel ae;
  ae.frame_size = F;
  ae.net = nn::make_mlp({{dim, hyper.hidden, nn::Activation::SiLU},
                         {hyper.hidden, hyper.bottleneck, nn::Activation::SiLU},
                         {hyper.bottleneck, hyper.hidden, nn::Activation::SiLU},
                         {hyper.hidden, dim, nn::Activation::Sigmoid}},
                        rng());
  nn::AdamState opt = nn::make_adam(ae.net, hyper.lr);

  std::uniform_int_distribution<int> pick(0, n_train - 1);
  std::vector<double> curve;
  for (int step = 1; step <= hyper.steps; ++step) {
    Eigen::MatrixXd x(dim, hyper.batch_size);
    for (int b = 0; b < hyper.batch_size; ++b) x.col(b) = train.col(pick(rng));
    nn::Gradients g = nn::grad(ae.net, x, nn::mse_loss(x));
    if (!std::isfinite(g.loss)) throw NumericsError("autoencoder loss diverged");
    nn::adam_step(ae.net, opt, g);

    if (step % hyper.eval_every == 0) {
      double err = holdout_error(ae, hold);
      curve.push_back(err);
      if (err <= hyper.pass_error) return ae;
    }
  }
  double err = holdout_error(ae, hold);
  curve.push_back(err);
  if (err <= hyper.pass_error) return ae;
  throw TrainingError("autoencoder holdout error " + std::to_string(err) + " above " +
                          std::to_string(hyper.pass_error),
                      curve);
}

double reconstruction_error(const AEModel& ae, const env::Frame& frame) {
  Eigen::VectorXd x = env::flatten(frame);
  if (x.size() != ae.net.input_dim()) throw ShapeError("frame does not match autoencoder input");
  return (nn::forward1(ae.net, x) - x).norm();
}

env::Frame realism_step(const AEModel& ae, const env::Frame& frame, double step_size) {
  Eigen::VectorXd x = env::flatten(frame);
  if (x.size() != ae.net.input_dim()) throw ShapeError("frame does not match autoencoder input");

  // d||x - AE(x)|| / dx splits into the direct residual direction and the
  // term backpropagated through the decoder.
  Eigen::VectorXd residual = x - nn::forward1(ae.net, x);
  double norm = residual.norm();
  if (norm < 1e-12) return frame;  // exact fixed point, gradient undefined
  Eigen::VectorXd rhat = residual / norm;

  auto loss = [&](const Eigen::MatrixXd& y, Eigen::MatrixXd& dldy) {
    dldy = -rhat;
    return (x - y.col(0)).norm();
  };
  nn::Gradients g = nn::grad(ae.net, x, loss);
  Eigen::VectorXd grad = rhat + g.dx.col(0);
  if (!grad.allFinite()) throw NumericsError("non-finite realism gradient");

  // The loss is a norm, so the raw gradient has near unit length no matter how
  // close x already is; a fixed step overshoots inside that radius. Halve the
  // step until the error actually drops, keeping the frame when it never does.
  double eta = step_size;
  for (int tries = 0; tries < 8; ++tries) {
    Eigen::VectorXd stepped = (x - eta * grad).cwiseMax(0.0).cwiseMin(1.0);
    if ((stepped - nn::forward1(ae.net, stepped)).norm() < norm)
      return env::unflatten(stepped, ae.frame_size);
    eta *= 0.5;
  }
  return frame;
}

void save_ae(const AEModel& ae, const std::string& path) {
  char meta[64];
  std::snprintf(meta, sizeof meta, "frame_size=%d", ae.frame_size);
  nn::save_model(ae.net, path, meta);
}

AEModel load_ae(const std::string& path) {
  nn::LoadedModel lm = nn::load_model(path);
  AEModel ae;
  ae.net = std::move(lm.model);
  if (std::sscanf(lm.meta.c_str(), "frame_size=%d", &ae.frame_size) != 1)
    throw FormatError("checkpoint lacks a frame_size field: " + path);
  return ae;
}

}  // namespace shift::realism
