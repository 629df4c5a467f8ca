#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "shift/errors.hpp"

namespace shift::nn {

enum class Activation : int { Identity = 0, SiLU = 1, Sigmoid = 2 };

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::Identity;
};

// Plain dense MLP. Parameters are named W0,b0,W1,b1,... in layer order; all
// math is double precision so checkpoints round-trip bit exactly.
struct Mlp {
  std::vector<LayerSpec> arch;
  std::vector<Eigen::MatrixXd> w;  // out x in
  std::vector<Eigen::VectorXd> b;

  int input_dim() const { return arch.empty() ? 0 : arch.front().in; }
  int output_dim() const { return arch.empty() ? 0 : arch.back().out; }
  int num_layers() const { return static_cast<int>(arch.size()); }
  std::size_t num_params() const;
};

// He-style init scaled by sqrt(2/fan_in), biases zero, seeded and reproducible.
Mlp make_mlp(const std::vector<LayerSpec>& arch, std::uint64_t seed);

double activate(Activation a, double z);
double activate_deriv(Activation a, double z);

// Columns of x are samples.
Eigen::MatrixXd forward(const Mlp& m, const Eigen::MatrixXd& x);
Eigen::VectorXd forward1(const Mlp& m, const Eigen::VectorXd& x);

struct Gradients {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
  Eigen::MatrixXd dx;
  double loss = 0.0;
};

// Scalar loss of the network outputs: fills dL/dy and returns L.
using OutputLoss = std::function<double(const Eigen::MatrixXd& y, Eigen::MatrixXd& dldy)>;

// Reverse-mode gradients of loss(forward(m, x)) w.r.t. every parameter and
// the input batch.
Gradients grad(const Mlp& m, const Eigen::MatrixXd& x, const OutputLoss& loss);

// Mean squared error over all entries of the batch.
OutputLoss mse_loss(const Eigen::MatrixXd& targets);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
};

AdamState make_adam(const Mlp& m, double lr = 1e-3);

// Adam update: first/second moment EMAs with bias correction,
//   theta -= lr * mhat / (sqrt(vhat) + eps).
void adam_step(Mlp& m, AdamState& st, const Gradients& g);

// Binary checkpoint: magic, version, a free-form text header (config hash and
// friends), architecture table, then raw parameter bytes. Round-trips bit
// identically; load throws FormatError on anything malformed.
void save_model(const Mlp& m, const std::string& path, const std::string& meta);
struct LoadedModel {
  Mlp model;
  std::string meta;
};
LoadedModel load_model(const std::string& path);

// Deterministic stream splitting: a well-mixed seed from (base, index).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

}  // namespace shift::nn
