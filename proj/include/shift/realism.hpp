#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shift/env.hpp"
#include "shift/nn.hpp"

namespace shift::realism {

// Autoencoder anomaly scorer trained on clean renders only. Frames it has
// never seen reconstruct badly, which is the whole detection signal.
struct AEModel {
  nn::Mlp net;
  int frame_size = 16;
};

struct AEHyper {
  int steps = 6000;
  int batch_size = 32;
  double lr = 1e-3;
  int hidden = 96;
  int bottleneck = 32;
  double holdout_fraction = 0.1;
  int eval_every = 500;
  double pass_error = 0.5;  // mean holdout reconstruction norm for a 16x16 frame
};

// Trains on a deterministic shuffle-split of `frames`; stops early once the
// held-out mean error clears pass_error, else throws TrainingError with the
// eval curve.
AEModel train_autoencoder(const std::vector<env::Frame>& frames, const AEHyper& hyper,
                          std::uint64_t seed);

// Euclidean norm of frame - AE(frame).
double reconstruction_error(const AEModel& ae, const env::Frame& frame);

// One gradient descent step on the reconstruction norm with respect to the
// frame itself, clamped back to [0,1]. Exact fixed points pass through.
env::Frame realism_step(const AEModel& ae, const env::Frame& frame, double step_size = 1.0);

void save_ae(const AEModel& ae, const std::string& path);
AEModel load_ae(const std::string& path);

}  // namespace shift::realism
