#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lungnet/nn/Network.h"
#include "lungnet/train/Dataset.h"
#include "lungnet/train/Metrics.h"

namespace lungnet::train {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batchSize = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// Raw-audio augmentation multiplier, used by trainOnCycles only.
  std::size_t augmentMultiplier = 1;
  /// Overrides the weights derived from the training label counts.
  std::optional<std::array<double, 4>> classWeights;
  /// Patients whose rows must never reach a training batch (held-out test
  /// patients). A violation throws StateError.
  std::set<std::string> forbiddenPatients;
  /// Called after every epoch with (epoch index, mean loss); returning false
  /// stops training early.
  std::function<bool(std::size_t, double)> onEpoch;
};

struct TrainResult {
  /// Per-epoch mean weighted cross-entropy.
  std::vector<double> lossCurve;
  std::size_t steps = 0;
};

/**
 * Adam on class-weighted cross-entropy over shuffled mini-batches, in place.
 * Fully determined by cfg.seed. Throws InputError on an empty set and
 * NumericError (naming lr, epoch and batch) when the loss stops being finite.
 */
TrainResult train(nn::Network& net, const FeatureSet& data, const TrainConfig& cfg);

/// Augments raw cycles (cfg.augmentMultiplier), extracts features, then trains.
TrainResult trainOnCycles(nn::Network& net, const std::vector<audio::BreathingCycle>& cycles,
                          const TrainConfig& cfg, const audio::MelConfig& mel = {},
                          std::size_t width = 128);

/// Argmax class of every row, inference mode.
std::vector<int> predict(nn::Network& net, const FeatureSet& data, std::size_t batchSize = 64);

struct CvResult {
  std::vector<std::set<std::string>> folds;
  std::vector<MetricsReport> reports;
  double meanSe = 0.0;
  double meanSp = 0.0;
  double meanScore = 0.0;
};

/// Patient-level k-fold cross-validation; every fold trains a fresh network
/// from makeNet() and tests on its held-out patients.
CvResult kfoldCv(const FeatureSet& data, std::size_t k, std::uint64_t seed,
                 const std::function<nn::Network()>& makeNet, const TrainConfig& cfg);

} // namespace lungnet::train
