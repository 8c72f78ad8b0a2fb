#include "lungnet/train/Trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "lungnet/augment/Augment.h"
#include "lungnet/common/Errors.h"
#include "lungnet/nn/Optim.h"

namespace lungnet::train {

TrainResult train(nn::Network& net, const FeatureSet& data, const TrainConfig& cfg) {
  if (data.empty()) {
    throw InputError("training set is empty");
  }
  if (cfg.batchSize == 0) {
    throw ConfigurationError("batch size must be positive");
  }
  TrainResult result;
  if (cfg.epochs == 0) {
    return result;
  }
  const auto weights = cfg.classWeights ? *cfg.classWeights : classWeights(data.classCounts());
  auto params = net.trainableParameters();
  auto adam = nn::makeAdamState(params, nn::AdamConfig{cfg.lr});

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const nn::ForwardContext ctx{nn::Mode::Train, &rng};

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double lossSum = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batchSize, ++b) {
      const std::size_t end = std::min(order.size(), start + cfg.batchSize);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      for (auto i : idx) {
        if (cfg.forbiddenPatients.count(data.patientId(i))) {
          throw StateError("held-out patient " + data.patientId(i) + " reached a training batch");
        }
      }
      const auto labels = data.labelsOf(idx);
      net.zeroGrad();
      auto logits = net.forwardLogits(data.batch(idx), ctx);
      auto loss = nn::softmaxCrossEntropy(logits, labels, weights);
      auto diagnose = [&](const std::string& what) {
        std::ostringstream msg;
        msg << what << " at epoch " << epoch << ", batch " << b << " (lr " << cfg.lr
            << ", batch size " << cfg.batchSize << ")";
        return NumericError(msg.str());
      };
      if (!std::isfinite(loss.loss)) {
        throw diagnose("loss became " + std::to_string(loss.loss));
      }
      net.backward(loss.gradLogits);
      try {
        nn::adamStep(params, adam);
      } catch (const NumericError& e) {
        // NaN can hide behind a ReLU in the forward pass and only show up in gradients.
        throw diagnose(e.what());
      }
      lossSum += loss.loss * static_cast<double>(idx.size());
      ++result.steps;
    }
    result.lossCurve.push_back(lossSum / static_cast<double>(data.size()));
    if (cfg.onEpoch && !cfg.onEpoch(epoch, result.lossCurve.back())) {
      break;
    }
  }
  return result;
}

TrainResult trainOnCycles(nn::Network& net, const std::vector<audio::BreathingCycle>& cycles,
                          const TrainConfig& cfg, const audio::MelConfig& mel,
                          std::size_t width) {
  const auto augmented = augment::augmentDataset(cycles, cfg.augmentMultiplier, cfg.seed);
  return train(net, extractFeatures(augmented, mel, width), cfg);
}

std::vector<int> predict(nn::Network& net, const FeatureSet& data, std::size_t batchSize) {
  std::vector<int> out;
  out.reserve(data.size());
  const nn::ForwardContext ctx{nn::Mode::Infer, nullptr};
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batchSize) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batchSize); ++i) {
      idx.push_back(i);
    }
    const auto rows = nn::argmaxRows(net.forwardLogits(data.batch(idx), ctx));
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

CvResult kfoldCv(const FeatureSet& data, std::size_t k, std::uint64_t seed,
                 const std::function<nn::Network()>& makeNet, const TrainConfig& cfg) {
  CvResult cv;
  cv.folds = patientFolds(data.patientIds(), data.labels(), k, seed);
  for (const auto& testPatients : cv.folds) {
    const auto trainIdx = data.indicesForPatients(testPatients, false);
    const auto testIdx = data.indicesForPatients(testPatients, true);
    auto net = makeNet();
    TrainConfig foldCfg = cfg;
    foldCfg.forbiddenPatients.insert(testPatients.begin(), testPatients.end());
    const auto test = data.subset(testIdx);
    train(net, data.subset(trainIdx), foldCfg);
    cv.reports.push_back(evaluateMetrics(predict(net, test), test.labels()));
  }
  for (const auto& r : cv.reports) {
    cv.meanSe += r.se;
    cv.meanSp += r.sp;
    cv.meanScore += r.score;
  }
  const auto n = static_cast<double>(cv.reports.size());
  cv.meanSe /= n;
  cv.meanSp /= n;
  cv.meanScore /= n;
  return cv;
}

} // namespace lungnet::train
