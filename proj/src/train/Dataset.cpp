#include "lungnet/train/Dataset.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "lungnet/common/Errors.h"

namespace lungnet::train {

void FeatureSet::add(const audio::MelSpectrogram& spec, int label, std::string patientId,
                     std::string recordingId) {
  if (spec.nMels != nMels_ || spec.frames != frames_) {
    throw DimensionError("spectrogram is " + std::to_string(spec.nMels) + "x" +
                         std::to_string(spec.frames) + ", feature set expects " +
                         std::to_string(nMels_) + "x" + std::to_string(frames_));
  }
  add(std::span<const double>(spec.values), label, std::move(patientId), std::move(recordingId));
}

void FeatureSet::add(std::span<const double> image, int label, std::string patientId,
                     std::string recordingId) {
  if (image.size() != nMels_ * frames_ || image.empty()) {
    throw DimensionError("feature image has the wrong size");
  }
  if (label < 0 || label >= kNumClasses) {
    throw InputError("label " + std::to_string(label) + " is not a class index");
  }
  values_.insert(values_.end(), image.begin(), image.end());
  labels_.push_back(label);
  patientIds_.push_back(std::move(patientId));
  recordingIds_.push_back(std::move(recordingId));
}

std::span<const double> FeatureSet::image(std::size_t i) const {
  if (i >= size()) {
    throw ArgumentError("feature index out of range");
  }
  const std::size_t per = nMels_ * frames_;
  return {values_.data() + i * per, per};
}

nn::Tensor FeatureSet::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) {
    throw ArgumentError("empty batch");
  }
  const std::size_t per = nMels_ * frames_;
  nn::Tensor x({indices.size(), 1, nMels_, frames_});
  auto dst = x.data();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    auto src = image(indices[b]);
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<long>(b * per));
  }
  return x;
}

std::vector<int> FeatureSet::labelsOf(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    out.push_back(labels_.at(i));
  }
  return out;
}

FeatureSet FeatureSet::subset(std::span<const std::size_t> indices) const {
  FeatureSet out(nMels_, frames_);
  for (auto i : indices) {
    out.add(image(i), labels_[i], patientIds_[i], recordingIds_[i]);
  }
  return out;
}

std::vector<std::size_t> FeatureSet::indicesForPatients(const std::set<std::string>& patients,
                                                        bool keep) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (patients.count(patientIds_[i]) == (keep ? 1u : 0u)) {
      out.push_back(i);
    }
  }
  return out;
}

std::set<std::string> FeatureSet::patients() const {
  return {patientIds_.begin(), patientIds_.end()};
}

std::array<std::size_t, 4> FeatureSet::classCounts() const {
  std::array<std::size_t, 4> counts{};
  for (int l : labels_) {
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

FeatureSet extractFeatures(std::span<const audio::BreathingCycle> cycles,
                           const audio::MelConfig& cfg, std::size_t width) {
  FeatureSet out(cfg.nMels, width);
  for (const auto& c : cycles) {
    out.add(audio::fixWidth(audio::melSpectrogram(c, cfg), width), classIndex(c.label),
            c.patientId, c.recordingId);
  }
  return out;
}

namespace {

struct Strata {
  std::vector<std::string> healthy;
  std::vector<std::string> unhealthy;
};

Strata stratify(std::span<const std::string> patientIds, std::span<const int> labels) {
  if (patientIds.size() != labels.size()) {
    throw DimensionError("one label per patient id is required");
  }
  std::map<std::string, bool> abnormal;
  for (std::size_t i = 0; i < patientIds.size(); ++i) {
    abnormal[patientIds[i]] = abnormal[patientIds[i]] || labels[i] != 0;
  }
  Strata s;
  for (const auto& [pid, sick] : abnormal) {
    (sick ? s.unhealthy : s.healthy).push_back(pid);
  }
  return s;
}

} // namespace

SplitPlan splitPatients(std::span<const std::string> patientIds, std::span<const int> labels,
                        double trainFrac, std::uint64_t seed) {
  if (!(trainFrac > 0.0 && trainFrac < 1.0)) {
    throw ArgumentError("train fraction must be in (0, 1)");
  }
  auto strata = stratify(patientIds, labels);
  const std::size_t total = strata.healthy.size() + strata.unhealthy.size();
  if (total < 2) {
    throw InputError("a patient split needs at least two patients");
  }
  const auto nTrain = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(trainFrac * static_cast<double>(total))), 1,
      total - 1);

  std::array<std::vector<std::string>*, 2> groups = {&strata.healthy, &strata.unhealthy};
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < 2; ++g) {
    const double exact = static_cast<double>(nTrain) * static_cast<double>(groups[g]->size()) /
        static_cast<double>(total);
    quota[g] = static_cast<std::size_t>(std::floor(exact));
    remainder[g] = exact - static_cast<double>(quota[g]);
    assigned += quota[g];
  }
  while (assigned < nTrain) {
    const std::size_t g = remainder[1] >= remainder[0] ? 1 : 0;
    ++quota[g];
    remainder[g] = -1.0;
    ++assigned;
  }

  std::mt19937_64 rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t g = 0; g < 2; ++g) {
    std::shuffle(groups[g]->begin(), groups[g]->end(), rng);
    for (std::size_t i = 0; i < groups[g]->size(); ++i) {
      (i < quota[g] ? plan.trainPatients : plan.testPatients).insert((*groups[g])[i]);
    }
  }
  return plan;
}

SplitPlan splitPatients(const FeatureSet& data, double trainFrac, std::uint64_t seed) {
  return splitPatients(data.patientIds(), data.labels(), trainFrac, seed);
}

std::vector<std::set<std::string>> patientFolds(std::span<const std::string> patientIds,
                                                std::span<const int> labels, std::size_t k,
                                                std::uint64_t seed) {
  auto strata = stratify(patientIds, labels);
  const std::size_t total = strata.healthy.size() + strata.unhealthy.size();
  if (k < 2 || k > total) {
    throw ArgumentError("fold count " + std::to_string(k) + " must be in [2, " +
                        std::to_string(total) + "]");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(strata.healthy.begin(), strata.healthy.end(), rng);
  std::shuffle(strata.unhealthy.begin(), strata.unhealthy.end(), rng);
  std::vector<std::set<std::string>> folds(k);
  std::size_t next = 0;
  for (const auto* group : {&strata.healthy, &strata.unhealthy}) {
    for (const auto& pid : *group) {
      folds[next++ % k].insert(pid);
    }
  }
  return folds;
}

std::array<double, 4> classWeights(const std::array<std::size_t, 4>& counts) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (counts[i] == 0) {
      throw ConfigurationError("class '" + labelName(static_cast<CycleLabel>(i)) +
                               "' has no training cycles; augment or oversample it first");
    }
    total += counts[i];
  }
  std::array<double, 4> w{};
  for (std::size_t i = 0; i < 4; ++i) {
    w[i] = static_cast<double>(total) / (4.0 * static_cast<double>(counts[i]));
  }
  return w;
}

} // namespace lungnet::train
