#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lungnet/audio/Cycles.h"
#include "lungnet/audio/Spectrogram.h"
#include "lungnet/nn/Tensor.h"

namespace lungnet::train {

/// Fixed-width log-Mel features with their labels and provenance.
class FeatureSet {
 public:
  FeatureSet() = default;
  FeatureSet(std::size_t nMels, std::size_t frames) : nMels_(nMels), frames_(frames) {}

  void add(const audio::MelSpectrogram& spec, int label, std::string patientId,
           std::string recordingId);
  /// Adds a raw [nMels * frames] feature image.
  void add(std::span<const double> image, int label, std::string patientId,
           std::string recordingId);

  std::size_t size() const {
    return labels_.size();
  }
  bool empty() const {
    return labels_.empty();
  }
  std::size_t nMels() const {
    return nMels_;
  }
  std::size_t frames() const {
    return frames_;
  }
  int label(std::size_t i) const {
    return labels_.at(i);
  }
  const std::vector<int>& labels() const {
    return labels_;
  }
  const std::string& patientId(std::size_t i) const {
    return patientIds_.at(i);
  }
  const std::vector<std::string>& patientIds() const {
    return patientIds_;
  }
  const std::string& recordingId(std::size_t i) const {
    return recordingIds_.at(i);
  }
  std::span<const double> image(std::size_t i) const;

  /// [indices.size(), 1, nMels, frames] input batch.
  nn::Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<int> labelsOf(std::span<const std::size_t> indices) const;

  FeatureSet subset(std::span<const std::size_t> indices) const;
  /// Indices of rows whose patient is (or with keep=false, is not) in the set.
  std::vector<std::size_t> indicesForPatients(const std::set<std::string>& patients,
                                              bool keep = true) const;
  std::set<std::string> patients() const;
  std::array<std::size_t, 4> classCounts() const;

 private:
  std::size_t nMels_ = 0;
  std::size_t frames_ = 0;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<std::string> patientIds_;
  std::vector<std::string> recordingIds_;
};

/// Mel spectrogram + fixWidth for every cycle.
FeatureSet extractFeatures(std::span<const audio::BreathingCycle> cycles,
                           const audio::MelConfig& cfg = {}, std::size_t width = 128);

struct SplitPlan {
  std::set<std::string> trainPatients;
  std::set<std::string> testPatients;
  std::uint64_t seed = 0;
};

/**
 * Patient-level split. round(frac * P) patients go to training (at least one
 * patient on each side). Patients are stratified into healthy (all cycles
 * normal) and unhealthy, and the training quota is shared between the two
 * strata by largest remainder.
 */
SplitPlan splitPatients(std::span<const std::string> patientIds, std::span<const int> labels,
                        double trainFrac, std::uint64_t seed);
SplitPlan splitPatients(const FeatureSet& data, double trainFrac, std::uint64_t seed);

/// Patient partition into k folds, dealt round-robin from each shuffled
/// health stratum. Throws ArgumentError when k exceeds the patient count.
std::vector<std::set<std::string>> patientFolds(std::span<const std::string> patientIds,
                                                std::span<const int> labels, std::size_t k,
                                                std::uint64_t seed);

/// w_i = total / (4 * count_i). Throws ConfigurationError for a zero count.
std::array<double, 4> classWeights(const std::array<std::size_t, 4>& counts);

} // namespace lungnet::train
