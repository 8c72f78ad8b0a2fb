#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lungnet/nn/Network.h"
#include "lungnet/train/Dataset.h"
#include "lungnet/train/Metrics.h"

namespace lungnet::tuning {

/// All feature rows of one patient.
struct PatientRecord {
  std::string patientId;
  /// Distinct recording ids in first-appearance order.
  std::vector<std::string> recordings;
  train::FeatureSet data;
};

/// Groups a feature set by patient (patients in sorted id order).
std::vector<PatientRecord> groupByPatient(const train::FeatureSet& data);
PatientRecord patientRecord(const train::FeatureSet& data, const std::string& patientId);

enum class Verdict { Healthy, Unhealthy };

struct ScreeningResult {
  std::string patientId;
  double abnormalFraction = 0.0;
  Verdict verdict = Verdict::Healthy;
  double threshold = 0.25;
};

inline constexpr double kDefaultScreeningThreshold = 0.25;

/// Fraction of cycles whose predicted class is not normal; unhealthy iff the
/// fraction reaches the threshold. Throws InputError for a patient without
/// cycles and ArgumentError for a threshold outside [0, 1].
ScreeningResult screenPatient(nn::Network& net, const PatientRecord& patient,
                              double threshold = kDefaultScreeningThreshold);
/// Same decision from already computed class predictions.
ScreeningResult screenPredictions(const std::string& patientId, const std::vector<int>& predictions,
                                  double threshold = kDefaultScreeningThreshold);

struct TuneConfig {
  std::size_t epochs = 30;
  double lr = 1e-4;
  std::size_t batchSize = 16;
  std::uint64_t seed = 0;
  /// Keep the pre-trained stage-3 weights (true) or redraw them (false).
  bool warmStart = true;
};

struct TuneResult {
  nn::Network net;
  std::vector<double> lossCurve;
  std::vector<std::string> warnings;
};

/// Class weights from one patient's label counts: total / (K * count) over
/// the K classes present, 1 for absent classes.
std::array<double, 4> patientClassWeights(const std::array<std::size_t, 4>& counts);

/**
 * Copies the pre-trained network, freezes stages 1 and 2 and retrains stage
 * 3 on the patient's cycles. Zero epochs return an unchanged copy, so a cold
 * start only redraws stage 3 when it is actually trained. A patient with a
 * single class still trains, with a warning.
 */
TuneResult fineTune(const nn::Network& pretrained, const train::FeatureSet& patientData,
                    const TuneConfig& cfg);

/// Share of parameters that fine-tuning updates (stage 3 over all).
double tunedParameterFraction(const nn::Network& net);

/// One-hot vector on the most frequent class, ties to the lowest class index.
/// Throws InputError when every count is 0.
std::array<double, 4> majorityClassBaseline(const std::array<std::size_t, 4>& counts);

struct LooFold {
  std::string heldOutRecording;
  std::size_t tuneSize = 0;
  std::size_t testSize = 0;
};

struct LooResult {
  std::string patientId;
  bool skipped = false;
  std::string notice;
  std::vector<LooFold> folds;
  /// Predictions of each fold model on its held-out recording, pooled in fold order.
  std::vector<int> predictions;
  std::vector<int> labels;
  /// Pooled metrics; empty when Se or Sp is undefined for this patient.
  std::optional<train::MetricsReport> report;
};

/**
 * Leave-one-recording-out validation: fold i fine-tunes a fresh copy of the
 * pre-trained network on every other recording and tests on recording i.
 * Patients with fewer than two recordings are skipped with a notice.
 * `onFold`, when set, sees each fold's tuned network before it is discarded.
 */
using FoldObserver = std::function<void(const LooFold&, const nn::Network&)>;
LooResult looValidate(const nn::Network& pretrained, const PatientRecord& patient,
                      const TuneConfig& cfg, const FoldObserver& onFold = {});

} // namespace lungnet::tuning
