#include "lungnet/tuning/PatientTuning.h"

#include <algorithm>
#include <map>
#include <random>

#include "lungnet/common/Errors.h"
#include "lungnet/model/ModelZoo.h"
#include "lungnet/train/Trainer.h"

namespace lungnet::tuning {

PatientRecord patientRecord(const train::FeatureSet& data, const std::string& patientId) {
  PatientRecord rec;
  rec.patientId = patientId;
  const auto idx = data.indicesForPatients({patientId});
  rec.data = data.subset(idx);
  for (std::size_t i = 0; i < rec.data.size(); ++i) {
    const auto& rid = rec.data.recordingId(i);
    if (std::find(rec.recordings.begin(), rec.recordings.end(), rid) == rec.recordings.end()) {
      rec.recordings.push_back(rid);
    }
  }
  return rec;
}

std::vector<PatientRecord> groupByPatient(const train::FeatureSet& data) {
  std::vector<PatientRecord> out;
  for (const auto& pid : data.patients()) {
    out.push_back(patientRecord(data, pid));
  }
  return out;
}

ScreeningResult screenPredictions(const std::string& patientId, const std::vector<int>& preds,
                                  double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ArgumentError("screening threshold must be in [0, 1]");
  }
  if (preds.empty()) {
    throw InputError("patient " + patientId + " has no cycles to screen");
  }
  const auto abnormal = std::count_if(preds.begin(), preds.end(), [](int p) { return p != 0; });
  ScreeningResult r;
  r.patientId = patientId;
  r.threshold = threshold;
  r.abnormalFraction = static_cast<double>(abnormal) / static_cast<double>(preds.size());
  r.verdict = r.abnormalFraction >= threshold ? Verdict::Unhealthy : Verdict::Healthy;
  return r;
}

ScreeningResult screenPatient(nn::Network& net, const PatientRecord& patient, double threshold) {
  if (patient.data.empty()) {
    throw InputError("patient " + patient.patientId + " has no cycles to screen");
  }
  return screenPredictions(patient.patientId, train::predict(net, patient.data), threshold);
}

std::array<double, 4> patientClassWeights(const std::array<std::size_t, 4>& counts) {
  std::size_t total = 0, present = 0;
  for (auto c : counts) {
    total += c;
    present += c > 0 ? 1 : 0;
  }
  std::array<double, 4> w{1.0, 1.0, 1.0, 1.0};
  for (std::size_t i = 0; i < 4; ++i) {
    if (counts[i] > 0) {
      w[i] = static_cast<double>(total) /
          (static_cast<double>(present) * static_cast<double>(counts[i]));
    }
  }
  return w;
}

TuneResult fineTune(const nn::Network& pretrained, const train::FeatureSet& patientData,
                    const TuneConfig& cfg) {
  if (patientData.empty()) {
    throw InputError("fine-tuning needs at least one patient cycle");
  }
  TuneResult result{pretrained, {}, {}};
  auto& net = result.net;
  net.setStageTrainable(1, false);
  net.setStageTrainable(2, false);
  net.setStageTrainable(3, true);
  if (cfg.epochs == 0) {
    return result;
  }
  if (!cfg.warmStart) {
    std::mt19937_64 rng(cfg.seed);
    net.reinitializeStage(3, rng);
  }
  const auto counts = patientData.classCounts();
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) == 1) {
    result.warnings.push_back("patient " + patientData.patientId(0) +
                              " has a single class; the tuned head can only learn that class");
  }
  train::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.batchSize = cfg.batchSize;
  tc.seed = cfg.seed;
  tc.classWeights = patientClassWeights(counts);
  result.lossCurve = train::train(net, patientData, tc).lossCurve;
  return result;
}

double tunedParameterFraction(const nn::Network& net) {
  const auto all = model::countParams(net);
  return all ? static_cast<double>(model::countParams(net, model::ParamFilter::Stage, 3)) /
          static_cast<double>(all)
             : 0.0;
}

std::array<double, 4> majorityClassBaseline(const std::array<std::size_t, 4>& counts) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    if (counts[i] > counts[best]) {
      best = i;
    }
  }
  if (counts[best] == 0) {
    throw InputError("majority class is undefined for an all-zero count vector");
  }
  std::array<double, 4> p{};
  p[best] = 1.0;
  return p;
}

LooResult looValidate(const nn::Network& pretrained, const PatientRecord& patient,
                      const TuneConfig& cfg, const FoldObserver& onFold) {
  LooResult r;
  r.patientId = patient.patientId;
  if (patient.recordings.size() < 2) {
    r.skipped = true;
    r.notice = "patient " + patient.patientId + " has " +
        std::to_string(patient.recordings.size()) + " recording(s); at least 2 are needed";
    return r;
  }
  for (const auto& heldOut : patient.recordings) {
    std::vector<std::size_t> tuneIdx, testIdx;
    for (std::size_t i = 0; i < patient.data.size(); ++i) {
      (patient.data.recordingId(i) == heldOut ? testIdx : tuneIdx).push_back(i);
    }
    auto tuned = fineTune(pretrained, patient.data.subset(tuneIdx), cfg).net;
    const auto test = patient.data.subset(testIdx);
    const auto preds = train::predict(tuned, test);
    r.predictions.insert(r.predictions.end(), preds.begin(), preds.end());
    r.labels.insert(r.labels.end(), test.labels().begin(), test.labels().end());
    r.folds.push_back({heldOut, tuneIdx.size(), testIdx.size()});
    if (onFold) {
      onFold(r.folds.back(), tuned);
    }
  }
  try {
    r.report = train::evaluateMetrics(r.predictions, r.labels);
  } catch (const UndefinedMetricError& e) {
    r.notice = e.what();
  }
  return r;
}

} // namespace lungnet::tuning
