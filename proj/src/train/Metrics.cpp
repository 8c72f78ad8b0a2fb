#include "lungnet/train/Metrics.h"

#include <string>

#include "lungnet/common/Errors.h"

namespace lungnet::train {

MetricsReport evaluateMetrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("predictions and labels differ in length");
  }
  MetricsReport r;
  r.count = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y > 3 || p < 0 || p > 3) {
      throw InputError("class index out of range at position " + std::to_string(i));
    }
    ++r.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }

  std::array<std::size_t, 4> rowTotal{}, colTotal{};
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t p = 0; p < 4; ++p) {
      rowTotal[t] += r.confusion[t][p];
      colTotal[p] += r.confusion[t][p];
    }
  }
  const std::size_t normalTotal = rowTotal[0];
  const std::size_t abnormalTotal = rowTotal[1] + rowTotal[2] + rowTotal[3];
  if (normalTotal == 0) {
    throw UndefinedMetricError("specificity is undefined without normal cycles");
  }
  if (abnormalTotal == 0) {
    throw UndefinedMetricError("sensitivity is undefined without abnormal cycles");
  }
  const std::size_t abnormalOk = r.confusion[1][1] + r.confusion[2][2] + r.confusion[3][3];
  r.se = static_cast<double>(abnormalOk) / static_cast<double>(abnormalTotal);
  r.sp = static_cast<double>(r.confusion[0][0]) / static_cast<double>(normalTotal);
  r.score = (r.se + r.sp) / 2.0;

  for (std::size_t c = 0; c < 4; ++c) {
    const auto tp = static_cast<double>(r.confusion[c][c]);
    r.precision[c] = colTotal[c] ? tp / static_cast<double>(colTotal[c]) : 0.0;
    r.recall[c] = rowTotal[c] ? tp / static_cast<double>(rowTotal[c]) : 0.0;
    const double denom = r.precision[c] + r.recall[c];
    r.f1[c] = denom > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / denom : 0.0;
    r.macroPrecision += r.precision[c] / 4.0;
    r.macroRecall += r.recall[c] / 4.0;
    r.macroF1 += r.f1[c] / 4.0;
  }
  return r;
}

} // namespace lungnet::train
