#pragma once

#include <array>
#include <span>

namespace lungnet::train {

struct MetricsReport {
  double se = 0.0;
  double sp = 0.0;
  double score = 0.0;
  double macroPrecision = 0.0;
  double macroRecall = 0.0;
  double macroF1 = 0.0;
  std::array<double, 4> precision{};
  std::array<double, 4> recall{};
  std::array<double, 4> f1{};
  /// confusion[true][predicted].
  std::array<std::array<std::size_t, 4>, 4> confusion{};
  std::size_t count = 0;
};

/**
 * Se = correct abnormal / all abnormal, Sp = correct normal / all normal,
 * score = (Se + Sp) / 2, plus per-class and macro precision/recall/F1 with
 * 0 for empty denominators. Throws DimensionError for length mismatch,
 * InputError for labels outside 0..3 and UndefinedMetricError when there is
 * no normal or no abnormal cycle.
 */
MetricsReport evaluateMetrics(std::span<const int> predictions, std::span<const int> labels);

} // namespace lungnet::train
