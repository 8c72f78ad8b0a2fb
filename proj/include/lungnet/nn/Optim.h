#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lungnet/nn/Tensor.h"

namespace lungnet::nn {

struct LossResult {
  double loss = 0.0;
  Tensor gradLogits;
};

/**
 * Class-weighted softmax cross-entropy averaged over the batch:
 * loss = mean_b w[y_b] * -log softmax(logits_b)[y_b]. Targets must be one-hot
 * rows; the gradient is exact and computed with max-subtraction.
 */
LossResult softmaxCrossEntropy(const Tensor& logits, const Tensor& targets,
                               std::span<const double> classWeights);
/// Same loss with integer class labels instead of one-hot rows.
LossResult softmaxCrossEntropy(const Tensor& logits, std::span<const int> labels,
                               std::span<const double> classWeights);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t t = 0;
};

AdamState makeAdamState(std::span<Tensor* const> params, const AdamConfig& config = {});

/// One bias-corrected Adam update. Any NaN gradient aborts the step before a
/// parameter is touched; parameters without a gradient are left unchanged.
void adamStep(std::span<Tensor* const> params, AdamState& state);

} // namespace lungnet::nn
