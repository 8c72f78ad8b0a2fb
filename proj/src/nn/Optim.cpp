#include "lungnet/nn/Optim.h"

#include <algorithm>
#include <cmath>

#include "lungnet/common/Errors.h"

namespace lungnet::nn {

LossResult softmaxCrossEntropy(const Tensor& logits, std::span<const int> labels,
                               std::span<const double> classWeights) {
  if (logits.rank() != 2) {
    throw DimensionError("cross-entropy expects [B,K] logits");
  }
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("cross-entropy: label count does not match batch");
  }
  if (classWeights.size() != k) {
    throw DimensionError("cross-entropy: need one weight per class");
  }
  for (double w : classWeights) {
    if (!(w > 0.0)) {
      throw InputError("cross-entropy: class weights must be positive");
    }
  }
  LossResult result{0.0, Tensor(logits.shape())};
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw InputError("cross-entropy: label out of range");
    }
    const double* x = logits.data().data() + b * k;
    const double m = *std::max_element(x, x + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      sum += std::exp(x[j] - m);
    }
    const double logSum = std::log(sum) + m;
    const double w = classWeights[static_cast<std::size_t>(y)];
    result.loss += w * (logSum - x[y]);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(x[j] - logSum);
      result.gradLogits[b * k + j] =
          w * (p - (static_cast<int>(j) == y ? 1.0 : 0.0)) / static_cast<double>(batch);
    }
  }
  result.loss /= static_cast<double>(batch);
  return result;
}

LossResult softmaxCrossEntropy(const Tensor& logits, const Tensor& targets,
                               std::span<const double> classWeights) {
  if (targets.shape() != logits.shape()) {
    throw DimensionError("cross-entropy: targets must match logits shape");
  }
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  std::vector<int> labels(batch, -1);
  for (std::size_t b = 0; b < batch; ++b) {
    int hot = -1;
    for (std::size_t j = 0; j < k; ++j) {
      const double t = targets[b * k + j];
      if (t == 1.0 && hot < 0) {
        hot = static_cast<int>(j);
      } else if (t != 0.0) {
        hot = -2;
        break;
      }
    }
    if (hot < 0) {
      throw InputError("cross-entropy: target row " + std::to_string(b) + " is not one-hot");
    }
    labels[b] = hot;
  }
  return softmaxCrossEntropy(logits, labels, classWeights);
}

AdamState makeAdamState(std::span<Tensor* const> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const Tensor* p : params) {
    state.m.emplace_back(p->shape());
    state.v.emplace_back(p->shape());
  }
  return state;
}

void adamStep(std::span<Tensor* const> params, AdamState& state) {
  if (params.size() != state.m.size()) {
    throw DimensionError("adam: parameter count does not match optimizer state");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != state.m[i].shape()) {
      throw DimensionError("adam: state shape mismatch for parameter " + std::to_string(i));
    }
    if (!params[i]->hasGrad()) {
      continue;
    }
    for (double g : params[i]->grad()) {
      if (std::isnan(g)) {
        throw NumericError("adam: NaN gradient in parameter " + std::to_string(i));
      }
    }
  }
  const auto& cfg = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (!p.hasGrad()) {
      continue;
    }
    const auto g = p.grad();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    auto w = p.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      w[j] -= cfg.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.epsilon);
    }
  }
}

} // namespace lungnet::nn
