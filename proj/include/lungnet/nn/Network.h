#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lungnet/nn/Layer.h"

namespace lungnet::nn {

/**
 * Ordered, stage-tagged stack of layers. Copies are deep, so a Network behaves
 * as a value: fine-tuning a copy never touches the original.
 */
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer, int stage);

  std::size_t size() const {
    return layers_.size();
  }
  bool empty() const {
    return layers_.empty();
  }
  Layer& layer(std::size_t i) {
    return *layers_.at(i);
  }
  const Layer& layer(std::size_t i) const {
    return *layers_.at(i);
  }

  /// Full forward pass including a trailing softmax (class probabilities).
  Tensor forward(const Tensor& input, const ForwardContext& ctx);
  /// Forward pass that stops before a trailing softmax layer.
  Tensor forwardLogits(const Tensor& input, const ForwardContext& ctx);
  /// Backpropagates through the layers run by the most recent forward call.
  Tensor backward(const Tensor& gradOutput);

  std::vector<Tensor*> trainableParameters();
  void zeroGrad();
  void setStageTrainable(int stage, bool trainable);
  /// Redraws initial values for the layers of one stage.
  void reinitializeStage(int stage, std::mt19937_64& rng);

  Shape outputShape(const Shape& input) const;

  /// Free-form architecture description carried through serialization.
  const std::string& architecture() const {
    return architecture_;
  }
  void setArchitecture(std::string text) {
    architecture_ = std::move(text);
  }

 private:
  Tensor run(const Tensor& input, const ForwardContext& ctx, std::size_t count);

  std::vector<std::unique_ptr<Layer>> layers_;
  std::string architecture_;
  std::size_t executed_ = 0;
};

/// Index of the largest entry in each row of a [B, K] tensor (first on ties).
std::vector<int> argmaxRows(const Tensor& scores);

} // namespace lungnet::nn
