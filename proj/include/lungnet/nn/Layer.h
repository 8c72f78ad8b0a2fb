#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lungnet/nn/Tensor.h"

namespace lungnet::nn {

enum class Mode { Train, Infer };

/// Per-call forward state. The RNG is only consumed by dropout in train mode.
struct ForwardContext {
  Mode mode = Mode::Infer;
  std::mt19937_64* rng = nullptr;
};

enum class LayerKind {
  Conv2d,
  BatchNorm,
  MaxPool2d,
  Activation,
  BiLstm,
  Dense,
  Dropout,
  Softmax,
  SequenceFromMaps,
  FinalStates,
};

std::string layerKindName(LayerKind kind);

struct Parameter {
  std::string name;
  Tensor value;
};

/**
 * A differentiable network layer.
 *
 * forward() caches whatever backward() needs; backward() takes dLoss/dOutput,
 * accumulates dLoss/dParam into each parameter's gradient (trainable layers
 * only) and returns dLoss/dInput. Calling backward() without a preceding
 * forward() throws StateError.
 */
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  /// Hyperparameters as "kind key=value ..."; parsed back by makeLayer().
  virtual std::string descriptor() const = 0;
  virtual Shape outputShape(const Shape& input) const = 0;
  /// Inference FLOPs for one sample whose shape (with leading batch 1) is given.
  virtual std::uint64_t flops(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& input, const ForwardContext& ctx) = 0;
  virtual Tensor backward(const Tensor& gradOutput) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  /// Draws fresh initial parameter values.
  virtual void initialize(std::mt19937_64& /* rng */) {}

  std::vector<Parameter>& params() {
    return params_;
  }
  const std::vector<Parameter>& params() const {
    return params_;
  }
  /// Non-trainable state that is still part of the model (running statistics).
  std::vector<Parameter>& buffers() {
    return buffers_;
  }
  const std::vector<Parameter>& buffers() const {
    return buffers_;
  }
  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  std::size_t paramCount() const;

  int stage() const {
    return stage_;
  }
  void setStage(int stage) {
    stage_ = stage;
  }
  bool trainable() const {
    return trainable_;
  }
  /// Freezing drops any accumulated parameter gradients.
  void setTrainable(bool trainable);
  void zeroGrad();

 protected:
  void requireCache(bool present) const;
  /// Allocates (if needed) and returns the gradient buffer of a parameter.
  std::span<double> gradOf(std::size_t paramIndex);

  std::vector<Parameter> params_;
  std::vector<Parameter> buffers_;
  int stage_ = 1;
  bool trainable_ = true;
};

enum class Padding { Valid, Same };

class Conv2d : public Layer {
 public:
  Conv2d(std::size_t inChannels, std::size_t filters, std::size_t kh, std::size_t kw,
         Padding padding = Padding::Valid);

  LayerKind kind() const override {
    return LayerKind::Conv2d;
  }
  std::string descriptor() const override;
  Shape outputShape(const Shape& input) const override;
  std::uint64_t flops(const Shape& input) const override;
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Conv2d>(*this);
  }
  void initialize(std::mt19937_64& rng) override;

  std::size_t inChannels() const {
    return inChannels_;
  }
  std::size_t filters() const {
    return filters_;
  }

 private:
  struct Geometry {
    std::size_t h, w, outH, outW, padTop, padLeft;
  };
  Geometry geometry(const Shape& input) const;
  void im2col(const double* image, const Geometry& g, double* cols) const;
  void col2im(const double* cols, const Geometry& g, double* image) const;

  std::size_t inChannels_, filters_, kh_, kw_;
  Padding padding_;
  Tensor input_;
  bool cached_ = false;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(std::size_t ph, std::size_t pw);

  LayerKind kind() const override {
    return LayerKind::MaxPool2d;
  }
  std::string descriptor() const override;
  Shape outputShape(const Shape& input) const override;
  std::uint64_t flops(const Shape& input) const override;
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<MaxPool2d>(*this);
  }

 private:
  std::size_t ph_, pw_;
  Shape inputShape_;
  std::vector<std::size_t> argmax_;
  bool cached_ = false;
};

/// Per-channel normalization over every axis except axis 1.
class BatchNorm : public Layer {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEpsilon = 1e-5;

  explicit BatchNorm(std::size_t channels);

  LayerKind kind() const override {
    return LayerKind::BatchNorm;
  }
  std::string descriptor() const override;
  Shape outputShape(const Shape& input) const override;
  std::uint64_t flops(const Shape& input) const override;
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<BatchNorm>(*this);
  }
  void initialize(std::mt19937_64& rng) override;

 private:
  std::size_t channels_;
  Shape inputShape_;
  std::vector<double> xhat_;
  std::vector<double> invStd_;
  bool batchStats_ = false;
  bool cached_ = false;
};

enum class ActivationType { Relu, Tanh, Sigmoid };

class Activation : public Layer {
 public:
  explicit Activation(ActivationType type);

  LayerKind kind() const override {
    return LayerKind::Activation;
  }
  std::string descriptor() const override;
  Shape outputShape(const Shape& input) const override {
    return input;
  }
  std::uint64_t flops(const Shape& input) const override;
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Activation>(*this);
  }

  ActivationType type() const {
    return type_;
  }

 private:
  ActivationType type_;
  Tensor input_;
  Tensor output_;
  bool cached_ = false;
};

/**
 * Bidirectional LSTM over [B, T, D] producing [B, T, 2H]. The first H output
 * features at step t come from the forward cell, the last H from the backward
 * cell run over the reversed sequence. Gate order inside the 4H blocks is
 * input, forget, candidate, output.
 */
class BiLstm : public Layer {
 public:
  BiLstm(std::size_t inputSize, std::size_t hidden);

  LayerKind kind() const override {
    return LayerKind::BiLstm;
  }
  std::string descriptor() const override;
  Shape outputShape(const Shape& input) const override;
  std::uint64_t flops(const Shape& input) const override;
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<BiLstm>(*this);
  }
  void initialize(std::mt19937_64& rng) override;

  std::size_t inputSize() const {
    return inputSize_;
  }
  std::size_t hidden() const {
    return hidden_;
  }

 private:
  struct DirectionCache {
    // Per step, row-major [B, H] blocks.
    std::vector<std::vector<double>> i, f, g, o, c, tanhC, hPrev, cPrev;
  };
  void runDirection(const Tensor& input, bool reverse, std::size_t paramBase,
                    DirectionCache& cache, Tensor& output, std::size_t outOffset) const;
  void backDirection(const Tensor& gradOutput, bool reverse, std::size_t paramBase,
                     const DirectionCache& cache, std::size_t outOffset, Tensor& gradInput);

  std::size_t inputSize_, hidden_;
  Tensor input_;
  DirectionCache fwd_, bwd_;
  bool cached_ = false;
};

class Dense : public Layer {
 public:
  Dense(std::size_t inputSize, std::size_t units);

  LayerKind kind() const override {
    return LayerKind::Dense;
  }
  std::string descriptor() const override;
  Shape outputShape(const Shape& input) const override;
  std::uint64_t flops(const Shape& input) const override;
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Dense>(*this);
  }
  void initialize(std::mt19937_64& rng) override;

 private:
  std::size_t inputSize_, units_;
  Tensor input_;
  bool cached_ = false;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate), inference is identity.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate);

  LayerKind kind() const override {
    return LayerKind::Dropout;
  }
  std::string descriptor() const override;
  Shape outputShape(const Shape& input) const override {
    return input;
  }
  std::uint64_t flops(const Shape&) const override {
    return 0;
  }
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Dropout>(*this);
  }

  double rate() const {
    return rate_;
  }

 private:
  double rate_;
  std::vector<double> mask_;
  bool cached_ = false;
};

/// Row-wise softmax over the last axis of [B, K].
class Softmax : public Layer {
 public:
  Softmax() = default;

  LayerKind kind() const override {
    return LayerKind::Softmax;
  }
  std::string descriptor() const override {
    return "softmax";
  }
  Shape outputShape(const Shape& input) const override {
    return input;
  }
  std::uint64_t flops(const Shape& input) const override;
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Softmax>(*this);
  }

 private:
  Tensor output_;
  bool cached_ = false;
};

/// [B, C, H, W] feature maps to a [B, W, C*H] sequence (time = W).
class SequenceFromMaps : public Layer {
 public:
  LayerKind kind() const override {
    return LayerKind::SequenceFromMaps;
  }
  std::string descriptor() const override {
    return "sequence_from_maps";
  }
  Shape outputShape(const Shape& input) const override;
  std::uint64_t flops(const Shape&) const override {
    return 0;
  }
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<SequenceFromMaps>(*this);
  }

 private:
  Shape inputShape_;
  bool cached_ = false;
};

/// Summary of a [B, T, 2H] bidirectional sequence: the forward half at the
/// last step joined with the backward half at the first step, giving [B, 2H].
class FinalStates : public Layer {
 public:
  LayerKind kind() const override {
    return LayerKind::FinalStates;
  }
  std::string descriptor() const override {
    return "final_states";
  }
  Shape outputShape(const Shape& input) const override;
  std::uint64_t flops(const Shape&) const override {
    return 0;
  }
  Tensor forward(const Tensor& input, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& gradOutput) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<FinalStates>(*this);
  }

 private:
  Shape inputShape_;
  bool cached_ = false;
};

/// Rebuilds a layer from its descriptor(); parameters are zero-initialized.
std::unique_ptr<Layer> makeLayer(const std::string& descriptor);

} // namespace lungnet::nn
