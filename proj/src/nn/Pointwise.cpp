#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lungnet/common/Errors.h"
#include "lungnet/nn/Layer.h"

namespace lungnet::nn {

// ---------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(std::size_t ph, std::size_t pw) : ph_(ph), pw_(pw) {
  if (ph == 0 || pw == 0) {
    throw ArgumentError("maxpool2d window must be positive");
  }
}

std::string MaxPool2d::descriptor() const {
  return "maxpool2d ph=" + std::to_string(ph_) + " pw=" + std::to_string(pw_);
}

Shape MaxPool2d::outputShape(const Shape& input) const {
  if (input.size() != 4) {
    throw DimensionError("maxpool2d expects [B,C,H,W], got " + shapeToString(input));
  }
  // Ragged edges are padded with -inf, so partial windows still produce output.
  return {input[0], input[1], (input[2] + ph_ - 1) / ph_, (input[3] + pw_ - 1) / pw_};
}

std::uint64_t MaxPool2d::flops(const Shape& input) const {
  outputShape(input);
  return shapeNumel(input);
}

Tensor MaxPool2d::forward(const Tensor& input, const ForwardContext& /* ctx */) {
  const auto outShape = outputShape(input.shape());
  const std::size_t h = input.dim(2), w = input.dim(3);
  const std::size_t oh = outShape[2], ow = outShape[3];
  const std::size_t planes = input.dim(0) * input.dim(1);
  Tensor out(outShape);
  argmax_.assign(out.size(), 0);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = input.data().data() + p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t bestIdx = (oy * ph_) * w + ox * pw_;
        for (std::size_t y = oy * ph_; y < std::min(h, (oy + 1) * ph_); ++y) {
          for (std::size_t x = ox * pw_; x < std::min(w, (ox + 1) * pw_); ++x) {
            if (src[y * w + x] > best) {
              best = src[y * w + x];
              bestIdx = y * w + x;
            }
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = best;
        argmax_[o] = p * h * w + bestIdx;
      }
    }
  }
  inputShape_ = input.shape();
  cached_ = true;
  return out;
}

Tensor MaxPool2d::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  if (gradOutput.size() != argmax_.size()) {
    throw DimensionError("maxpool2d backward: gradient shape mismatch");
  }
  Tensor gradInput(inputShape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) {
    gradInput[argmax_[o]] += gradOutput[o];
  }
  return gradInput;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t channels) : channels_(channels) {
  if (channels == 0) {
    throw ArgumentError("batchnorm needs at least one channel");
  }
  params_.push_back({"gamma", Tensor({channels}, 1.0)});
  params_.push_back({"beta", Tensor({channels}, 0.0)});
  buffers_.push_back({"running_mean", Tensor({channels}, 0.0)});
  buffers_.push_back({"running_var", Tensor({channels}, 1.0)});
}

std::string BatchNorm::descriptor() const {
  return "batchnorm channels=" + std::to_string(channels_);
}

void BatchNorm::initialize(std::mt19937_64& /* rng */) {
  params_[0].value.fill(1.0);
  params_[1].value.fill(0.0);
  buffers_[0].value.fill(0.0);
  buffers_[1].value.fill(1.0);
}

Shape BatchNorm::outputShape(const Shape& input) const {
  if (input.size() < 2 || input[1] != channels_) {
    throw DimensionError(
        "batchnorm expects channel axis of size " + std::to_string(channels_) + ", got " +
        shapeToString(input));
  }
  return input;
}

std::uint64_t BatchNorm::flops(const Shape& input) const {
  return 4ull * shapeNumel(outputShape(input));
}

Tensor BatchNorm::forward(const Tensor& input, const ForwardContext& ctx) {
  outputShape(input.shape());
  const std::size_t batch = input.dim(0);
  const std::size_t inner = input.size() / (batch * channels_);
  const std::size_t count = batch * inner;
  const auto gamma = params_[0].value.data();
  const auto beta = params_[1].value.data();
  auto runMean = buffers_[0].value.data();
  auto runVar = buffers_[1].value.data();

  // Frozen layers always normalize with their running statistics.
  batchStats_ = ctx.mode == Mode::Train && trainable_;
  Tensor out(input.shape());
  xhat_.assign(input.size(), 0.0);
  invStd_.assign(channels_, 0.0);
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean = 0.0, var = 0.0;
    if (batchStats_) {
      for (std::size_t b = 0; b < batch; ++b) {
        const double* x = input.data().data() + (b * channels_ + c) * inner;
        for (std::size_t k = 0; k < inner; ++k) {
          mean += x[k];
        }
      }
      mean /= static_cast<double>(count);
      for (std::size_t b = 0; b < batch; ++b) {
        const double* x = input.data().data() + (b * channels_ + c) * inner;
        for (std::size_t k = 0; k < inner; ++k) {
          var += (x[k] - mean) * (x[k] - mean);
        }
      }
      var /= static_cast<double>(count);
      runMean[c] = kMomentum * runMean[c] + (1.0 - kMomentum) * mean;
      runVar[c] = kMomentum * runVar[c] + (1.0 - kMomentum) * var;
    } else {
      mean = runMean[c];
      var = runVar[c];
    }
    const double inv = 1.0 / std::sqrt(var + kEpsilon);
    invStd_[c] = inv;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * channels_ + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) {
        const double xh = (input[base + k] - mean) * inv;
        xhat_[base + k] = xh;
        out[base + k] = gamma[c] * xh + beta[c];
      }
    }
  }
  inputShape_ = input.shape();
  cached_ = true;
  return out;
}

Tensor BatchNorm::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  if (gradOutput.shape() != inputShape_) {
    throw DimensionError("batchnorm backward: gradient shape mismatch");
  }
  const std::size_t batch = inputShape_[0];
  const std::size_t inner = gradOutput.size() / (batch * channels_);
  const double count = static_cast<double>(batch * inner);
  const auto gamma = params_[0].value.data();
  Tensor gradInput(inputShape_);
  for (std::size_t c = 0; c < channels_; ++c) {
    double sumDy = 0.0, sumDyXhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * channels_ + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) {
        sumDy += gradOutput[base + k];
        sumDyXhat += gradOutput[base + k] * xhat_[base + k];
      }
    }
    if (trainable_) {
      gradOf(0)[c] += sumDyXhat;
      gradOf(1)[c] += sumDy;
    }
    const double scale = gamma[c] * invStd_[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * channels_ + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) {
        const double dy = gradOutput[base + k];
        gradInput[base + k] = batchStats_
            ? scale * (dy - sumDy / count - xhat_[base + k] * sumDyXhat / count)
            : scale * dy;
      }
    }
  }
  return gradInput;
}

// ---------------------------------------------------------------- Activation

Activation::Activation(ActivationType type) : type_(type) {}

std::string Activation::descriptor() const {
  switch (type_) {
    case ActivationType::Relu:
      return "activation fn=relu";
    case ActivationType::Tanh:
      return "activation fn=tanh";
    case ActivationType::Sigmoid:
      return "activation fn=sigmoid";
  }
  return "activation";
}

std::uint64_t Activation::flops(const Shape& input) const {
  return shapeNumel(input);
}

Tensor Activation::forward(const Tensor& input, const ForwardContext& /* ctx */) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double x = input[i];
    switch (type_) {
      case ActivationType::Relu:
        out[i] = x > 0.0 ? x : 0.0;
        break;
      case ActivationType::Tanh:
        out[i] = std::tanh(x);
        break;
      case ActivationType::Sigmoid:
        out[i] = 1.0 / (1.0 + std::exp(-x));
        break;
    }
  }
  input_ = input;
  output_ = out;
  cached_ = true;
  return out;
}

Tensor Activation::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  if (gradOutput.shape() != output_.shape()) {
    throw DimensionError("activation backward: gradient shape mismatch");
  }
  Tensor gradInput(gradOutput.shape());
  for (std::size_t i = 0; i < gradOutput.size(); ++i) {
    const double y = output_[i];
    switch (type_) {
      case ActivationType::Relu:
        gradInput[i] = input_[i] > 0.0 ? gradOutput[i] : 0.0;
        break;
      case ActivationType::Tanh:
        gradInput[i] = gradOutput[i] * (1.0 - y * y);
        break;
      case ActivationType::Sigmoid:
        gradInput[i] = gradOutput[i] * y * (1.0 - y);
        break;
    }
  }
  return gradInput;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ArgumentError("dropout rate must lie in [0, 1)");
  }
}

std::string Dropout::descriptor() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "dropout rate=" << rate_;
  return ss.str();
}

Tensor Dropout::forward(const Tensor& input, const ForwardContext& ctx) {
  mask_.assign(input.size(), 1.0);
  if (ctx.mode == Mode::Train && rate_ > 0.0) {
    if (ctx.rng == nullptr) {
      throw StateError("dropout in train mode needs an RNG");
    }
    std::bernoulli_distribution keep(1.0 - rate_);
    const double scale = 1.0 / (1.0 - rate_);
    for (auto& m : mask_) {
      m = keep(*ctx.rng) ? scale : 0.0;
    }
  }
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] * mask_[i];
  }
  cached_ = true;
  return out;
}

Tensor Dropout::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  if (gradOutput.size() != mask_.size()) {
    throw DimensionError("dropout backward: gradient shape mismatch");
  }
  Tensor gradInput(gradOutput.shape());
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    gradInput[i] = gradOutput[i] * mask_[i];
  }
  return gradInput;
}

// ---------------------------------------------------------------- Softmax

std::uint64_t Softmax::flops(const Shape& input) const {
  return shapeNumel(input);
}

Tensor Softmax::forward(const Tensor& input, const ForwardContext& /* ctx */) {
  if (input.rank() != 2) {
    throw DimensionError("softmax expects [B,K], got " + shapeToString(input.shape()));
  }
  const std::size_t rows = input.dim(0), k = input.dim(1);
  Tensor out(input.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = input.data().data() + r * k;
    double* y = out.data().data() + r * k;
    const double m = *std::max_element(x, x + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      y[j] = std::exp(x[j] - m);
      sum += y[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      y[j] /= sum;
    }
  }
  output_ = out;
  cached_ = true;
  return out;
}

Tensor Softmax::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  if (gradOutput.shape() != output_.shape()) {
    throw DimensionError("softmax backward: gradient shape mismatch");
  }
  const std::size_t rows = output_.dim(0), k = output_.dim(1);
  Tensor gradInput(output_.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      dot += gradOutput[r * k + j] * output_[r * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      gradInput[r * k + j] = output_[r * k + j] * (gradOutput[r * k + j] - dot);
    }
  }
  return gradInput;
}

// ---------------------------------------------------------------- SequenceFromMaps

Shape SequenceFromMaps::outputShape(const Shape& input) const {
  if (input.size() != 4) {
    throw DimensionError("sequence_from_maps expects [B,C,H,W], got " + shapeToString(input));
  }
  return {input[0], input[3], input[1] * input[2]};
}

Tensor SequenceFromMaps::forward(const Tensor& input, const ForwardContext& /* ctx */) {
  const auto outShape = outputShape(input.shape());
  const std::size_t batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor out(outShape);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t t = 0; t < w; ++t) {
          out[(b * w + t) * c * h + ci * h + y] = input[((b * c + ci) * h + y) * w + t];
        }
      }
    }
  }
  inputShape_ = input.shape();
  cached_ = true;
  return out;
}

Tensor SequenceFromMaps::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  const std::size_t batch = inputShape_[0], c = inputShape_[1], h = inputShape_[2],
                    w = inputShape_[3];
  if (gradOutput.size() != shapeNumel(inputShape_)) {
    throw DimensionError("sequence_from_maps backward: gradient shape mismatch");
  }
  Tensor gradInput(inputShape_);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t t = 0; t < w; ++t) {
          gradInput[((b * c + ci) * h + y) * w + t] = gradOutput[(b * w + t) * c * h + ci * h + y];
        }
      }
    }
  }
  return gradInput;
}

// ---------------------------------------------------------------- FinalStates

Shape FinalStates::outputShape(const Shape& input) const {
  if (input.size() != 3 || input[2] % 2 != 0) {
    throw DimensionError("final_states expects [B,T,2H], got " + shapeToString(input));
  }
  return {input[0], input[2]};
}

Tensor FinalStates::forward(const Tensor& input, const ForwardContext& /* ctx */) {
  const auto outShape = outputShape(input.shape());
  const std::size_t batch = input.dim(0), steps = input.dim(1), width = input.dim(2);
  const std::size_t half = width / 2;
  Tensor out(outShape);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < half; ++j) {
      out[b * width + j] = input[(b * steps + steps - 1) * width + j];
      out[b * width + half + j] = input[(b * steps) * width + half + j];
    }
  }
  inputShape_ = input.shape();
  cached_ = true;
  return out;
}

Tensor FinalStates::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  const std::size_t batch = inputShape_[0], steps = inputShape_[1], width = inputShape_[2];
  const std::size_t half = width / 2;
  if (gradOutput.shape() != Shape{batch, width}) {
    throw DimensionError("final_states backward: gradient shape mismatch");
  }
  Tensor gradInput(inputShape_);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < half; ++j) {
      gradInput[(b * steps + steps - 1) * width + j] = gradOutput[b * width + j];
      gradInput[(b * steps) * width + half + j] = gradOutput[b * width + half + j];
    }
  }
  return gradInput;
}

} // namespace lungnet::nn
