#include <cmath>

#include <Eigen/Core>

#include "lungnet/common/Errors.h"
#include "lungnet/nn/Layer.h"

namespace lungnet::nn {

namespace {
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

double sigmoid(double x) {
  return 1.0 / (1.0 + std::exp(-x));
}
} // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t inputSize, std::size_t units) : inputSize_(inputSize), units_(units) {
  if (inputSize == 0 || units == 0) {
    throw ArgumentError("dense dimensions must be positive");
  }
  params_.push_back({"weight", Tensor({inputSize, units})});
  params_.push_back({"bias", Tensor({units})});
}

std::string Dense::descriptor() const {
  return "dense in=" + std::to_string(inputSize_) + " units=" + std::to_string(units_);
}

void Dense::initialize(std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(inputSize_));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& w : params_[0].value.data()) {
    w = dist(rng);
  }
  params_[1].value.fill(0.0);
}

Shape Dense::outputShape(const Shape& input) const {
  if (input.size() != 2 || input[1] != inputSize_) {
    throw DimensionError(
        "dense expects [B," + std::to_string(inputSize_) + "], got " + shapeToString(input));
  }
  return {input[0], units_};
}

std::uint64_t Dense::flops(const Shape& input) const {
  outputShape(input);
  return 2ull * inputSize_ * units_;
}

Tensor Dense::forward(const Tensor& input, const ForwardContext& /* ctx */) {
  const auto outShape = outputShape(input.shape());
  Tensor out(outShape);
  MatMap y(out.data().data(), outShape[0], units_);
  y.noalias() = ConstMatMap(input.data().data(), outShape[0], inputSize_) *
      ConstMatMap(params_[0].value.data().data(), inputSize_, units_);
  for (std::size_t r = 0; r < outShape[0]; ++r) {
    for (std::size_t k = 0; k < units_; ++k) {
      y(r, k) += params_[1].value[k];
    }
  }
  input_ = input;
  cached_ = true;
  return out;
}

Tensor Dense::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  const std::size_t batch = input_.dim(0);
  if (gradOutput.shape() != Shape{batch, units_}) {
    throw DimensionError("dense backward: gradient shape mismatch");
  }
  ConstMatMap dy(gradOutput.data().data(), batch, units_);
  ConstMatMap x(input_.data().data(), batch, inputSize_);
  if (trainable_) {
    MatMap(gradOf(0).data(), inputSize_, units_).noalias() += x.transpose() * dy;
    auto db = gradOf(1);
    for (std::size_t k = 0; k < units_; ++k) {
      for (std::size_t b = 0; b < batch; ++b) {
        db[k] += dy(b, k);
      }
    }
  }
  Tensor gradInput(input_.shape());
  MatMap(gradInput.data().data(), batch, inputSize_).noalias() =
      dy * ConstMatMap(params_[0].value.data().data(), inputSize_, units_).transpose();
  return gradInput;
}

// ---------------------------------------------------------------- BiLstm

BiLstm::BiLstm(std::size_t inputSize, std::size_t hidden)
    : inputSize_(inputSize), hidden_(hidden) {
  if (hidden == 0) {
    throw ArgumentError("bilstm hidden size must be positive");
  }
  if (inputSize == 0) {
    throw ArgumentError("bilstm input size must be positive");
  }
  for (const char* dir : {"fwd", "bwd"}) {
    params_.push_back({std::string(dir) + "_w_ih", Tensor({inputSize, 4 * hidden})});
    params_.push_back({std::string(dir) + "_w_hh", Tensor({hidden, 4 * hidden})});
    params_.push_back({std::string(dir) + "_b", Tensor({4 * hidden})});
  }
}

std::string BiLstm::descriptor() const {
  return "bilstm in=" + std::to_string(inputSize_) + " hidden=" + std::to_string(hidden_);
}

void BiLstm::initialize(std::mt19937_64& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden_));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (std::size_t base : {0u, 3u}) {
    for (auto& w : params_[base].value.data()) {
      w = dist(rng);
    }
    for (auto& w : params_[base + 1].value.data()) {
      w = dist(rng);
    }
    auto bias = params_[base + 2].value.data();
    std::fill(bias.begin(), bias.end(), 0.0);
    // Forget gate starts open.
    std::fill(bias.begin() + hidden_, bias.begin() + 2 * hidden_, 1.0);
  }
}

Shape BiLstm::outputShape(const Shape& input) const {
  if (input.size() != 3 || input[2] != inputSize_) {
    throw DimensionError(
        "bilstm expects [B,T," + std::to_string(inputSize_) + "], got " + shapeToString(input));
  }
  return {input[0], input[1], 2 * hidden_};
}

std::uint64_t BiLstm::flops(const Shape& input) const {
  outputShape(input);
  const std::uint64_t d = inputSize_, h = hidden_, t = input[1];
  return 2ull * (2ull * 4ull * (d * h + h * h) * t);
}

void BiLstm::runDirection(const Tensor& input, bool reverse, std::size_t paramBase,
                          DirectionCache& cache, Tensor& output, std::size_t outOffset) const {
  const std::size_t batch = input.dim(0), steps = input.dim(1);
  const std::size_t h = hidden_, g4 = 4 * hidden_;
  ConstMatMap wih(params_[paramBase].value.data().data(), inputSize_, g4);
  ConstMatMap whh(params_[paramBase + 1].value.data().data(), h, g4);
  const auto bias = params_[paramBase + 2].value.data();

  RowMatrix xw = ConstMatMap(input.data().data(), batch * steps, inputSize_) * wih;
  RowMatrix hState = RowMatrix::Zero(batch, h);
  RowMatrix cState = RowMatrix::Zero(batch, h);
  RowMatrix z(batch, g4);

  for (auto* v : {&cache.i, &cache.f, &cache.g, &cache.o, &cache.c, &cache.tanhC, &cache.hPrev,
                  &cache.cPrev}) {
    v->assign(steps, std::vector<double>(batch * h));
  }
  const std::size_t width = 2 * h;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    z.noalias() = hState * whh;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < g4; ++j) {
        z(b, j) += xw(b * steps + t, j) + bias[j];
      }
    }
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < h; ++j) {
        const std::size_t k = b * h + j;
        const double ig = sigmoid(z(b, j));
        const double fg = sigmoid(z(b, h + j));
        const double gg = std::tanh(z(b, 2 * h + j));
        const double og = sigmoid(z(b, 3 * h + j));
        cache.hPrev[s][k] = hState(b, j);
        cache.cPrev[s][k] = cState(b, j);
        const double c = fg * cState(b, j) + ig * gg;
        const double tc = std::tanh(c);
        cache.i[s][k] = ig;
        cache.f[s][k] = fg;
        cache.g[s][k] = gg;
        cache.o[s][k] = og;
        cache.c[s][k] = c;
        cache.tanhC[s][k] = tc;
        cState(b, j) = c;
        hState(b, j) = og * tc;
        output[(b * steps + t) * width + outOffset + j] = og * tc;
      }
    }
  }
}

Tensor BiLstm::forward(const Tensor& input, const ForwardContext& /* ctx */) {
  const auto outShape = outputShape(input.shape());
  Tensor out(outShape);
  runDirection(input, false, 0, fwd_, out, 0);
  runDirection(input, true, 3, bwd_, out, hidden_);
  input_ = input;
  cached_ = true;
  return out;
}

void BiLstm::backDirection(const Tensor& gradOutput, bool reverse, std::size_t paramBase,
                           const DirectionCache& cache, std::size_t outOffset,
                           Tensor& gradInput) {
  const std::size_t batch = input_.dim(0), steps = input_.dim(1);
  const std::size_t h = hidden_, g4 = 4 * hidden_, width = 2 * hidden_;
  ConstMatMap wih(params_[paramBase].value.data().data(), inputSize_, g4);
  ConstMatMap whh(params_[paramBase + 1].value.data().data(), h, g4);

  RowMatrix dz = RowMatrix::Zero(batch * steps, g4);
  RowMatrix dzStep(batch, g4);
  RowMatrix dhNext = RowMatrix::Zero(batch, h);
  RowMatrix dcNext = RowMatrix::Zero(batch, h);
  RowMatrix hPrev(batch, h);
  RowMatrix dwhh = RowMatrix::Zero(h, g4);

  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < h; ++j) {
        const std::size_t k = b * h + j;
        const double dh = gradOutput[(b * steps + t) * width + outOffset + j] + dhNext(b, j);
        const double ig = cache.i[s][k], fg = cache.f[s][k], gg = cache.g[s][k];
        const double og = cache.o[s][k], tc = cache.tanhC[s][k];
        const double dc = dh * og * (1.0 - tc * tc) + dcNext(b, j);
        dzStep(b, j) = dc * gg * ig * (1.0 - ig);
        dzStep(b, h + j) = dc * cache.cPrev[s][k] * fg * (1.0 - fg);
        dzStep(b, 2 * h + j) = dc * ig * (1.0 - gg * gg);
        dzStep(b, 3 * h + j) = dh * tc * og * (1.0 - og);
        dcNext(b, j) = dc * fg;
        hPrev(b, j) = cache.hPrev[s][k];
      }
    }
    for (std::size_t b = 0; b < batch; ++b) {
      dz.row(b * steps + t) = dzStep.row(b);
    }
    if (trainable_) {
      dwhh.noalias() += hPrev.transpose() * dzStep;
    }
    dhNext.noalias() = dzStep * whh.transpose();
  }

  ConstMatMap x(input_.data().data(), batch * steps, inputSize_);
  if (trainable_) {
    MatMap(gradOf(paramBase).data(), inputSize_, g4).noalias() += x.transpose() * dz;
    MatMap(gradOf(paramBase + 1).data(), h, g4) += dwhh;
    auto db = gradOf(paramBase + 2);
    for (std::size_t j = 0; j < g4; ++j) {
      double sum = 0.0;
      for (Eigen::Index r = 0; r < dz.rows(); ++r) {
        sum += dz(r, j);
      }
      db[j] += sum;
    }
  }
  MatMap(gradInput.data().data(), batch * steps, inputSize_).noalias() += dz * wih.transpose();
}

Tensor BiLstm::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  if (gradOutput.shape() != outputShape(input_.shape())) {
    throw DimensionError("bilstm backward: gradient shape mismatch");
  }
  Tensor gradInput(input_.shape());
  backDirection(gradOutput, false, 0, fwd_, 0, gradInput);
  backDirection(gradOutput, true, 3, bwd_, hidden_, gradInput);
  return gradInput;
}

} // namespace lungnet::nn
