#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

#include "lungnet/common/Errors.h"
#include "lungnet/nn/Layer.h"

namespace lungnet::nn {

namespace {
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
} // namespace

Conv2d::Conv2d(std::size_t inChannels, std::size_t filters, std::size_t kh, std::size_t kw,
               Padding padding)
    : inChannels_(inChannels), filters_(filters), kh_(kh), kw_(kw), padding_(padding) {
  if (inChannels == 0 || filters == 0 || kh == 0 || kw == 0) {
    throw ArgumentError("conv2d dimensions must be positive");
  }
  params_.push_back({"weight", Tensor({filters, inChannels, kh, kw})});
  params_.push_back({"bias", Tensor({filters})});
}

std::string Conv2d::descriptor() const {
  std::ostringstream ss;
  ss << "conv2d in=" << inChannels_ << " filters=" << filters_ << " kh=" << kh_
     << " kw=" << kw_ << " padding=" << (padding_ == Padding::Same ? "same" : "valid");
  return ss.str();
}

void Conv2d::initialize(std::mt19937_64& rng) {
  const double fanIn = static_cast<double>(inChannels_ * kh_ * kw_);
  std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fanIn), std::sqrt(6.0 / fanIn));
  for (auto& w : params_[0].value.data()) {
    w = dist(rng);
  }
  params_[1].value.fill(0.0);
}

Conv2d::Geometry Conv2d::geometry(const Shape& input) const {
  if (input.size() != 4) {
    throw DimensionError("conv2d expects [B,C,H,W], got " + shapeToString(input));
  }
  if (input[1] != inChannels_) {
    throw DimensionError(
        "conv2d input has " + std::to_string(input[1]) + " channels, kernel expects " +
        std::to_string(inChannels_));
  }
  Geometry g{};
  g.h = input[2];
  g.w = input[3];
  std::size_t padH = 0, padW = 0;
  if (padding_ == Padding::Same) {
    padH = kh_ - 1;
    padW = kw_ - 1;
    g.padTop = padH / 2;
    g.padLeft = padW / 2;
  }
  if (kh_ > g.h + padH || kw_ > g.w + padW) {
    throw DimensionError("conv2d kernel larger than padded input " + shapeToString(input));
  }
  g.outH = g.h + padH - kh_ + 1;
  g.outW = g.w + padW - kw_ + 1;
  return g;
}

Shape Conv2d::outputShape(const Shape& input) const {
  auto g = geometry(input);
  return {input[0], filters_, g.outH, g.outW};
}

std::uint64_t Conv2d::flops(const Shape& input) const {
  auto g = geometry(input);
  return 2ull * kh_ * kw_ * inChannels_ * filters_ * g.outH * g.outW;
}

// cols is [C*kh*kw, outH*outW], row-major.
void Conv2d::im2col(const double* image, const Geometry& g, double* cols) const {
  const std::size_t spatial = g.outH * g.outW;
  std::size_t row = 0;
  for (std::size_t c = 0; c < inChannels_; ++c) {
    const double* plane = image + c * g.h * g.w;
    for (std::size_t ki = 0; ki < kh_; ++ki) {
      for (std::size_t kj = 0; kj < kw_; ++kj, ++row) {
        double* dst = cols + row * spatial;
        for (std::size_t oy = 0; oy < g.outH; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(g.padTop);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst + oy * g.outW, dst + (oy + 1) * g.outW, 0.0);
            continue;
          }
          for (std::size_t ox = 0; ox < g.outW; ++ox) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(g.padLeft);
            dst[oy * g.outW + ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                ? 0.0
                : plane[static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void Conv2d::col2im(const double* cols, const Geometry& g, double* image) const {
  const std::size_t spatial = g.outH * g.outW;
  std::size_t row = 0;
  for (std::size_t c = 0; c < inChannels_; ++c) {
    double* plane = image + c * g.h * g.w;
    for (std::size_t ki = 0; ki < kh_; ++ki) {
      for (std::size_t kj = 0; kj < kw_; ++kj, ++row) {
        const double* src = cols + row * spatial;
        for (std::size_t oy = 0; oy < g.outH; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(g.padTop);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            continue;
          }
          for (std::size_t ox = 0; ox < g.outW; ++ox) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(g.padLeft);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) {
              plane[static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)] +=
                  src[oy * g.outW + ox];
            }
          }
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& input, const ForwardContext& /* ctx */) {
  const auto g = geometry(input.shape());
  const std::size_t batch = input.dim(0);
  const std::size_t patch = inChannels_ * kh_ * kw_;
  const std::size_t spatial = g.outH * g.outW;
  Tensor out({batch, filters_, g.outH, g.outW});
  Buffer cols(patch * spatial);
  ConstMatMap weight(params_[0].value.data().data(), filters_, patch);
  const auto& bias = params_[1].value;
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(input.data().data() + b * inChannels_ * g.h * g.w, g, cols.data());
    MatMap y(out.data().data() + b * filters_ * spatial, filters_, spatial);
    y.noalias() = weight * ConstMatMap(cols.data(), patch, spatial);
    for (std::size_t f = 0; f < filters_; ++f) {
      y.row(f).array() += bias[f];
    }
  }
  input_ = input;
  cached_ = true;
  return out;
}

Tensor Conv2d::backward(const Tensor& gradOutput) {
  requireCache(cached_);
  const auto g = geometry(input_.shape());
  const std::size_t batch = input_.dim(0);
  const std::size_t patch = inChannels_ * kh_ * kw_;
  const std::size_t spatial = g.outH * g.outW;
  if (gradOutput.shape() != Shape{batch, filters_, g.outH, g.outW}) {
    throw DimensionError("conv2d backward: gradient shape " + shapeToString(gradOutput.shape()));
  }
  Tensor gradInput(input_.shape());
  Buffer cols(patch * spatial);
  Buffer gradCols(patch * spatial);
  ConstMatMap weight(params_[0].value.data().data(), filters_, patch);
  for (std::size_t b = 0; b < batch; ++b) {
    ConstMatMap dy(gradOutput.data().data() + b * filters_ * spatial, filters_, spatial);
    if (trainable_) {
      im2col(input_.data().data() + b * inChannels_ * g.h * g.w, g, cols.data());
      MatMap dw(gradOf(0).data(), filters_, patch);
      dw.noalias() += dy * ConstMatMap(cols.data(), patch, spatial).transpose();
      auto db = gradOf(1);
      for (std::size_t f = 0; f < filters_; ++f) {
        const double* row = dy.data() + f * spatial;
        db[f] += std::accumulate(row, row + spatial, 0.0);
      }
    }
    MatMap dcols(gradCols.data(), patch, spatial);
    dcols.noalias() = weight.transpose() * dy;
    col2im(gradCols.data(), g, gradInput.data().data() + b * inChannels_ * g.h * g.w);
  }
  return gradInput;
}

} // namespace lungnet::nn
