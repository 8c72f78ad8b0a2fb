#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lungnet/nn/Network.h"

namespace lungnet::model {

struct ConvBlockSpec {
  std::size_t filters = 16;
  std::size_t kernelH = 3;
  std::size_t kernelW = 3;
  std::size_t poolH = 2;
  std::size_t poolW = 2;

  bool operator==(const ConvBlockSpec&) const = default;
};

struct ModelSpec {
  std::vector<ConvBlockSpec> convBlocks;
  std::size_t bilstmHidden = 64;
  std::size_t fcUnits = 20;
  double dropoutRate = 0.5;
  std::size_t nClasses = 4;
  std::size_t nMels = 40;
  std::size_t frames = 128;

  bool operator==(const ModelSpec&) const = default;

  /// Three 3x3 conv blocks (16, 32, 64 filters, 2x2 pooling), BiLSTM hidden
  /// 64, 20 FC units, dropout 0.5, 40x128 input.
  static ModelSpec reference();

  /// Throws ConfigurationError for zero counts, n_classes != 4, a dropout rate
  /// outside [0, 1) or convolutions that run out of spatial extent.
  void validate() const;

  /// Compact one-line form, e.g.
  /// "conv=16x3x3/2x2,32x3x3/2x2 hidden=64 fc=20 dropout=0.5 classes=4 input=40x128".
  std::string toString() const;
  static ModelSpec parse(const std::string& text);
};

/**
 * Builds the three-stage network: stage 1 = input batchnorm and
 * conv-relu-maxpool blocks, stage 2 = maps-to-sequence reshape, BiLSTM and
 * final states, stage 3 = dense-relu-dropout-dense-softmax. Input is
 * [B, 1, n_mels, frames]. Weights are drawn from a generator seeded by seed.
 */
nn::Network buildHybrid(const ModelSpec& spec, std::uint64_t seed);

enum class ParamFilter { All, Trainable, Stage };

/// Sum of parameter element counts. With ParamFilter::Stage only layers of
/// `stage` are counted. Batchnorm running statistics are not parameters.
std::size_t countParams(const nn::Network& net, ParamFilter filter = ParamFilter::All,
                        int stage = 0);

/// Inference FLOPs for one sample. `sampleShape` excludes the batch axis.
std::uint64_t estimateFlops(const nn::Network& net, const nn::Shape& sampleShape);

} // namespace lungnet::model
