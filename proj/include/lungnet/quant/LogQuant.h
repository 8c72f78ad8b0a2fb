#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lungnet/nn/Network.h"
#include "lungnet/train/Dataset.h"
#include "lungnet/train/Metrics.h"

namespace lungnet::quant {

inline constexpr double kDefaultZeroThreshold = 1e-8;
inline constexpr int kMaxBits = 31;

/// Closed interval of log10 magnitudes used to normalize a layer.
struct LogRange {
  double min = 0.0;
  double max = 0.0;
};

/**
 * Sign-magnitude log codes for one weight tensor. Magnitude 0 is exact zero;
 * magnitudes 1..2^N-1 sit on a uniform log10 grid from logMin to logMax.
 */
struct QuantizedLayer {
  std::string name;
  nn::Shape shape;
  int bits = 0;
  double logMin = 0.0;
  double logMax = 0.0;
  std::vector<std::uint32_t> magnitudes;
  std::vector<std::uint8_t> negative;

  std::size_t size() const {
    return magnitudes.size();
  }
  /// Levels between logMin and logMax: 2^N - 2.
  std::uint64_t scale() const {
    return (std::uint64_t{1} << bits) - 2;
  }
  /// Throws FormatError when codes, shape or range are inconsistent.
  void validate() const;
};

/// Range of log10|w| over weights with |w| >= zeroThreshold; empty when none survive.
std::optional<LogRange> logRange(std::span<const double> weights, double zeroThreshold);

/// Quantizes against the layer's own range. N = 1 collapses every nonzero
/// weight onto one level; warnings receives a note when that loses detail.
QuantizedLayer logQuantizeLayer(std::span<const double> weights, int bits,
                                double zeroThreshold = kDefaultZeroThreshold,
                                std::vector<std::string>* warnings = nullptr);
/// Quantizes against a caller-supplied range (shared across tensors).
QuantizedLayer logQuantize(std::span<const double> weights, int bits, double zeroThreshold,
                           const LogRange& range);

std::vector<double> dequantizeLayer(const QuantizedLayer& q);

enum class NormMode { Local, Global };
std::string normModeName(NormMode mode);
/// "local" or "global"; throws ArgumentError otherwise.
NormMode parseNormMode(const std::string& text);

struct QuantizedModel {
  NormMode mode = NormMode::Local;
  std::uint64_t fingerprint = 0;
  /// One entry per parameter tensor in network order. Buffers stay full precision.
  std::vector<QuantizedLayer> layers;
  std::vector<std::string> warnings;
};

struct QuantizeResult {
  QuantizedModel model;
  nn::Network dequantized;
};

/**
 * Local mode shares one range across the parameter tensors of each network
 * layer; global mode uses a single range over the whole network.
 */
QuantizeResult quantizeModel(const nn::Network& net, int bits, NormMode mode,
                             double zeroThreshold = kDefaultZeroThreshold);

/// Copy of `net` with quantized weights decoded in place. Throws StateError
/// if the model was taken from a different architecture.
nn::Network applyQuantized(const nn::Network& net, const QuantizedModel& model);

struct TensorMemory {
  std::string name;
  std::size_t count = 0;
  std::size_t rank = 0;
};

struct MemoryReport {
  std::size_t parameters = 0;
  int bits = 0;
  /// ceil(P * (N + 1) / 8).
  std::size_t payloadBytes = 0;
  /// Per tensor: two 64-bit range values plus a u32 rank and u32 dims.
  std::size_t overheadBytes = 0;
  std::size_t quantizedBytes = 0;
  /// P * 4 (32-bit floats).
  std::size_t fullPrecisionBytes = 0;
  /// fullPrecisionBytes / quantizedBytes; 0 when nothing is stored.
  double ratio = 0.0;
  std::vector<TensorMemory> tensors;
};

inline constexpr std::size_t kFullPrecisionBytes = 4;

MemoryReport memoryReport(const std::vector<TensorMemory>& tensors, int bits);
MemoryReport memoryReport(const nn::Network& net, int bits);
MemoryReport memoryReport(const QuantizedModel& model);

struct SweepPoint {
  int bits = 0;
  train::MetricsReport report;
};

/// Quantize, decode and evaluate the network at each precision in order.
std::vector<SweepPoint> bitSweep(const nn::Network& net, const train::FeatureSet& eval,
                                 const std::vector<int>& bitList, NormMode mode,
                                 double zeroThreshold = kDefaultZeroThreshold);
/// Smallest swept precision whose score reaches `fullPrecisionScore`.
std::optional<int> optimalBits(const std::vector<SweepPoint>& sweep, double fullPrecisionScore);

/**
 * Quantized model container, integers little-endian:
 *
 *   "RQNT" | u8 version | u8 mode | u64 fingerprint | u32 tensors
 *   per tensor: u32 name length | name | u32 rank | u32 dims... | u8 N
 *               | f64 logMin | f64 logMax | ceil(count * (N + 1) / 8) payload bytes
 *
 * The payload is a bit stream filled from the least significant bit of each
 * byte; each weight is an (N + 1)-bit field, magnitude in the low N bits and
 * the sign in the most significant bit.
 */
inline constexpr std::uint8_t kQuantFormatVersion = 1;

/// Packs the fields of one tensor; size is exactly ceil(count * (N + 1) / 8).
std::string packCodes(const QuantizedLayer& q);
void unpackCodes(const std::string& payload, QuantizedLayer& q);

std::string serializeQuantized(const QuantizedModel& model);
QuantizedModel deserializeQuantized(const std::string& bytes);

} // namespace lungnet::quant
