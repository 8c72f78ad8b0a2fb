#include "lungnet/quant/LogQuant.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "lungnet/common/Errors.h"
#include "lungnet/nn/Serialize.h"
#include "lungnet/train/Trainer.h"

namespace lungnet::quant {

namespace {

void checkBits(int bits) {
  if (bits < 1 || bits > kMaxBits) {
    throw ArgumentError("bit precision must be in [1, " + std::to_string(kMaxBits) + "], got " +
                        std::to_string(bits));
  }
}

// log10 of a magnitude, moved to a nearby double when that makes
// 10^l reproduce the magnitude exactly, so range endpoints survive a round
// trip. Roughly a third of all doubles have no such l; those keep log10(m).
double exactLog10(double m) {
  const double l = std::log10(m);
  const double p = std::pow(10.0, l);
  if (p == m) {
    return l;
  }
  double up = l, down = l;
  for (int i = 0; i < 64; ++i) {
    up = std::nextafter(up, INFINITY);
    down = std::nextafter(down, -INFINITY);
    if (std::pow(10.0, up) == m) {
      return up;
    }
    if (std::pow(10.0, down) == m) {
      return down;
    }
  }
  // Near m = 1 an ulp of l moves 10^l by far less than an ulp of m, so the
  // scan above is too short; bracket m between 10^a and 10^b and bisect.
  double a = l, b = l;
  double step = std::fabs(l) * 1e-16 + 1e-300;
  for (int i = 0; i < 80 && std::pow(10.0, b) < m; ++i, step *= 2) {
    b = l + step;
  }
  for (int i = 0; i < 80 && std::pow(10.0, a) > m; ++i, step *= 2) {
    a = l - step;
  }
  while (true) {
    const double mid = a + (b - a) / 2;
    if (mid == a || mid == b) {
      return l;
    }
    const double q = std::pow(10.0, mid);
    if (q == m) {
      return mid;
    }
    (q < m ? a : b) = mid;
  }
}

std::string tensorName(std::size_t layerIndex, const nn::Layer& layer, const nn::Parameter& p) {
  return std::to_string(layerIndex) + "." + nn::layerKindName(layer.kind()) + "." + p.name;
}

} // namespace

void QuantizedLayer::validate() const {
  if (bits < 1 || bits > kMaxBits) {
    throw FormatError(name + ": bit precision " + std::to_string(bits) + " out of range");
  }
  if (nn::shapeNumel(shape) != magnitudes.size() || negative.size() != magnitudes.size()) {
    throw FormatError(name + ": code count does not match shape " + nn::shapeToString(shape));
  }
  if (!(logMin <= logMax)) {
    throw FormatError(name + ": log range is inverted");
  }
  const std::uint64_t top = (std::uint64_t{1} << bits) - 1;
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    if (magnitudes[i] > top) {
      throw FormatError(name + ": magnitude code exceeds " + std::to_string(bits) + " bits");
    }
    if (magnitudes[i] == 0 && negative[i]) {
      throw FormatError(name + ": zero code carries a sign");
    }
  }
}

std::optional<LogRange> logRange(std::span<const double> weights, double zeroThreshold) {
  double lo = INFINITY, hi = 0.0;
  for (double w : weights) {
    const double m = std::fabs(w);
    if (m >= zeroThreshold && m > 0.0) {
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
  }
  if (hi == 0.0) {
    return std::nullopt;
  }
  return LogRange{exactLog10(lo), exactLog10(hi)};
}

QuantizedLayer logQuantize(std::span<const double> weights, int bits, double zeroThreshold,
                           const LogRange& range) {
  checkBits(bits);
  if (!(range.min <= range.max)) {
    throw ArgumentError("log range is inverted");
  }
  QuantizedLayer q;
  q.shape = {weights.size()};
  q.bits = bits;
  q.logMin = range.min;
  q.logMax = range.max;
  q.magnitudes.resize(weights.size());
  q.negative.resize(weights.size());
  const double scale = static_cast<double>(q.scale());
  const double span = range.max - range.min;
  const auto top = static_cast<double>((std::uint64_t{1} << bits) - 1);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double m = std::fabs(weights[i]);
    if (!(m >= zeroThreshold) || m == 0.0) {
      continue;
    }
    const double x = span > 0.0 ? (std::log10(m) - range.min) / span : 0.0;
    // nearbyint honours the default round-half-to-even mode.
    const double code = std::clamp(1.0 + std::nearbyint(scale * std::clamp(x, 0.0, 1.0)), 1.0, top);
    q.magnitudes[i] = static_cast<std::uint32_t>(code);
    q.negative[i] = std::signbit(weights[i]) ? 1 : 0;
  }
  return q;
}

QuantizedLayer logQuantizeLayer(std::span<const double> weights, int bits, double zeroThreshold,
                                std::vector<std::string>* warnings) {
  checkBits(bits);
  const auto range = logRange(weights, zeroThreshold);
  if (!range) {
    return logQuantize(weights, bits, zeroThreshold, LogRange{});
  }
  if (bits == 1 && range->min < range->max && warnings) {
    warnings->push_back("1-bit precision maps distinct magnitudes onto a single level");
  }
  return logQuantize(weights, bits, zeroThreshold, *range);
}

std::vector<double> dequantizeLayer(const QuantizedLayer& q) {
  std::vector<double> out(q.size(), 0.0);
  const auto scale = q.scale();
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto code = q.magnitudes[i];
    if (code == 0) {
      continue;
    }
    // lerp hits both endpoints exactly and is monotone in the code.
    const double l = scale == 0
        ? q.logMin
        : std::lerp(q.logMin, q.logMax, static_cast<double>(code - 1) / static_cast<double>(scale));
    const double m = std::pow(10.0, l);
    out[i] = q.negative[i] ? -m : m;
  }
  return out;
}

std::string normModeName(NormMode mode) {
  return mode == NormMode::Local ? "local" : "global";
}

NormMode parseNormMode(const std::string& text) {
  if (text == "local") {
    return NormMode::Local;
  }
  if (text == "global") {
    return NormMode::Global;
  }
  throw ArgumentError("quantization mode must be 'local' or 'global', got '" + text + "'");
}

QuantizeResult quantizeModel(const nn::Network& net, int bits, NormMode mode,
                             double zeroThreshold) {
  checkBits(bits);
  QuantizeResult result{{mode, nn::architectureFingerprint(net), {}, {}}, net};

  auto rangeOf = [&](auto&& layerFilter) -> std::optional<LogRange> {
    std::optional<LogRange> r;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (!layerFilter(i)) {
        continue;
      }
      for (const auto& p : net.layer(i).params()) {
        if (auto pr = logRange(p.value.data(), zeroThreshold)) {
          r = r ? LogRange{std::min(r->min, pr->min), std::max(r->max, pr->max)} : *pr;
        }
      }
    }
    return r;
  };

  const auto global = rangeOf([](std::size_t) { return true; });
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& layer = result.dequantized.layer(i);
    if (layer.params().empty()) {
      continue;
    }
    const auto range =
        mode == NormMode::Global ? global : rangeOf([i](std::size_t j) { return j == i; });
    if (bits == 1 && range && range->min < range->max) {
      result.model.warnings.push_back("layer " + std::to_string(i) +
                                      ": 1-bit precision maps distinct magnitudes onto one level");
    }
    for (auto& p : layer.params()) {
      auto q = logQuantize(p.value.data(), bits, zeroThreshold, range.value_or(LogRange{}));
      q.name = tensorName(i, layer, p);
      q.shape = p.value.shape();
      const auto decoded = dequantizeLayer(q);
      std::copy(decoded.begin(), decoded.end(), p.value.data().begin());
      result.model.layers.push_back(std::move(q));
    }
  }
  return result;
}

nn::Network applyQuantized(const nn::Network& net, const QuantizedModel& model) {
  if (model.fingerprint != nn::architectureFingerprint(net)) {
    throw StateError("quantized model was produced from a different architecture");
  }
  nn::Network out = net;
  std::size_t k = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& layer = out.layer(i);
    for (auto& p : layer.params()) {
      if (k >= model.layers.size()) {
        throw StateError("quantized model has fewer tensors than the network");
      }
      const auto& q = model.layers[k++];
      if (q.shape != p.value.shape()) {
        throw StateError(q.name + ": shape does not match the network");
      }
      const auto decoded = dequantizeLayer(q);
      std::copy(decoded.begin(), decoded.end(), p.value.data().begin());
    }
  }
  if (k != model.layers.size()) {
    throw StateError("quantized model has more tensors than the network");
  }
  return out;
}

MemoryReport memoryReport(const std::vector<TensorMemory>& tensors, int bits) {
  checkBits(bits);
  MemoryReport r;
  r.bits = bits;
  r.tensors = tensors;
  for (const auto& t : tensors) {
    r.parameters += t.count;
    r.overheadBytes += 2 * sizeof(double) + 4 + 4 * t.rank;
  }
  const std::size_t bitsTotal = r.parameters * static_cast<std::size_t>(bits + 1);
  r.payloadBytes = (bitsTotal + 7) / 8;
  r.quantizedBytes = r.payloadBytes + r.overheadBytes;
  r.fullPrecisionBytes = r.parameters * kFullPrecisionBytes;
  r.ratio = r.quantizedBytes
      ? static_cast<double>(r.fullPrecisionBytes) / static_cast<double>(r.quantizedBytes)
      : 0.0;
  return r;
}

MemoryReport memoryReport(const nn::Network& net, int bits) {
  std::vector<TensorMemory> tensors;
  for (std::size_t i = 0; i < net.size(); ++i) {
    for (const auto& p : net.layer(i).params()) {
      tensors.push_back({tensorName(i, net.layer(i), p), p.value.size(), p.value.rank()});
    }
  }
  return memoryReport(tensors, bits);
}

MemoryReport memoryReport(const QuantizedModel& model) {
  if (model.layers.empty()) {
    throw InputError("quantized model has no tensors");
  }
  std::vector<TensorMemory> tensors;
  for (const auto& q : model.layers) {
    tensors.push_back({q.name, q.size(), q.shape.size()});
  }
  return memoryReport(tensors, model.layers.front().bits);
}

std::vector<SweepPoint> bitSweep(const nn::Network& net, const train::FeatureSet& eval,
                                 const std::vector<int>& bitList, NormMode mode,
                                 double zeroThreshold) {
  if (eval.empty()) {
    throw InputError("bit sweep needs a non-empty evaluation set");
  }
  std::vector<SweepPoint> out;
  for (int bits : bitList) {
    auto q = quantizeModel(net, bits, mode, zeroThreshold);
    const auto preds = train::predict(q.dequantized, eval);
    out.push_back({bits, train::evaluateMetrics(preds, eval.labels())});
  }
  return out;
}

std::optional<int> optimalBits(const std::vector<SweepPoint>& sweep, double fullPrecisionScore) {
  std::optional<int> best;
  for (const auto& p : sweep) {
    if (p.report.score >= fullPrecisionScore && (!best || p.bits < *best)) {
      best = p.bits;
    }
  }
  return best;
}

// ---------------------------------------------------------------- container

std::string packCodes(const QuantizedLayer& q) {
  const std::size_t width = static_cast<std::size_t>(q.bits) + 1;
  std::string out((q.size() * width + 7) / 8, '\0');
  std::size_t bit = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const std::uint64_t field =
        (static_cast<std::uint64_t>(q.negative[i] ? 1 : 0) << q.bits) | q.magnitudes[i];
    for (std::size_t b = 0; b < width; ++b, ++bit) {
      if ((field >> b) & 1U) {
        out[bit / 8] = static_cast<char>(out[bit / 8] | (1U << (bit % 8)));
      }
    }
  }
  return out;
}

void unpackCodes(const std::string& payload, QuantizedLayer& q) {
  const std::size_t width = static_cast<std::size_t>(q.bits) + 1;
  const std::size_t n = nn::shapeNumel(q.shape);
  if (payload.size() != (n * width + 7) / 8) {
    throw FormatError(q.name + ": payload size does not match the code count");
  }
  q.magnitudes.assign(n, 0);
  q.negative.assign(n, 0);
  std::size_t bit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t field = 0;
    for (std::size_t b = 0; b < width; ++b, ++bit) {
      const auto byte = static_cast<unsigned char>(payload[bit / 8]);
      field |= static_cast<std::uint64_t>((byte >> (bit % 8)) & 1U) << b;
    }
    q.magnitudes[i] = static_cast<std::uint32_t>(field & ((std::uint64_t{1} << q.bits) - 1));
    q.negative[i] = static_cast<std::uint8_t>(field >> q.bits);
  }
}

namespace {

constexpr char kMagic[4] = {'R', 'Q', 'N', 'T'};

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

class Cursor {
 public:
  explicit Cursor(const std::string& in) : in_(in) {}
  std::string take(std::size_t n) {
    if (in_.size() - pos_ < n) {
      throw FormatError("quantized container is truncated at byte " + std::to_string(pos_));
    }
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T get() {
    T v;
    const auto s = take(sizeof v);
    std::memcpy(&v, s.data(), sizeof v);
    return v;
  }
  bool done() const {
    return pos_ == in_.size();
  }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

} // namespace

std::string serializeQuantized(const QuantizedModel& model) {
  static_assert(std::endian::native == std::endian::little);
  std::string out(kMagic, 4);
  put<std::uint8_t>(out, kQuantFormatVersion);
  put<std::uint8_t>(out, model.mode == NormMode::Local ? 0 : 1);
  put<std::uint64_t>(out, model.fingerprint);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& q : model.layers) {
    q.validate();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(q.name.size()));
    out += q.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(q.shape.size()));
    for (auto d : q.shape) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    put<std::uint8_t>(out, static_cast<std::uint8_t>(q.bits));
    put<double>(out, q.logMin);
    put<double>(out, q.logMax);
    out += packCodes(q);
  }
  return out;
}

QuantizedModel deserializeQuantized(const std::string& bytes) {
  Cursor c(bytes);
  if (c.take(4) != std::string(kMagic, 4)) {
    throw FormatError("not a quantized model container (bad magic)");
  }
  if (const auto v = c.get<std::uint8_t>(); v != kQuantFormatVersion) {
    throw FormatError("unsupported quantized container version " + std::to_string(v));
  }
  QuantizedModel m;
  const auto mode = c.get<std::uint8_t>();
  if (mode > 1) {
    throw FormatError("unknown quantization mode byte " + std::to_string(mode));
  }
  m.mode = mode == 0 ? NormMode::Local : NormMode::Global;
  m.fingerprint = c.get<std::uint64_t>();
  const auto count = c.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    QuantizedLayer q;
    q.name = c.take(c.get<std::uint32_t>());
    q.shape.resize(c.get<std::uint32_t>());
    for (auto& d : q.shape) {
      d = c.get<std::uint32_t>();
    }
    q.bits = c.get<std::uint8_t>();
    if (q.bits < 1 || q.bits > kMaxBits) {
      throw FormatError(q.name + ": bit precision " + std::to_string(q.bits) + " out of range");
    }
    q.logMin = c.get<double>();
    q.logMax = c.get<double>();
    const std::size_t width = static_cast<std::size_t>(q.bits) + 1;
    unpackCodes(c.take((nn::shapeNumel(q.shape) * width + 7) / 8), q);
    q.validate();
    m.layers.push_back(std::move(q));
  }
  if (!c.done()) {
    throw FormatError("trailing bytes after the last quantized tensor");
  }
  return m;
}

} // namespace lungnet::quant
