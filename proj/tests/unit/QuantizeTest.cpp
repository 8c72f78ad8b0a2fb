#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lungnet/common/Errors.h"
#include "lungnet/model/ModelZoo.h"
#include "lungnet/nn/Serialize.h"
#include "lungnet/quant/LogQuant.h"
#include "lungnet/train/Trainer.h"

using namespace lungnet;
using namespace lungnet::quant;

namespace {

std::vector<double> randomLayer(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(1, 64);
  std::uniform_real_distribution<double> expo(-6.0, 1.0);
  std::bernoulli_distribution neg(0.5), zero(0.05);
  std::vector<double> w(len(rng));
  for (auto& v : w) {
    v = zero(rng) ? 0.0 : (neg(rng) ? -1.0 : 1.0) * std::pow(10.0, expo(rng));
  }
  return w;
}

nn::Network twoDense(std::vector<double> w1, std::vector<double> b1, std::vector<double> w2,
                     std::vector<double> b2) {
  nn::Network net;
  net.add(std::make_unique<nn::Dense>(2, 2), 1);
  net.add(std::make_unique<nn::Dense>(2, 2), 3);
  auto fill = [](nn::Tensor& t, const std::vector<double>& v) {
    std::copy(v.begin(), v.end(), t.data().begin());
  };
  fill(net.layer(0).params()[0].value, w1);
  fill(net.layer(0).params()[1].value, b1);
  fill(net.layer(1).params()[0].value, w2);
  fill(net.layer(1).params()[1].value, b2);
  return net;
}

double maxLogError(const nn::Network& a, const nn::Network& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t p = 0; p < a.layer(i).params().size(); ++p) {
      const auto& x = a.layer(i).params()[p].value;
      const auto& y = b.layer(i).params()[p].value;
      for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k] != 0.0) worst = std::max(worst, std::fabs(std::log10(std::fabs(x[k])) -
                                                              std::log10(std::fabs(y[k]))));
    }
  return worst;
}

} // namespace

TEST(LogQuantize, GridAlignedExample) {
  const std::vector<double> w{0.1, -1.0, 0.01, 0.0};
  auto q = logQuantizeLayer(w, 2, 1e-8);
  EXPECT_EQ(q.logMin, -2.0);
  EXPECT_EQ(q.logMax, 0.0);
  EXPECT_EQ(q.magnitudes, (std::vector<std::uint32_t>{2, 3, 1, 0}));
  EXPECT_EQ(q.negative, (std::vector<std::uint8_t>{0, 1, 0, 0}));
  EXPECT_EQ(dequantizeLayer(q), w);
}

// Brute-force scan for a double l near log10(c) with 10^l == c.
bool log10Representable(double c) {
  double up = std::log10(c), down = up;
  for (int i = 0; i < 64; ++i) {
    if (std::pow(10.0, up) == c || std::pow(10.0, down) == c) return true;
    up = std::nextafter(up, INFINITY);
    down = std::nextafter(down, -INFINITY);
  }
  return false;
}

TEST(LogQuantize, ConstantLayerDecodesToItsLevel) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> mant(0.5, 1.0);
  std::uniform_int_distribution<int> expo(-20, 3);
  std::size_t exact = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const double c = std::ldexp(mant(rng), expo(rng));
    std::vector<double> w(9, c);
    auto q = logQuantizeLayer(w, 4);
    EXPECT_EQ(q.logMin, q.logMax);
    for (auto m : q.magnitudes) EXPECT_EQ(m, 1u);
    const auto d = dequantizeLayer(q);
    for (double v : d) EXPECT_EQ(v, d.front());
    if (log10Representable(c)) {
      ++exact;
      EXPECT_EQ(d.front(), c);
    } else {
      EXPECT_LE(std::fabs(d.front() - c), 8 * std::numeric_limits<double>::epsilon() * c);
    }
  }
  EXPECT_GT(exact, 0u);
  for (double c : {0.5, 0.25, 1.0, 0.001, 100.0}) {
    EXPECT_EQ(dequantizeLayer(logQuantizeLayer(std::vector<double>(3, c), 4)).front(), c);
  }
}

TEST(LogQuantize, ZeroLayerAndThreshold) {
  auto q = logQuantizeLayer(std::vector<double>(5, 0.0), 3);
  for (auto m : q.magnitudes) EXPECT_EQ(m, 0u);
  EXPECT_EQ(dequantizeLayer(q), std::vector<double>(5, 0.0));

  auto t = logQuantizeLayer(std::vector<double>{1e-9, -5e-9, 0.5, -0.02}, 3, 1e-8);
  EXPECT_EQ(t.magnitudes[0], 0u);
  EXPECT_EQ(t.magnitudes[1], 0u);
  EXPECT_EQ(t.negative[1], 0u);
  EXPECT_DOUBLE_EQ(std::pow(10.0, t.logMin), 0.02);
}

TEST(LogQuantize, OneBitWarnsAndDecodesMinimum) {
  std::vector<std::string> warnings;
  auto q = logQuantizeLayer(std::vector<double>{0.1, -1.0}, 1, 1e-8, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(dequantizeLayer(q), (std::vector<double>{0.1, -0.1}));
  EXPECT_THROW(logQuantizeLayer(std::vector<double>{1.0}, 0), ArgumentError);
}

TEST(LogQuantize, HalfStepBoundSignAndZero) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> bitsDist(2, 12);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto w = randomLayer(rng);
    const int bits = bitsDist(rng);
    auto q = logQuantizeLayer(w, bits);
    const auto d = dequantizeLayer(q);
    double lo = INFINITY, hi = -INFINITY;
    for (double v : w)
      if (v != 0.0) {
        lo = std::min(lo, std::log10(std::fabs(v)));
        hi = std::max(hi, std::log10(std::fabs(v)));
      }
    if (!std::isfinite(lo)) continue;
    ASSERT_NEAR(q.logMin, lo, 1e-14);
    ASSERT_NEAR(q.logMax, hi, 1e-14);
    const double half = (hi - lo) / (2.0 * ((1 << bits) - 2));
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] == 0.0) {
        ASSERT_EQ(d[i], 0.0);
        continue;
      }
      ASSERT_EQ(std::signbit(d[i]), std::signbit(w[i]));
      ASSERT_LE(std::fabs(std::log10(std::fabs(d[i])) - std::log10(std::fabs(w[i]))),
                half + 1e-12);
    }
  }
}

TEST(LogQuantize, DecodeIsStrictlyIncreasing) {
  for (int bits = 2; bits <= 10; ++bits) {
    QuantizedLayer q;
    q.bits = bits;
    q.logMin = -3.7;
    q.logMax = 0.4;
    const std::uint32_t top = (1u << bits) - 1;
    for (std::uint32_t m = 1; m <= top; ++m) {
      q.magnitudes.push_back(m);
      q.negative.push_back(0);
    }
    q.shape = {q.magnitudes.size()};
    const auto d = dequantizeLayer(q);
    for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LT(d[i - 1], d[i]);
    EXPECT_DOUBLE_EQ(d.front(), std::pow(10.0, -3.7));
    EXPECT_DOUBLE_EQ(d.back(), std::pow(10.0, 0.4));
  }
}

TEST(Packing, HandPackedExample) {
  auto q = logQuantizeLayer(std::vector<double>{0.1, -1.0, 0.01, 0.0}, 2);
  // 3-bit fields 010, 111, 001, 000 laid out from the low bit of byte 0.
  const auto payload = packCodes(q);
  ASSERT_EQ(payload.size(), 2u);
  EXPECT_EQ(static_cast<unsigned char>(payload[0]), 0x7A);
  EXPECT_EQ(static_cast<unsigned char>(payload[1]), 0x00);
}

TEST(Packing, SizeAndRoundTrip) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> bitsDist(1, 24);
  for (int trial = 0; trial < 300; ++trial) {
    const auto w = randomLayer(rng);
    const int bits = bitsDist(rng);
    auto q = logQuantizeLayer(w, bits);
    const auto payload = packCodes(q);
    EXPECT_EQ(payload.size(), (w.size() * static_cast<std::size_t>(bits + 1) + 7) / 8);
    QuantizedLayer back;
    back.bits = bits;
    back.shape = q.shape;
    unpackCodes(payload, back);
    EXPECT_EQ(back.magnitudes, q.magnitudes);
    EXPECT_EQ(back.negative, q.negative);
  }
}

TEST(QuantizeModel, LocalBeatsGlobalOnDisjointRanges) {
  auto net = twoDense({0.5, -0.7, 0.9, 0.6}, {0.55, -0.8}, {1e-4, -3e-4, 5e-4, 2e-4}, {4e-4, 1e-4});
  for (int bits = 2; bits <= 8; ++bits) {
    auto local = quantizeModel(net, bits, NormMode::Local);
    auto global = quantizeModel(net, bits, NormMode::Global);
    EXPECT_LT(maxLogError(net, local.dequantized), maxLogError(net, global.dequantized)) << bits;
  }
}

TEST(QuantizeModel, IdenticalRangesMakeModesAgree) {
  auto net = twoDense({0.5, -2.0, 0.03, 0.6}, {0.01, -0.8}, {1e-2, -0.3, 2.0, 0.7}, {0.05, 0.2});
  for (int bits : {2, 5, 9}) {
    auto local = quantizeModel(net, bits, NormMode::Local);
    auto global = quantizeModel(net, bits, NormMode::Global);
    EXPECT_EQ(serializeQuantized(local.model).substr(5 + 1),
              serializeQuantized(global.model).substr(5 + 1));
  }
}

TEST(QuantizeModel, ZeroPlacementIndependentOfMode) {
  auto net = twoDense({0.5, 0.0, 1e-12, 0.6}, {0.0, -0.8}, {1e-4, 0.0, 5e-4, 2e-4}, {4e-4, 0.0});
  auto local = quantizeModel(net, 4, NormMode::Local);
  auto global = quantizeModel(net, 4, NormMode::Global);
  for (std::size_t t = 0; t < local.model.layers.size(); ++t)
    for (std::size_t i = 0; i < local.model.layers[t].size(); ++i)
      EXPECT_EQ(local.model.layers[t].magnitudes[i] == 0,
                global.model.layers[t].magnitudes[i] == 0);
}

TEST(QuantizeModel, HighPrecisionKeepsPredictions) {
  auto net = model::buildHybrid(model::ModelSpec::reference(), 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(-40.0, 10.0);
  nn::Tensor batch({32, 1, 40, 128});
  for (auto& v : batch.data()) v = nd(rng);
  const nn::ForwardContext ctx{nn::Mode::Infer, nullptr};
  const auto fp = nn::argmaxRows(net.forward(batch, ctx));
  auto q = quantizeModel(net, 24, NormMode::Local);
  EXPECT_EQ(nn::argmaxRows(q.dequantized.forward(batch, ctx)), fp);
  EXPECT_EQ(q.model.layers.size(), 18u);
}

TEST(QuantizeModel, BuffersStayFullPrecision) {
  auto net = model::buildHybrid(model::ModelSpec::reference(), 3);
  net.layer(0).buffers()[0].value[0] = 0.123456789;
  auto q = quantizeModel(net, 3, NormMode::Local);
  EXPECT_EQ(q.dequantized.layer(0).buffers()[0].value[0], 0.123456789);
}

TEST(Container, RoundTripAndApply) {
  auto net = model::buildHybrid(model::ModelSpec::reference(), 5);
  auto q = quantizeModel(net, 6, NormMode::Global);
  const auto bytes = serializeQuantized(q.model);
  EXPECT_EQ(bytes.substr(0, 4), "RQNT");
  auto back = deserializeQuantized(bytes);
  EXPECT_EQ(serializeQuantized(back), bytes);
  EXPECT_EQ(back.mode, NormMode::Global);
  EXPECT_EQ(nn::serializeNetwork(applyQuantized(net, back)),
            nn::serializeNetwork(q.dequantized));

  auto other = model::buildHybrid(model::ModelSpec::reference(), 6);
  EXPECT_NO_THROW(applyQuantized(other, back));
  auto spec = model::ModelSpec::reference();
  spec.fcUnits = 8;
  EXPECT_THROW(applyQuantized(model::buildHybrid(spec, 5), back), StateError);
}

TEST(Container, RejectsCorruption) {
  auto q = quantizeModel(twoDense({0.5, 0.1, 0.2, 0.6}, {0.3, 0.8}, {1, 2, 3, 4}, {5, 6}), 4,
                         NormMode::Local);
  auto bytes = serializeQuantized(q.model);
  EXPECT_THROW(deserializeQuantized("RQNX" + bytes.substr(4)), FormatError);
  EXPECT_THROW(deserializeQuantized(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(deserializeQuantized(bytes + "x"), FormatError);
}

TEST(Memory, ClosedForm) {
  auto r = memoryReport({{"w", 1000000, 2}}, 7);
  EXPECT_EQ(r.payloadBytes, 1000000u);
  EXPECT_EQ(r.overheadBytes, 16u + 4u + 8u);
  EXPECT_EQ(r.fullPrecisionBytes, 4000000u);
  EXPECT_NEAR(r.ratio, 4.0, 4.0 * 1e-3);

  auto empty = memoryReport({{"w", 0, 1}}, 7);
  EXPECT_EQ(empty.payloadBytes, 0u);
  EXPECT_EQ(empty.quantizedBytes, empty.overheadBytes);

  auto one = memoryReport({{"w", 12345, 1}}, 5);
  auto two = memoryReport({{"w", 24690, 1}}, 5);
  EXPECT_EQ(one.payloadBytes, (12345u * 6 + 7) / 8);
  EXPECT_EQ(two.payloadBytes, 2 * one.payloadBytes);
}

TEST(Memory, ReferenceNetworkCountsParameters) {
  auto net = model::buildHybrid(model::ModelSpec::reference(), 1);
  auto r = memoryReport(net, 7);
  EXPECT_EQ(r.parameters, model::countParams(net));
  EXPECT_EQ(r.tensors.size(), 18u);
  auto q = quantizeModel(net, 7, NormMode::Local);
  EXPECT_EQ(memoryReport(q.model).quantizedBytes, r.quantizedBytes);
}

TEST(Sweep, HighPrecisionMatchesFullPrecisionAndIsDeterministic) {
  auto spec = model::ModelSpec::reference();
  spec.nMels = 16;
  spec.frames = 16;
  spec.convBlocks = {{4, 3, 3, 2, 2}};
  spec.bilstmHidden = 8;
  auto net = model::buildHybrid(spec, 7);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(-40.0, 10.0);
  train::FeatureSet data(16, 16);
  for (int i = 0; i < 40; ++i) {
    std::vector<double> img(256);
    for (auto& v : img) v = nd(rng);
    data.add(img, i % 4, "p" + std::to_string(i % 3), "r");
  }
  const auto fp = train::evaluateMetrics(train::predict(net, data), data.labels());
  const auto sweep = bitSweep(net, data, {2, 4, 24}, NormMode::Local);
  ASSERT_EQ(sweep.size(), 3u);
  EXPECT_EQ(sweep[2].report.score, fp.score);
  const auto again = bitSweep(net, data, {2, 4, 24}, NormMode::Local);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again[i].report.score, sweep[i].report.score);
  auto best = optimalBits(sweep, fp.score);
  ASSERT_TRUE(best.has_value());
  EXPECT_LE(*best, 24);
}
