#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "../support/GradSuite.h"
#include "../support/Oracles.h"
#include "lungnet/common/Errors.h"
#include "lungnet/nn/Layer.h"
#include "lungnet/nn/Network.h"
#include "lungnet/nn/Optim.h"

using namespace lungnet;
using namespace lungnet::nn;
using lungnet::testing::randomTensor;

namespace {
const ForwardContext kInfer{Mode::Infer, nullptr};
} // namespace

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_FALSE(t.hasGrad());
  EXPECT_THROW(t.grad(), StateError);
  t.zeroGrad();
  EXPECT_EQ(t.grad().size(), 6u);
  EXPECT_THROW(t.reshaped({4, 2, 1}), DimensionError);
}

TEST(Conv2d, IdentityKernel) {
  Conv2d conv(1, 1, 1, 1);
  conv.param("weight")[0] = 1.0;
  auto y = conv.forward(Tensor({1, 1, 1, 1}, 5.0), kInfer);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 5.0);
}

TEST(Conv2d, AllOnesValid) {
  Conv2d conv(1, 1, 2, 2);
  conv.param("weight").fill(1.0);
  auto y = conv.forward(Tensor({1, 1, 3, 3}, 1.0), kInfer);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (double v : y.data()) {
    EXPECT_EQ(v, 4.0);
  }
}

TEST(Conv2d, MatchesNaiveLoops) {
  std::mt19937_64 rng(7);
  for (auto pad : {Padding::Valid, Padding::Same}) {
    Conv2d conv(3, 4, 3, 3, pad);
    lungnet::testing::randomizeParams(conv, rng, 1.0);
    auto x = randomTensor({2, 3, 8, 8}, rng);
    auto y = conv.forward(x, kInfer);
    const std::size_t p = pad == Padding::Same ? 1 : 0;
    const std::size_t o = pad == Padding::Same ? 8 : 6;
    auto ref = lungnet::testing::naiveConv2d(x, conv.param("weight"), conv.param("bias"), p, p, o, o);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
      EXPECT_NEAR(y[i], ref[i], 1e-12);
    }
  }
}

TEST(Conv2d, ChannelMismatchIsDimensionError) {
  Conv2d conv(2, 1, 1, 1);
  EXPECT_THROW(conv.forward(Tensor({1, 3, 4, 4}), kInfer), DimensionError);
  Conv2d big(1, 1, 5, 5);
  EXPECT_THROW(big.forward(Tensor({1, 1, 4, 4}), kInfer), DimensionError);
}

TEST(MaxPool2d, ConstantInputHalvesDims) {
  MaxPool2d pool(2, 2);
  auto y = pool.forward(Tensor({1, 2, 4, 6}, 3.0), kInfer);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2, 3}));
  for (double v : y.data()) {
    EXPECT_EQ(v, 3.0);
  }
}

TEST(MaxPool2d, WindowMax) {
  MaxPool2d pool(2, 2);
  auto y = pool.forward(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), kInfer);
  EXPECT_EQ(y[0], 4.0);
}

TEST(MaxPool2d, GradientRoutesToArgmaxOnly) {
  std::mt19937_64 rng(3);
  MaxPool2d pool(2, 2);
  auto x = randomTensor({2, 3, 6, 8}, rng);
  auto y = pool.forward(x, kInfer);
  auto g = pool.backward(Tensor(y.shape(), 1.0));
  for (std::size_t p = 0; p < 6; ++p) {
    for (std::size_t wy = 0; wy < 3; ++wy) {
      for (std::size_t wx = 0; wx < 4; ++wx) {
        int ones = 0;
        double sum = 0.0;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const double v = g[p * 48 + (wy * 2 + dy) * 8 + wx * 2 + dx];
            ones += v == 1.0;
            sum += v;
          }
        }
        EXPECT_EQ(ones, 1);
        EXPECT_EQ(sum, 1.0);
      }
    }
  }
}

TEST(MaxPool2d, RaggedEdgesPadWithNegativeInfinity) {
  MaxPool2d pool(2, 2);
  auto y = pool.forward(Tensor({1, 1, 3, 3}, {-5, -6, -7, -8, -9, -10, -11, -12, -13}), kInfer);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y[0], -5.0);
  EXPECT_EQ(y[1], -7.0);
  EXPECT_EQ(y[2], -11.0);
  EXPECT_EQ(y[3], -13.0);
  EXPECT_THROW(MaxPool2d(0, 2), ArgumentError);
}

TEST(BatchNorm, TrainModeNormalizes) {
  std::mt19937_64 rng(11);
  BatchNorm bn(3);
  std::mt19937_64 dropRng(0);
  auto x = randomTensor({8, 3, 5, 4}, rng, -20, 30);
  auto y = bn.forward(x, {Mode::Train, &dropRng});
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t b = 0; b < 8; ++b)
      for (std::size_t k = 0; k < 20; ++k) mean += y[(b * 3 + c) * 20 + k];
    mean /= 160;
    for (std::size_t b = 0; b < 8; ++b)
      for (std::size_t k = 0; k < 20; ++k) var += std::pow(y[(b * 3 + c) * 20 + k] - mean, 2);
    var /= 160;
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(BatchNorm, AffineAndInferenceFormula) {
  std::mt19937_64 rng(5);
  BatchNorm bn(2);
  auto x = randomTensor({4, 2, 3}, rng);
  std::mt19937_64 r(0);
  auto plain = bn.forward(x, {Mode::Train, &r});
  BatchNorm bn2(2);
  bn2.param("gamma").fill(2.0);
  bn2.param("beta").fill(3.0);
  auto affine = bn2.forward(x, {Mode::Train, &r});
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(affine[i], 2.0 * plain[i] + 3.0, 1e-12);
  }

  BatchNorm inf(2);
  inf.param("gamma")[0] = 1.5;
  inf.param("beta")[1] = -0.25;
  inf.buffers()[0].value[0] = 0.3;
  inf.buffers()[0].value[1] = -1.0;
  inf.buffers()[1].value[0] = 2.0;
  inf.buffers()[1].value[1] = 0.5;
  auto y = inf.forward(x, kInfer);
  const double g[2] = {1.5, 1.0}, b[2] = {0.0, -0.25}, mu[2] = {0.3, -1.0}, var[2] = {2.0, 0.5};
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t i = (n * 2 + c) * 3 + k;
        EXPECT_NEAR(y[i], (x[i] - mu[c]) / std::sqrt(var[c] + 1e-5) * g[c] + b[c], 1e-12);
      }
}

TEST(BatchNorm, SingleSampleZeroVarianceIsStable) {
  BatchNorm bn(1);
  std::mt19937_64 r(0);
  auto y = bn.forward(Tensor({1, 1}, 4.0), {Mode::Train, &r});
  EXPECT_TRUE(std::isfinite(y[0]));
  EXPECT_EQ(y[0], 0.0);
}

TEST(BatchNorm, RunningStatsUseMomentum) {
  BatchNorm bn(1);
  std::mt19937_64 r(0);
  bn.forward(Tensor({2, 1}, {1.0, 3.0}), {Mode::Train, &r});
  EXPECT_NEAR(bn.buffers()[0].value[0], 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(bn.buffers()[1].value[0], 0.9 + 0.1 * 1.0, 1e-15);
}

TEST(BiLstm, ZeroWeightsGiveZeroOutput) {
  std::mt19937_64 rng(2);
  BiLstm lstm(3, 4);
  auto y = lstm.forward(randomTensor({2, 5, 3}, rng), kInfer);
  EXPECT_EQ(y.shape(), (Shape{2, 5, 8}));
  for (double v : y.data()) {
    EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(BiLstm(3, 0), ArgumentError);
}

TEST(BiLstm, ReversalSwapsHalves) {
  std::mt19937_64 rng(4);
  BiLstm lstm(3, 2);
  lungnet::testing::randomizeParams(lstm, rng, 1.0);
  for (int k = 0; k < 3; ++k) {
    lstm.params()[3 + k].value = lstm.params()[k].value;
  }
  const std::size_t T = 5;
  auto x = randomTensor({1, T, 3}, rng);
  Tensor xr({1, T, 3});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < 3; ++d) xr[t * 3 + d] = x[(T - 1 - t) * 3 + d];
  auto y = lstm.forward(x, kInfer);
  auto yr = lstm.forward(xr, kInfer);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(y[t * 4 + j], yr[(T - 1 - t) * 4 + 2 + j], 1e-14);
      EXPECT_NEAR(y[t * 4 + 2 + j], yr[(T - 1 - t) * 4 + j], 1e-14);
    }
}

TEST(BiLstm, MatchesGateEquationUnroll) {
  std::mt19937_64 rng(9);
  const std::size_t B = 2, T = 3, D = 4, H = 2;
  BiLstm lstm(D, H);
  lungnet::testing::randomizeParams(lstm, rng, 1.0);
  auto x = randomTensor({B, T, D}, rng);
  auto y = lstm.forward(x, kInfer);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::vector<double>> seq(T), rev(T);
    for (std::size_t t = 0; t < T; ++t) {
      seq[t].assign(x.data().begin() + (b * T + t) * D, x.data().begin() + (b * T + t + 1) * D);
      rev[T - 1 - t] = seq[t];
    }
    auto hf = lungnet::testing::lstmUnroll(seq, lstm.param("fwd_w_ih"), lstm.param("fwd_w_hh"),
                                           lstm.param("fwd_b"), H);
    auto hb = lungnet::testing::lstmUnroll(rev, lstm.param("bwd_w_ih"), lstm.param("bwd_w_hh"),
                                           lstm.param("bwd_b"), H);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < H; ++j) {
        EXPECT_NEAR(y[(b * T + t) * 2 * H + j], hf[t][j], 1e-12);
        EXPECT_NEAR(y[(b * T + t) * 2 * H + H + j], hb[T - 1 - t][j], 1e-12);
      }
  }
}

TEST(Dense, HandCasesAndOracle) {
  Dense dense(2, 2);
  dense.param("weight") = Tensor({2, 2}, {1, 0, 0, 1});
  auto pass = dense.forward(Tensor({1, 2}, {0.25, -7.0}), kInfer);
  EXPECT_EQ(pass[0], 0.25);
  EXPECT_EQ(pass[1], -7.0);
  dense.param("bias") = Tensor({2}, {1, 1});
  auto y = dense.forward(Tensor({1, 2}, {1, 2}), kInfer);
  EXPECT_EQ(y[0], 2.0);
  EXPECT_EQ(y[1], 3.0);

  std::mt19937_64 rng(1);
  Dense big(7, 5);
  lungnet::testing::randomizeParams(big, rng, 1.0);
  auto x = randomTensor({6, 7}, rng);
  auto out = big.forward(x, kInfer);
  auto ref = lungnet::testing::naiveMatmulBias(x, big.param("weight"), big.param("bias"));
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out[i], ref[i], 1e-12);
  }
  EXPECT_THROW(big.forward(Tensor({1, 6}), kInfer), DimensionError);
}

TEST(SoftmaxCrossEntropy, SpecCases) {
  std::vector<double> ones(4, 1.0);
  Tensor onehot({1, 4}, {0, 0, 1, 0});
  auto confident = softmaxCrossEntropy(Tensor({1, 4}, {0, 0, 60, 0}), onehot, ones);
  EXPECT_LT(confident.loss, 1e-20);
  auto uniform = softmaxCrossEntropy(Tensor({1, 4}, 0.3), onehot, ones);
  EXPECT_NEAR(uniform.loss, std::log(4.0), 1e-12);
  EXPECT_NEAR(uniform.loss, 1.386294, 1e-6);

  std::mt19937_64 rng(8);
  auto logits = randomTensor({1, 4}, rng);
  std::vector<double> w = {1, 1, 2, 1};
  EXPECT_NEAR(softmaxCrossEntropy(logits, onehot, w).loss,
              2.0 * softmaxCrossEntropy(logits, onehot, ones).loss, 1e-12);

  EXPECT_THROW(softmaxCrossEntropy(logits, Tensor({1, 4}, {0, 1, 1, 0}), ones), InputError);
  EXPECT_THROW(softmaxCrossEntropy(logits, Tensor({1, 4}, {0, 0.5, 0, 0}), ones), InputError);
}

TEST(Softmax, RowsAreDistributions) {
  std::mt19937_64 rng(12);
  Softmax sm;
  auto y = sm.forward(randomTensor({50, 4}, rng, -30, 30), kInfer);
  for (std::size_t r = 0; r < 50; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_GE(y[r * 4 + k], 0.0);
      s += y[r * 4 + k];
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Backward, SumLossGivesOnes) {
  Network net;
  net.add(std::make_unique<Dropout>(0.0), 3);
  auto x = Tensor({2, 3}, 0.7);
  net.forward(x, kInfer);
  auto g = net.backward(Tensor({2, 3}, 1.0));
  for (double v : g.data()) {
    EXPECT_EQ(v, 1.0);
  }
}

TEST(Backward, BeforeForwardIsStateError) {
  Dense dense(2, 2);
  EXPECT_THROW(dense.backward(Tensor({1, 2})), StateError);
  Network net;
  net.add(std::make_unique<Dense>(2, 2), 3);
  EXPECT_THROW(net.backward(Tensor({1, 2})), StateError);
}

TEST(Backward, FiniteDifferenceSuite) {
  auto report = lungnet::testing::runGradientSuite(2024, 20);
  for (const auto& [kind, rep] : report) {
    EXPECT_GE(rep.configs, 20) << kind;
    EXPECT_LT(rep.maxRelError, 1e-5) << kind;
  }
}

TEST(Backward, FrozenLayerGetsNoGradientAndStaysPut) {
  std::mt19937_64 rng(6);
  Network net;
  net.add(std::make_unique<Dense>(3, 4), 1);
  net.add(std::make_unique<Activation>(ActivationType::Tanh), 2);
  net.add(std::make_unique<Dense>(4, 2), 3);
  lungnet::testing::randomizeParams(net.layer(0), rng);
  lungnet::testing::randomizeParams(net.layer(2), rng);
  net.setStageTrainable(1, false);
  const Tensor before = net.layer(0).param("weight");
  const Tensor headBefore = net.layer(2).param("weight");
  auto params = net.trainableParameters();
  EXPECT_EQ(params.size(), 2u);
  auto state = makeAdamState(params);
  for (int step = 0; step < 5; ++step) {
    net.zeroGrad();
    auto y = net.forward(randomTensor({5, 3}, rng), kInfer);
    net.backward(Tensor(y.shape(), 1.0));
    adamStep(params, state);
  }
  EXPECT_FALSE(net.layer(0).param("weight").hasGrad());
  EXPECT_TRUE(net.layer(0).param("weight").sameValues(before));
  EXPECT_FALSE(net.layer(2).param("weight").sameValues(headBefore));
}

TEST(Adam, ZeroGradientLeavesParamsButCountsStep) {
  Tensor w({3}, {0.5, -1.0, 2.0});
  const Tensor before = w;
  w.zeroGrad();
  std::vector<Tensor*> params{&w};
  auto state = makeAdamState(params);
  adamStep(params, state);
  EXPECT_EQ(state.t, 1);
  EXPECT_TRUE(w.sameValues(before));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor w({3}, {0.0, 0.0, 0.0});
  w.zeroGrad();
  w.grad()[0] = 0.3;
  w.grad()[1] = -40.0;
  w.grad()[2] = 1e-3;
  std::vector<Tensor*> params{&w};
  auto state = makeAdamState(params);
  adamStep(params, state);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(w[0], -1e-3 * 0.3 / (0.3 + 1e-8), 1e-18);
  EXPECT_NEAR(w[1], 1e-3 * 40.0 / (40.0 + 1e-8), 1e-18);
  EXPECT_NEAR(w[2], -1e-3 * 1e-3 / (1e-3 + 1e-8), 1e-18);
}

TEST(Adam, ThreeStepsMatchRecurrence) {
  const double g = 0.7, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Tensor w({1}, {1.0});
  std::vector<Tensor*> params{&w};
  auto state = makeAdamState(params);
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    w.zeroGrad();
    w.grad()[0] = g;
    adamStep(params, state);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }
  EXPECT_NEAR(w[0], theta, 1e-12);
  EXPECT_EQ(state.t, 3);
}

TEST(Adam, NanGradientAbortsStep) {
  Tensor a({2}, {1.0, 2.0}), b({1}, {3.0});
  a.zeroGrad();
  a.grad()[0] = 1.0;
  b.zeroGrad();
  b.grad()[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<Tensor*> params{&a, &b};
  auto state = makeAdamState(params);
  EXPECT_THROW(adamStep(params, state), NumericError);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(state.t, 0);
}

TEST(Dropout, IdentityCases) {
  std::mt19937_64 rng(1);
  auto x = randomTensor({4, 5}, rng);
  Dropout zero(0.0);
  EXPECT_TRUE(zero.forward(x, {Mode::Train, &rng}).sameValues(x));
  Dropout half(0.5);
  EXPECT_TRUE(half.forward(x, kInfer).sameValues(x));
  EXPECT_THROW(Dropout(1.0), ArgumentError);
  EXPECT_THROW(Dropout(-0.1), ArgumentError);
}

TEST(Dropout, SurvivorFractionAndScale) {
  std::mt19937_64 rng(99);
  Dropout half(0.5);
  auto y = half.forward(Tensor({100000}, 1.0), {Mode::Train, &rng});
  std::size_t survivors = 0;
  for (double v : y.data()) {
    if (v != 0.0) {
      EXPECT_EQ(v, 2.0);
      ++survivors;
    }
  }
  EXPECT_NEAR(static_cast<double>(survivors) / 1e5, 0.5, 0.01);
}

TEST(Determinism, ForwardIsRepeatable) {
  std::mt19937_64 rng(17);
  Network net;
  net.add(std::make_unique<Conv2d>(1, 2, 3, 3), 1);
  net.add(std::make_unique<Activation>(ActivationType::Relu), 1);
  net.add(std::make_unique<SequenceFromMaps>(), 2);
  net.add(std::make_unique<BiLstm>(8, 3), 2);
  net.add(std::make_unique<FinalStates>(), 2);
  net.add(std::make_unique<Dropout>(0.5), 3);
  net.add(std::make_unique<Dense>(6, 4), 3);
  for (std::size_t i = 0; i < net.size(); ++i) net.layer(i).initialize(rng);
  auto x = randomTensor({3, 1, 6, 5}, rng);
  std::mt19937_64 r1(5), r2(5);
  auto a = net.forward(x, {Mode::Train, &r1});
  auto b = net.forward(x, {Mode::Train, &r2});
  EXPECT_TRUE(a.sameValues(b));
}

TEST(LayerDescriptor, RoundTripsThroughFactory) {
  std::vector<std::unique_ptr<Layer>> layers;
  layers.push_back(std::make_unique<Conv2d>(3, 8, 3, 2, Padding::Same));
  layers.push_back(std::make_unique<BatchNorm>(5));
  layers.push_back(std::make_unique<MaxPool2d>(2, 3));
  layers.push_back(std::make_unique<Activation>(ActivationType::Sigmoid));
  layers.push_back(std::make_unique<BiLstm>(16, 4));
  layers.push_back(std::make_unique<Dense>(8, 4));
  layers.push_back(std::make_unique<Dropout>(0.3));
  layers.push_back(std::make_unique<Softmax>());
  layers.push_back(std::make_unique<SequenceFromMaps>());
  layers.push_back(std::make_unique<FinalStates>());
  for (const auto& l : layers) {
    auto rebuilt = makeLayer(l->descriptor());
    EXPECT_EQ(rebuilt->descriptor(), l->descriptor());
    EXPECT_EQ(rebuilt->paramCount(), l->paramCount());
  }
  EXPECT_THROW(makeLayer("warp9 x=1"), FormatError);
}
