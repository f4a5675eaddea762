#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "sleepalign/nn/layers.hpp"
#include "sleepalign/nn/mrcnn.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace sleepalign;
using nn::Activation;
using nn::ConvLayerSpec;

namespace {

std::vector<double> nested_conv(const std::vector<double>& x, int len, const ConvLayerSpec& s,
                                const std::vector<double>& w, const std::vector<double>& b) {
  const int out_len = (len + 2 * s.padding - s.kernel) / s.stride + 1;
  std::vector<double> y(static_cast<std::size_t>(s.out_channels * out_len));
  for (int o = 0; o < s.out_channels; ++o) {
    for (int t = 0; t < out_len; ++t) {
      double acc = b[o];
      for (int c = 0; c < s.in_channels; ++c) {
        for (int k = 0; k < s.kernel; ++k) {
          const int pos = t * s.stride + k - s.padding;
          if (pos < 0 || pos >= len) continue;
          acc += w[(o * s.in_channels + c) * s.kernel + k] * x[c * len + pos];
        }
      }
      y[o * out_len + t] = acc;
    }
  }
  return y;
}

std::vector<double> randoms(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

edf::EpochDataset dataset_from(const std::vector<std::vector<double>>& xs) {
  edf::EpochDataset ds;
  for (std::size_t i = 0; i < xs.size(); ++i) ds.epochs.push_back({xs[i], Stage::kW, "s", static_cast<int>(i), Domain::kSource});
  ds.refresh_counts();
  return ds;
}

}  // namespace

TEST(Conv, HandExample) {
  ConvLayerSpec s{1, 1, 2, 1, 0, Activation::kIdentity};
  const std::vector<double> x{1, 2, 3, 4}, w{1, 1}, b{0};
  EXPECT_EQ(nn::conv1d_preactivation(x, 4, s, w, b), std::vector<double>({3, 5, 7}));
}

TEST(Conv, UnitKernelIsIdentity) {
  ConvLayerSpec s{1, 1, 1, 1, 0, Activation::kIdentity};
  const std::vector<double> x{0.5, -2, 7}, w{1}, b{0};
  EXPECT_EQ(nn::conv1d_preactivation(x, 3, s, w, b), x);
}

TEST(Conv, MatchesNestedLoops) {
  Rng rng(41);
  for (const auto& s : {ConvLayerSpec{3, 4, 5, 2, 0}, ConvLayerSpec{2, 3, 7, 1, 3}, ConvLayerSpec{1, 2, 40, 5, 0}}) {
    const int len = 60;
    const auto x = randoms(rng, static_cast<std::size_t>(s.in_channels * len));
    const auto w = randoms(rng, s.weight_count());
    const auto b = randoms(rng, static_cast<std::size_t>(s.out_channels));
    const auto got = nn::conv1d_preactivation(x, len, s, w, b);
    const auto want = nested_conv(x, len, s, w, b);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv, BatchedForwardAppliesActivation) {
  Rng rng(42);
  ConvLayerSpec s{1, 2, 3, 1, 0, Activation::kReLU};
  nn::Tensor in(2, 1, 10);
  for (auto& v : in.values) v = rng.normal();
  const auto w = randoms(rng, s.weight_count());
  const std::vector<double> b{0.1, -0.1};
  const auto out = nn::conv1d_forward(in, s, w, b);
  EXPECT_EQ(out.batch, 2u);
  EXPECT_EQ(out.channels, 2u);
  EXPECT_EQ(out.length, 8u);
  for (std::size_t n = 0; n < 2; ++n) {
    const auto z = nn::conv1d_preactivation(in.row(n, 0), 10, s, w, b);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(out.values[n * z.size() + i], std::max(0.0, z[i]));
  }
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  // L = sum_t r_t * z_t for a fixed random r, so dL/dz = r.
  Rng rng(43);
  ConvLayerSpec s{2, 3, 4, 2, 1};
  const int len = 15;
  auto x = randoms(rng, 2 * len);
  auto w = randoms(rng, s.weight_count());
  auto b = randoms(rng, 3);
  const auto z0 = nn::conv1d_preactivation(x, len, s, w, b);
  const auto r = randoms(rng, z0.size());
  auto loss = [&] {
    const auto z = nn::conv1d_preactivation(x, len, s, w, b);
    return std::inner_product(z.begin(), z.end(), r.begin(), 0.0);
  };
  std::vector<double> gw(w.size(), 0.0), gb(b.size(), 0.0), gx(x.size(), 0.0);
  nn::conv1d_backward(x, len, s, w, r, gw, gb, gx);
  auto fd = [&](std::vector<double>& v, std::size_t i) {
    const double saved = v[i];
    v[i] = saved + 1e-6;
    const double up = loss();
    v[i] = saved - 1e-6;
    const double down = loss();
    v[i] = saved;
    return (up - down) / 2e-6;
  };
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(gw[i], fd(w, i), 1e-7);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(gb[i], fd(b, i), 1e-7);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(gx[i], fd(x, i), 1e-7);
}

TEST(Conv, ShapeErrors) {
  ConvLayerSpec s{1, 1, 5, 1, 0};
  EXPECT_THROW(s.output_length(4), Error);
  ConvLayerSpec bad{1, 1, 0, 1, 0};
  EXPECT_THROW(bad.output_length(10), Error);
  const std::vector<double> x(3, 1.0), w(5, 1.0), b(1, 0.0);
  EXPECT_THROW(nn::conv1d_preactivation(x, 3, s, w, b), Error);
}

TEST(Activations, DerivativesMatchFiniteDifferences) {
  for (auto a : {Activation::kIdentity, Activation::kReLU, Activation::kGELU}) {
    for (double x : {-2.3, -0.4, 0.3, 1.7}) {
      const double fd = (nn::activate(a, x + 1e-6) - nn::activate(a, x - 1e-6)) / 2e-6;
      EXPECT_NEAR(nn::activate_derivative(a, x), fd, 1e-8);
    }
  }
  EXPECT_NEAR(nn::activate(Activation::kGELU, 1.0), 0.8413447460685429, 1e-12);
}

TEST(MaxPool, FloorsAndRecordsArgmax) {
  const std::vector<double> x{1, 5, 2, 0, 9, 3, 7};
  std::vector<std::size_t> arg;
  const auto y = nn::max_pool(x, 1, 7, 2, &arg);
  EXPECT_EQ(y, std::vector<double>({5, 2, 9}));
  EXPECT_EQ(arg, std::vector<std::size_t>({1, 2, 4}));
}

TEST(Mrcnn, StandardShapes) {
  const auto m = nn::ModelParams::initialize(nn::MrcnnConfig::standard(), 1);
  ASSERT_EQ(m.layers().size(), 6u);
  EXPECT_EQ(m.layers()[0].conv.kernel, 400);
  EXPECT_EQ(m.layers()[0].conv.stride, 50);
  EXPECT_EQ(m.layers()[0].conv.out_channels, 32);
  EXPECT_EQ(m.layers()[2].conv.kernel, 50);
  EXPECT_EQ(m.layers()[1].conv.out_channels, 64);
  EXPECT_EQ(m.feature_dim(), 128u);
  EXPECT_EQ(m.feature_dim(nn::FeatureTap::kHidden), 64u);
  EXPECT_EQ(m.feature_dim(nn::FeatureTap::kWideConv1), 32u);
}

TEST(Mrcnn, ZeroWeightsGiveUniformSoftmax) {
  const nn::ModelParams m(nn::MrcnnConfig::tiny());
  Rng rng(44);
  const auto batch = oracle::random_inputs(rng, 2, 300);
  const auto fr = nn::forward(m, batch);
  for (double v : fr.logits) EXPECT_EQ(v, 0.0);
  for (double p : nn::softmax(fr.logits_row(0, 5))) EXPECT_NEAR(p, 0.2, 1e-15);
  const std::vector<int> labels{0, 3};
  EXPECT_NEAR(nn::backward(m, batch, labels).loss, std::log(5.0), 1e-12);
}

TEST(Mrcnn, ShapesAndDuplicateRows) {
  const auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 2);
  Rng rng(45);
  auto batch = oracle::random_inputs(rng, 3, 300);
  batch.push_back(batch[1]);
  const auto fr = nn::forward(m, batch);
  EXPECT_EQ(fr.logits.size(), 4u * 5u);
  EXPECT_EQ(fr.features.rows, 4u);
  EXPECT_EQ(fr.features.dim, m.feature_dim());
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(fr.logits[5 + k], fr.logits[15 + k]);
  for (std::size_t d = 0; d < fr.features.dim; ++d) EXPECT_EQ(fr.features.row(1)[d], fr.features.row(3)[d]);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto p = nn::softmax(fr.logits_row(i, 5));
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Mrcnn, RejectsWrongLengthAndBadLabels) {
  const auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 3);
  std::vector<std::vector<double>> bad{std::vector<double>(299, 0.0)};
  EXPECT_THROW(nn::forward(m, bad), Error);
  Rng rng(46);
  const auto batch = oracle::random_inputs(rng, 1, 300);
  EXPECT_THROW(nn::backward(m, batch, std::vector<int>{5}), Error);
  EXPECT_THROW(nn::backward(m, batch, std::vector<int>{0, 1}), Error);
}

TEST(Mrcnn, GradientCheckEveryLayer) {
  auto cfg = nn::MrcnnConfig::tiny();
  const auto m = nn::ModelParams::initialize(cfg, 7);
  Rng rng(47);
  const auto batch = oracle::random_inputs(rng, 3, 300);
  const std::vector<int> labels{1, 4, 2};
  for (const auto& l : m.layers()) {
    std::vector<std::size_t> idx;
    for (int k = 0; k < 6; ++k) idx.push_back(l.weight_offset + rng.below(l.weight_count));
    idx.push_back(l.bias_offset + rng.below(l.bias_count));
    const auto r = oracle::gradient_check(m, batch, labels, idx);
    EXPECT_LE(r.max_rel_error, 1e-4) << l.name << " param " << r.worst_index << " analytic " << r.worst_analytic
                                     << " numeric " << r.worst_numeric;
  }
}

TEST(Mrcnn, ConfidentPredictionHasTinyLoss) {
  auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 8);
  const auto& out = m.layers().back();
  for (std::size_t i = 0; i < out.weight_count; ++i) m.values()[out.weight_offset + i] = 0.0;
  m.values()[out.bias_offset + 2] = 60.0;
  Rng rng(48);
  const auto batch = oracle::random_inputs(rng, 2, 300);
  const auto g = nn::backward(m, batch, std::vector<int>{2, 2});
  EXPECT_LT(g.loss, 1e-20);
  for (std::size_t k = 0; k < out.bias_count; ++k) EXPECT_LT(std::abs(g.gradients[out.bias_offset + k]), 1e-20);
}

TEST(Mrcnn, BackwardIndependentOfJobs) {
  const auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 9);
  Rng rng(49);
  const auto batch = oracle::random_inputs(rng, 7, 300);
  const std::vector<int> labels{0, 1, 2, 3, 4, 0, 1};
  const auto a = nn::backward(m, batch, labels, 1);
  const auto b = nn::backward(m, batch, labels, 3);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradients, b.gradients);
}

TEST(Mrcnn, LossDecreasesOverFirstSteps) {
  auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 10);
  Rng rng(50);
  const auto batch = oracle::random_inputs(rng, 10, 300);
  const std::vector<int> labels{0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  double prev = INFINITY;
  for (int step = 0; step < 10; ++step) {
    const auto g = nn::backward(m, batch, labels);
    EXPECT_LT(g.loss, prev) << "step " << step;
    prev = g.loss;
    nn::sgd_step(m, g.gradients, 1e-3, 0.0);
  }
}

TEST(Sgd, Examples) {
  auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 11);
  const auto before = std::vector<double>(m.values().begin(), m.values().end());
  std::vector<double> g(m.param_count(), 2.0);
  nn::sgd_step(m, g, 0.0, 0.0);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), m.values().begin()));

  m.values()[0] = 1.0;
  nn::sgd_step(m, g, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(m.values()[0], 0.8);

  auto a = m, b = m;
  nn::sgd_step(a, g, 0.1, 0.0);
  nn::sgd_step(a, g, 0.1, 0.0);
  std::vector<double> g2(g.size(), 4.0);
  nn::sgd_step(b, g2, 0.1, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-12);

  g[5] = NAN;
  EXPECT_THROW(nn::sgd_step(m, g, 0.1, 0.0), Error);
  EXPECT_THROW(nn::sgd_step(m, std::vector<double>(3, 0.0), 0.1, 0.0), Error);
}

TEST(Sgd, WeightDecay) {
  auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 12);
  m.values()[0] = 2.0;
  std::vector<double> g(m.param_count(), 0.0);
  nn::sgd_step(m, g, 0.5, 0.1);
  EXPECT_DOUBLE_EQ(m.values()[0], 2.0 - 0.5 * 0.1 * 2.0);
}

TEST(Init, SeededAndBounded) {
  const auto cfg = nn::MrcnnConfig::tiny();
  const auto a = nn::ModelParams::initialize(cfg, 13);
  const auto b = nn::ModelParams::initialize(cfg, 13);
  const auto c = nn::ModelParams::initialize(cfg, 14);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  for (const auto& l : a.layers()) {
    const double fan_in = l.is_conv ? l.conv.in_channels * l.conv.kernel : l.dense_in;
    const double fan_out = l.is_conv ? l.conv.out_channels * l.conv.kernel : l.dense_out;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double w : a.weights(&l - a.layers().data())) EXPECT_LE(std::abs(w), bound);
    for (double v : a.bias(&l - a.layers().data())) EXPECT_EQ(v, 0.0);
  }
}

TEST(Features, DeterministicWithSharedDimension) {
  const auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 15);
  Rng rng(51);
  auto src = dataset_from(oracle::random_inputs(rng, 4, 300));
  auto tgt = dataset_from(oracle::random_inputs(rng, 6, 300));
  tgt.domain = Domain::kTarget;
  for (auto& e : tgt.epochs) e.domain = Domain::kTarget;
  const auto a = nn::extract_features(m, src);
  const auto b = nn::extract_features(m, src);
  const auto t = nn::extract_features(m, tgt);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.rows, 4u);
  EXPECT_EQ(t.rows, 6u);
  EXPECT_EQ(a.dim, t.dim);
  EXPECT_EQ(t.domain, Domain::kTarget);
}

TEST(Features, TapSelection) {
  auto cfg = nn::MrcnnConfig::tiny();
  Rng rng(52);
  const auto ds = dataset_from(oracle::random_inputs(rng, 2, 300));
  for (int tap = 0; tap < nn::kNumFeatureTaps; ++tap) {
    cfg.feature_tap = static_cast<nn::FeatureTap>(tap);
    const auto m = nn::ModelParams::initialize(cfg, 16);
    EXPECT_EQ(nn::extract_features(m, ds).dim, m.feature_dim());
  }
}

TEST(Features, ZScoreInputIgnoresGain) {
  auto cfg = nn::MrcnnConfig::tiny();
  cfg.zscore_input = true;
  const auto m = nn::ModelParams::initialize(cfg, 17);
  Rng rng(53);
  auto xs = oracle::random_inputs(rng, 1, 300);
  auto scaled = xs;
  for (auto& v : scaled[0]) v = 3.0 * v + 7.0;
  const auto a = nn::forward(m, xs).features.values;
  const auto b = nn::forward(m, scaled).features.values;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  auto cfg = nn::MrcnnConfig::tiny();
  cfg.feature_tap = nn::FeatureTap::kHidden;
  const auto m = nn::ModelParams::initialize(cfg, 18);
  const auto bytes = nn::serialize_checkpoint(m);
  EXPECT_EQ(bytes.substr(0, 8), "SLMRCNN1");
  const auto back = nn::deserialize_checkpoint(bytes);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.config().feature_tap, nn::FeatureTap::kHidden);
  EXPECT_EQ(nn::serialize_checkpoint(back), bytes);

  const auto path = (std::filesystem::temp_directory_path() / "sleepalign_ckpt_test.bin").string();
  nn::write_checkpoint(m, path);
  EXPECT_TRUE(nn::read_checkpoint(path) == m);
  std::filesystem::remove(path);
  const auto sidecar = nn::checkpoint_sidecar(m);
  EXPECT_EQ(sidecar["param_count"], m.param_count());
}

TEST(Checkpoint, RejectsCorruption) {
  const auto m = nn::ModelParams::initialize(nn::MrcnnConfig::tiny(), 19);
  auto bytes = nn::serialize_checkpoint(m);
  EXPECT_THROW(nn::deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  bytes[0] = 'X';
  EXPECT_THROW(nn::deserialize_checkpoint(bytes), Error);
}

TEST(Config, JsonRoundTripAndValidation) {
  const auto cfg = nn::MrcnnConfig::tiny();
  const auto back = nn::MrcnnConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  auto bad = cfg;
  bad.wide.pool = 100;
  EXPECT_THROW(bad.validate(), Error);
  auto even = cfg;
  even.narrow.kernel2 = 6;
  EXPECT_THROW(even.validate(), Error);
}
