#include "sleepalign/nn/mrcnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "../binary_io.hpp"
#include "sleepalign/rng.hpp"

namespace sleepalign::nn {

namespace {

enum LayerIndex : std::size_t { kWide1 = 0, kWide2 = 1, kNarrow1 = 2, kNarrow2 = 3, kHidden = 4, kOut = 5 };

constexpr std::string_view kCheckpointMagic = "SLMRCNN1";
constexpr std::uint32_t kCheckpointVersion = 1;

// Runs fn(i) for i in [0, n) on up to `jobs` threads with contiguous chunks.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

struct BranchCache {
  std::vector<double> z1, a1, pooled, z2, a2, mean;
  std::vector<std::size_t> argmax;
};

struct SampleCache {
  std::vector<double> input;  // scaled
  BranchCache wide, narrow;
  std::vector<double> concat, zh, ah, logits;
};

std::vector<double> activate_all(Activation act, const std::vector<double>& z) {
  std::vector<double> a(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = activate(act, z[i]);
  return a;
}

std::vector<double> mean_over_time(const std::vector<double>& a, std::size_t channels) {
  const std::size_t len = a.size() / channels;
  std::vector<double> m(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t t = 0; t < len; ++t) acc += a[c * len + t];
    m[c] = acc / static_cast<double>(len);
  }
  return m;
}

std::vector<double> dense(std::span<const double> w, std::span<const double> b, const std::vector<double>& x,
                          int out) {
  std::vector<double> y(static_cast<std::size_t>(out));
  const std::size_t in = x.size();
  for (std::size_t o = 0; o < y.size(); ++o) {
    double acc = b[o];
    for (std::size_t i = 0; i < in; ++i) acc += w[o * in + i] * x[i];
    y[o] = acc;
  }
  return y;
}

void forward_branch(const ModelParams& m, std::size_t conv1, std::size_t conv2, int pool,
                    const std::vector<double>& input, BranchCache& cache) {
  const auto& l1 = m.layers()[conv1];
  const auto& l2 = m.layers()[conv2];
  const int in_len = m.config().input_length;
  cache.z1 = conv1d_preactivation(input, in_len, l1.conv, m.weights(conv1), m.bias(conv1));
  cache.a1 = activate_all(l1.activation, cache.z1);
  const int len1 = l1.conv.output_length(in_len);
  cache.pooled = max_pool(cache.a1, l1.conv.out_channels, len1, pool, &cache.argmax);
  const int pooled_len = len1 / pool;
  cache.z2 = conv1d_preactivation(cache.pooled, pooled_len, l2.conv, m.weights(conv2), m.bias(conv2));
  cache.a2 = activate_all(l2.activation, cache.z2);
  cache.mean = mean_over_time(cache.a2, static_cast<std::size_t>(l2.conv.out_channels));
}

SampleCache forward_sample(const ModelParams& m, const std::vector<double>& raw) {
  const auto& cfg = m.config();
  if (raw.size() != static_cast<std::size_t>(cfg.input_length)) {
    throw InvalidArgument("forward: epoch has " + std::to_string(raw.size()) + " samples, model expects " +
                          std::to_string(cfg.input_length));
  }
  SampleCache c;
  c.input.resize(raw.size());
  if (cfg.zscore_input) {
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= static_cast<double>(raw.size());
    double var = 0.0;
    for (double v : raw) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(raw.size()));
    const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t i = 0; i < raw.size(); ++i) c.input[i] = (raw[i] - mean) * inv;
  } else {
    for (std::size_t i = 0; i < raw.size(); ++i) c.input[i] = raw[i] * cfg.input_scale;
  }
  forward_branch(m, kWide1, kWide2, cfg.wide.pool, c.input, c.wide);
  forward_branch(m, kNarrow1, kNarrow2, cfg.narrow.pool, c.input, c.narrow);
  c.concat = c.wide.mean;
  c.concat.insert(c.concat.end(), c.narrow.mean.begin(), c.narrow.mean.end());
  c.zh = dense(m.weights(kHidden), m.bias(kHidden), c.concat, cfg.hidden);
  c.ah = activate_all(m.layers()[kHidden].activation, c.zh);
  c.logits = dense(m.weights(kOut), m.bias(kOut), c.ah, cfg.classes);
  return c;
}

std::vector<double> tap_vector(const ModelParams& m, const SampleCache& c, FeatureTap tap) {
  switch (tap) {
    case FeatureTap::kWideConv1:
      return mean_over_time(c.wide.a1, static_cast<std::size_t>(m.config().wide.channels1));
    case FeatureTap::kWideConv2: return c.wide.mean;
    case FeatureTap::kNarrowConv1:
      return mean_over_time(c.narrow.a1, static_cast<std::size_t>(m.config().narrow.channels1));
    case FeatureTap::kNarrowConv2: return c.narrow.mean;
    case FeatureTap::kConcat: return c.concat;
    case FeatureTap::kHidden: return c.ah;
  }
  throw InvalidArgument("unknown feature tap");
}

// Softmax cross-entropy for one sample; writes dL/dlogits scaled by `scale`.
double cross_entropy(const std::vector<double>& logits, int label, double scale, std::vector<double>& grad) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  grad.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double p = std::exp(logits[k] - lse);
    grad[k] = scale * (p - (static_cast<int>(k) == label ? 1.0 : 0.0));
  }
  return lse - logits[static_cast<std::size_t>(label)];
}

void backward_branch(const ModelParams& m, std::size_t conv1, std::size_t conv2, int pool,
                     const std::vector<double>& input, const BranchCache& c, std::span<const double> grad_mean,
                     std::span<double> g) {
  const auto& l1 = m.layers()[conv1];
  const auto& l2 = m.layers()[conv2];
  const int in_len = m.config().input_length;
  const int len1 = l1.conv.output_length(in_len);
  const int pooled_len = len1 / pool;
  const std::size_t c2 = static_cast<std::size_t>(l2.conv.out_channels);
  const std::size_t len2 = c.a2.size() / c2;

  std::vector<double> dz2(c.z2.size());
  for (std::size_t ch = 0; ch < c2; ++ch) {
    const double dm = grad_mean[ch] / static_cast<double>(len2);
    for (std::size_t t = 0; t < len2; ++t) {
      const std::size_t i = ch * len2 + t;
      dz2[i] = dm * activate_derivative(l2.activation, c.z2[i]);
    }
  }
  std::vector<double> dpooled(c.pooled.size(), 0.0);
  conv1d_backward(c.pooled, pooled_len, l2.conv, m.weights(conv2), dz2,
                  g.subspan(l2.weight_offset, l2.weight_count), g.subspan(l2.bias_offset, l2.bias_count),
                  dpooled);

  std::vector<double> dz1(c.z1.size(), 0.0);
  for (std::size_t i = 0; i < dpooled.size(); ++i) dz1[c.argmax[i]] += dpooled[i];
  for (std::size_t i = 0; i < dz1.size(); ++i) {
    if (dz1[i] != 0.0) dz1[i] *= activate_derivative(l1.activation, c.z1[i]);
  }
  conv1d_backward(input, in_len, l1.conv, m.weights(conv1), dz1,
                  g.subspan(l1.weight_offset, l1.weight_count), g.subspan(l1.bias_offset, l1.bias_count), {});
}

// Loss and gradient of one sample (already scaled by 1/N) into `g`, which the
// caller zeroes.
double backward_sample(const ModelParams& m, const std::vector<double>& raw, int label, double scale,
                       std::span<double> g) {
  const auto c = forward_sample(m, raw);
  const auto& cfg = m.config();
  std::vector<double> dlogits;
  const double loss = cross_entropy(c.logits, label, scale, dlogits);

  const auto& lo = m.layers()[kOut];
  const auto w_out = m.weights(kOut);
  const std::size_t hidden = c.ah.size();
  std::vector<double> dah(hidden, 0.0);
  for (std::size_t o = 0; o < dlogits.size(); ++o) {
    g[lo.bias_offset + o] += dlogits[o];
    for (std::size_t i = 0; i < hidden; ++i) {
      g[lo.weight_offset + o * hidden + i] += dlogits[o] * c.ah[i];
      dah[i] += dlogits[o] * w_out[o * hidden + i];
    }
  }

  const auto& lh = m.layers()[kHidden];
  const auto w_h = m.weights(kHidden);
  const std::size_t in = c.concat.size();
  std::vector<double> dconcat(in, 0.0);
  for (std::size_t o = 0; o < hidden; ++o) {
    const double dz = dah[o] * activate_derivative(lh.activation, c.zh[o]);
    g[lh.bias_offset + o] += dz;
    for (std::size_t i = 0; i < in; ++i) {
      g[lh.weight_offset + o * in + i] += dz * c.concat[i];
      dconcat[i] += dz * w_h[o * in + i];
    }
  }

  const auto wide_dim = static_cast<std::size_t>(cfg.wide.channels2);
  backward_branch(m, kWide1, kWide2, cfg.wide.pool, c.input, c.wide, std::span(dconcat).first(wide_dim), g);
  backward_branch(m, kNarrow1, kNarrow2, cfg.narrow.pool, c.input, c.narrow,
                  std::span(dconcat).subspan(wide_dim), g);
  return loss;
}

std::vector<std::vector<double>> dataset_inputs(const edf::EpochDataset& dataset) {
  std::vector<std::vector<double>> out;
  out.reserve(dataset.size());
  for (const auto& e : dataset.epochs) out.push_back(e.samples);
  return out;
}

}  // namespace

std::string_view feature_tap_name(FeatureTap tap) {
  switch (tap) {
    case FeatureTap::kWideConv1: return "wide.conv1";
    case FeatureTap::kWideConv2: return "wide.conv2";
    case FeatureTap::kNarrowConv1: return "narrow.conv1";
    case FeatureTap::kNarrowConv2: return "narrow.conv2";
    case FeatureTap::kConcat: return "concat";
    case FeatureTap::kHidden: return "head.hidden";
  }
  return "?";
}

MrcnnConfig MrcnnConfig::standard() { return MrcnnConfig{}; }

MrcnnConfig MrcnnConfig::tiny() {
  MrcnnConfig c;
  c.input_length = 300;
  c.wide = BranchSpec{40, 5, 8, 8, 7, 16};
  c.narrow = BranchSpec{5, 1, 8, 8, 7, 16};
  c.hidden = 16;
  return c;
}

void MrcnnConfig::validate() const {
  (void)ModelParams(*this);
}

nlohmann::json MrcnnConfig::to_json() const {
  auto branch = [](const BranchSpec& b) {
    return nlohmann::json{{"kernel", b.kernel}, {"stride", b.stride},   {"channels1", b.channels1},
                          {"pool", b.pool},     {"kernel2", b.kernel2}, {"channels2", b.channels2}};
  };
  return {{"input_length", input_length},
          {"wide", branch(wide)},
          {"narrow", branch(narrow)},
          {"hidden", hidden},
          {"classes", classes},
          {"activation", std::string(activation_name(activation))},
          {"feature_tap", static_cast<int>(feature_tap)},
          {"input_scale", input_scale},
          {"zscore_input", zscore_input}};
}

MrcnnConfig MrcnnConfig::from_json(const nlohmann::json& j) {
  MrcnnConfig c;
  auto branch = [](const nlohmann::json& b, BranchSpec d) {
    d.kernel = b.value("kernel", d.kernel);
    d.stride = b.value("stride", d.stride);
    d.channels1 = b.value("channels1", d.channels1);
    d.pool = b.value("pool", d.pool);
    d.kernel2 = b.value("kernel2", d.kernel2);
    d.channels2 = b.value("channels2", d.channels2);
    return d;
  };
  c.input_length = j.value("input_length", c.input_length);
  if (j.contains("wide")) c.wide = branch(j.at("wide"), c.wide);
  if (j.contains("narrow")) c.narrow = branch(j.at("narrow"), c.narrow);
  c.hidden = j.value("hidden", c.hidden);
  c.classes = j.value("classes", c.classes);
  const auto act = j.value("activation", std::string(activation_name(c.activation)));
  if (act == "gelu") c.activation = Activation::kGELU;
  else if (act == "relu") c.activation = Activation::kReLU;
  else if (act == "identity") c.activation = Activation::kIdentity;
  else throw InvalidArgument("unknown activation '" + act + "'");
  const int tap = j.value("feature_tap", static_cast<int>(c.feature_tap));
  if (tap < 0 || tap >= kNumFeatureTaps) throw InvalidArgument("feature_tap must be in [0, 5]");
  c.feature_tap = static_cast<FeatureTap>(tap);
  c.input_scale = j.value("input_scale", c.input_scale);
  c.zscore_input = j.value("zscore_input", c.zscore_input);
  return c;
}

ModelParams::ModelParams(const MrcnnConfig& config) : config_(config) {
  if (config.classes < 2) throw InvalidArgument("model needs at least 2 classes");
  if (config.hidden < 1) throw InvalidArgument("hidden width must be >= 1");
  if (!(config.input_scale > 0.0)) throw InvalidArgument("input_scale must be > 0");
  std::size_t offset = 0;
  auto add_conv = [&](const std::string& name, ConvLayerSpec spec) {
    LayerSlot s;
    s.name = name;
    s.is_conv = true;
    s.conv = spec;
    s.activation = spec.activation;
    s.weight_offset = offset;
    s.weight_count = spec.weight_count();
    offset += s.weight_count;
    s.bias_offset = offset;
    s.bias_count = static_cast<std::size_t>(spec.out_channels);
    offset += s.bias_count;
    layers_.push_back(s);
  };
  auto add_dense = [&](const std::string& name, int in, int out, Activation act) {
    LayerSlot s;
    s.name = name;
    s.dense_in = in;
    s.dense_out = out;
    s.activation = act;
    s.weight_offset = offset;
    s.weight_count = static_cast<std::size_t>(in) * out;
    offset += s.weight_count;
    s.bias_offset = offset;
    s.bias_count = static_cast<std::size_t>(out);
    offset += s.bias_count;
    layers_.push_back(s);
  };
  auto add_branch = [&](const std::string& name, const BranchSpec& b) {
    if (b.kernel2 % 2 == 0) throw InvalidArgument(name + ": second kernel must be odd for same padding");
    ConvLayerSpec c1{1, b.channels1, b.kernel, b.stride, 0, config.activation};
    const int len1 = c1.output_length(config.input_length);
    if (b.pool < 1 || len1 / b.pool < 1) {
      throw InvalidArgument(name + ": pooling window " + std::to_string(b.pool) + " exceeds conv output length " +
                            std::to_string(len1));
    }
    const int pooled = len1 / b.pool;
    ConvLayerSpec c2{b.channels1, b.channels2, b.kernel2, 1, b.kernel2 / 2, config.activation};
    (void)c2.output_length(pooled);
    add_conv(name + ".conv1", c1);
    add_conv(name + ".conv2", c2);
  };
  add_branch("wide", config.wide);
  add_branch("narrow", config.narrow);
  add_dense("head.hidden", config.wide.channels2 + config.narrow.channels2, config.hidden, config.activation);
  add_dense("head.out", config.hidden, config.classes, Activation::kIdentity);
  values_.assign(offset, 0.0);
}

ModelParams ModelParams::initialize(const MrcnnConfig& config, std::uint64_t seed) {
  ModelParams m(config);
  Rng rng(seed);
  for (const auto& l : m.layers_) {
    double fan_in = 0.0, fan_out = 0.0;
    if (l.is_conv) {
      fan_in = static_cast<double>(l.conv.in_channels) * l.conv.kernel;
      fan_out = static_cast<double>(l.conv.out_channels) * l.conv.kernel;
    } else {
      fan_in = l.dense_in;
      fan_out = l.dense_out;
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < l.weight_count; ++i) m.values_[l.weight_offset + i] = rng.uniform(-bound, bound);
  }
  return m;
}

std::span<const double> ModelParams::weights(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return std::span(values_).subspan(l.weight_offset, l.weight_count);
}
std::span<const double> ModelParams::bias(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return std::span(values_).subspan(l.bias_offset, l.bias_count);
}
std::span<double> ModelParams::weights(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return std::span(values_).subspan(l.weight_offset, l.weight_count);
}
std::span<double> ModelParams::bias(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return std::span(values_).subspan(l.bias_offset, l.bias_count);
}

std::size_t ModelParams::feature_dim(FeatureTap tap) const {
  switch (tap) {
    case FeatureTap::kWideConv1: return static_cast<std::size_t>(config_.wide.channels1);
    case FeatureTap::kWideConv2: return static_cast<std::size_t>(config_.wide.channels2);
    case FeatureTap::kNarrowConv1: return static_cast<std::size_t>(config_.narrow.channels1);
    case FeatureTap::kNarrowConv2: return static_cast<std::size_t>(config_.narrow.channels2);
    case FeatureTap::kConcat: return static_cast<std::size_t>(config_.wide.channels2 + config_.narrow.channels2);
    case FeatureTap::kHidden: return static_cast<std::size_t>(config_.hidden);
  }
  throw InvalidArgument("unknown feature tap");
}

std::string ModelParams::describe_param(std::size_t index) const {
  for (const auto& l : layers_) {
    if (index >= l.weight_offset && index < l.weight_offset + l.weight_count) {
      return l.name + ".weight[" + std::to_string(index - l.weight_offset) + "]";
    }
    if (index >= l.bias_offset && index < l.bias_offset + l.bias_count) {
      return l.name + ".bias[" + std::to_string(index - l.bias_offset) + "]";
    }
  }
  return "param[" + std::to_string(index) + "]";
}

ForwardResult forward(const ModelParams& model, SampleView batch, Domain domain, int jobs) {
  const auto classes = static_cast<std::size_t>(model.config().classes);
  const auto dim = model.feature_dim();
  ForwardResult r;
  r.rows = batch.size();
  r.logits.assign(r.rows * classes, 0.0);
  r.features.rows = r.rows;
  r.features.dim = dim;
  r.features.domain = domain;
  r.features.values.assign(r.rows * dim, 0.0);
  parallel_for(batch.size(), jobs, [&](std::size_t i) {
    const auto c = forward_sample(model, batch[i]);
    std::copy(c.logits.begin(), c.logits.end(), r.logits.begin() + static_cast<std::ptrdiff_t>(i * classes));
    const auto f = tap_vector(model, c, model.config().feature_tap);
    std::copy(f.begin(), f.end(), r.features.values.begin() + static_cast<std::ptrdiff_t>(i * dim));
  });
  return r;
}

ForwardResult forward(const ModelParams& model, const edf::EpochDataset& dataset, int jobs) {
  const auto inputs = dataset_inputs(dataset);
  return forward(model, inputs, dataset.domain, jobs);
}

GradientResult backward(const ModelParams& model, SampleView batch, std::span<const int> labels, int jobs) {
  if (batch.empty()) throw InvalidArgument("backward: empty batch");
  if (labels.size() != batch.size()) {
    throw InvalidArgument("backward: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(batch.size()) + " samples");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= model.config().classes) {
      throw InvalidArgument("backward: label " + std::to_string(labels[i]) + " at position " + std::to_string(i) +
                            " outside [0, " + std::to_string(model.config().classes - 1) + "]");
    }
  }
  const std::size_t n = batch.size();
  const std::size_t p = model.param_count();
  const double scale = 1.0 / static_cast<double>(n);

  GradientResult out;
  out.gradients.assign(p, 0.0);
  std::vector<double> losses(n, 0.0);

  if (jobs <= 1 || n == 1) {
    std::vector<double> g(p);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(g.begin(), g.end(), 0.0);
      losses[i] = backward_sample(model, batch[i], labels[i], scale, g);
      for (std::size_t k = 0; k < p; ++k) out.gradients[k] += g[k];
    }
  } else {
    std::vector<std::vector<double>> per_sample(n, std::vector<double>(p, 0.0));
    parallel_for(n, jobs, [&](std::size_t i) {
      losses[i] = backward_sample(model, batch[i], labels[i], scale, per_sample[i]);
    });
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < p; ++k) out.gradients[k] += per_sample[i][k];
    }
  }
  for (double l : losses) out.loss += l;
  out.loss *= scale;
  return out;
}

void sgd_step(ModelParams& model, std::span<const double> gradients, double lr, double weight_decay) {
  if (gradients.size() != model.param_count()) {
    throw InvalidArgument("sgd_step: gradient has " + std::to_string(gradients.size()) + " entries, model has " +
                          std::to_string(model.param_count()));
  }
  if (!(lr >= 0.0)) throw InvalidArgument("sgd_step: learning rate must be >= 0");
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    if (!std::isfinite(gradients[i])) {
      throw Error("sgd_step: non-finite gradient " + std::to_string(gradients[i]) + " at " +
                  model.describe_param(i) + "; aborting update");
    }
  }
  auto values = model.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] -= lr * (gradients[i] + weight_decay * values[i]);
  }
}

FeatureSet extract_features(const ModelParams& model, const edf::EpochDataset& dataset, int jobs) {
  auto r = forward(model, dataset, jobs);
  r.features.domain = dataset.domain;
  return std::move(r.features);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<int> predict(const ModelParams& model, const edf::EpochDataset& dataset, int jobs) {
  const auto r = forward(model, dataset, jobs);
  const auto classes = static_cast<std::size_t>(model.config().classes);
  std::vector<int> out(r.rows);
  for (std::size_t i = 0; i < r.rows; ++i) {
    const auto row = r.logits_row(i, classes);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::string serialize_checkpoint(const ModelParams& model) {
  const auto& c = model.config();
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.input_length));
  for (const auto* b : {&c.wide, &c.narrow}) {
    for (int v : {b->kernel, b->stride, b->channels1, b->pool, b->kernel2, b->channels2}) {
      w.u32(static_cast<std::uint32_t>(v));
    }
  }
  w.u32(static_cast<std::uint32_t>(c.hidden));
  w.u32(static_cast<std::uint32_t>(c.classes));
  w.u32(static_cast<std::uint32_t>(c.activation));
  w.u32(static_cast<std::uint32_t>(c.feature_tap));
  w.f64(c.input_scale);
  w.u32(c.zscore_input ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    w.u32(l.is_conv ? 1 : 0);
    if (l.is_conv) {
      for (int v : {l.conv.in_channels, l.conv.out_channels, l.conv.kernel, l.conv.stride, l.conv.padding}) {
        w.u32(static_cast<std::uint32_t>(v));
      }
    } else {
      for (int v : {l.dense_in, l.dense_out, 0, 0, 0}) w.u32(static_cast<std::uint32_t>(v));
    }
    w.u32(static_cast<std::uint32_t>(l.activation));
  }
  w.u64(model.param_count());
  for (double v : model.values()) w.f64(v);
  return w.data();
}

ModelParams deserialize_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) throw Error("not a sleepalign checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  MrcnnConfig c;
  c.input_length = static_cast<int>(r.u32());
  for (auto* b : {&c.wide, &c.narrow}) {
    for (int* v : {&b->kernel, &b->stride, &b->channels1, &b->pool, &b->kernel2, &b->channels2}) {
      *v = static_cast<int>(r.u32());
    }
  }
  c.hidden = static_cast<int>(r.u32());
  c.classes = static_cast<int>(r.u32());
  c.activation = static_cast<Activation>(r.u32());
  c.feature_tap = static_cast<FeatureTap>(r.u32());
  c.input_scale = r.f64();
  c.zscore_input = r.u32() != 0;
  ModelParams m(c);
  const auto layer_count = r.u32();
  if (layer_count != m.layers().size()) throw Error("checkpoint layer count does not match its config");
  for (const auto& l : m.layers()) {
    const bool is_conv = r.u32() == 1;
    int f[5];
    for (int& v : f) v = static_cast<int>(r.u32());
    const auto act = static_cast<Activation>(r.u32());
    const bool ok = is_conv == l.is_conv && act == l.activation &&
                    (l.is_conv ? (f[0] == l.conv.in_channels && f[1] == l.conv.out_channels &&
                                  f[2] == l.conv.kernel && f[3] == l.conv.stride && f[4] == l.conv.padding)
                               : (f[0] == l.dense_in && f[1] == l.dense_out));
    if (!ok) throw Error("checkpoint layer '" + l.name + "' spec does not match its config");
  }
  const auto count = r.u64();
  if (count != m.param_count()) {
    throw Error("checkpoint holds " + std::to_string(count) + " parameters, config implies " +
                std::to_string(m.param_count()));
  }
  for (auto& v : m.values()) v = r.f64();
  if (!r.at_end()) throw Error("checkpoint has trailing bytes");
  return m;
}

void write_checkpoint(const ModelParams& model, const std::string& path) {
  detail::write_file(path, serialize_checkpoint(model));
}

ModelParams read_checkpoint(const std::string& path) {
  return deserialize_checkpoint(detail::read_file(path));
}

nlohmann::json checkpoint_sidecar(const ModelParams& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers()) {
    nlohmann::json j{{"name", l.name}, {"activation", std::string(activation_name(l.activation))}};
    if (l.is_conv) {
      j["type"] = "conv1d";
      j["weight_shape"] = {l.conv.out_channels, l.conv.in_channels, l.conv.kernel};
      j["stride"] = l.conv.stride;
      j["padding"] = l.conv.padding;
    } else {
      j["type"] = "dense";
      j["weight_shape"] = {l.dense_out, l.dense_in};
    }
    j["bias_shape"] = {l.bias_count};
    layers.push_back(j);
  }
  return {{"format", std::string(kCheckpointMagic)},
          {"version", kCheckpointVersion},
          {"config", model.config().to_json()},
          {"feature_tap", std::string(feature_tap_name(model.config().feature_tap))},
          {"feature_dim", model.feature_dim()},
          {"param_count", model.param_count()},
          {"layers", layers}};
}

}  // namespace sleepalign::nn
