#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepalign/edf/dataset.hpp"
#include "sleepalign/nn/layers.hpp"
#include "sleepalign/nn/tensor.hpp"

namespace sleepalign::nn {

// One resolution branch: Conv(kernel, stride) -> sigma -> MaxPool(pool) ->
// Conv(kernel2, same padding) -> sigma -> mean over time.
struct BranchSpec {
  int kernel = 400;
  int stride = 50;
  int channels1 = 32;
  int pool = 8;
  int kernel2 = 7;
  int channels2 = 64;
};

// Representation points that can serve as the shared feature space. Conv taps
// are reduced to a vector by mean pooling over time.
enum class FeatureTap : int {
  kWideConv1 = 0,
  kWideConv2 = 1,
  kNarrowConv1 = 2,
  kNarrowConv2 = 3,
  kConcat = 4,
  kHidden = 5,
};
inline constexpr int kNumFeatureTaps = 6;
std::string_view feature_tap_name(FeatureTap tap);

struct MrcnnConfig {
  int input_length = static_cast<int>(kEpochSamples);
  BranchSpec wide{400, 50};
  BranchSpec narrow{50, 6};
  int hidden = 64;
  int classes = static_cast<int>(kNumStages);
  Activation activation = Activation::kGELU;
  FeatureTap feature_tap = FeatureTap::kConcat;
  // Fixed multiplier applied to raw microvolt samples before the first conv.
  double input_scale = 0.02;
  // When set, each epoch is standardized (zero mean, unit std) instead.
  bool zscore_input = false;

  // Full-size model for 30 s epochs at 100 Hz.
  static MrcnnConfig standard();
  // Input length 300 with kernels 40/5; used by the gradient checks.
  static MrcnnConfig tiny();

  void validate() const;
  nlohmann::json to_json() const;
  static MrcnnConfig from_json(const nlohmann::json& j);
};

// A parameterised layer's slot in the flat parameter vector.
struct LayerSlot {
  std::string name;
  bool is_conv = false;
  ConvLayerSpec conv;      // valid when is_conv
  int dense_in = 0;        // valid when !is_conv
  int dense_out = 0;
  Activation activation = Activation::kIdentity;
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
};

// All weights and biases of the two-branch network and its classifier head,
// stored contiguously in declaration order: wide.conv1, wide.conv2,
// narrow.conv1, narrow.conv2, head.hidden, head.out.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const MrcnnConfig& config);

  // Uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
  static ModelParams initialize(const MrcnnConfig& config, std::uint64_t seed);

  const MrcnnConfig& config() const { return config_; }
  const std::vector<LayerSlot>& layers() const { return layers_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t param_count() const { return values_.size(); }

  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> weights(std::size_t layer);
  std::span<double> bias(std::size_t layer);

  // Flattened dimension D of the configured feature tap.
  std::size_t feature_dim() const { return feature_dim(config_.feature_tap); }
  std::size_t feature_dim(FeatureTap tap) const;
  void set_feature_tap(FeatureTap tap) { config_.feature_tap = tap; }

  // Name of the layer owning flat parameter `index` (diagnostics).
  std::string describe_param(std::size_t index) const;

  bool operator==(const ModelParams& other) const {
    return values_ == other.values_ && layers_.size() == other.layers_.size();
  }

 private:
  MrcnnConfig config_;
  std::vector<LayerSlot> layers_;
  std::vector<double> values_;
};

struct ForwardResult {
  std::size_t rows = 0;
  std::vector<double> logits;  // rows x classes
  FeatureSet features;

  std::span<const double> logits_row(std::size_t i, std::size_t classes) const {
    return std::span(logits).subspan(i * classes, classes);
  }
};

struct GradientResult {
  double loss = 0.0;                 // mean softmax cross-entropy
  std::vector<double> gradients;     // same layout as ModelParams::values()
};

// Samples are raw microvolt sequences of length config.input_length.
using SampleView = std::span<const std::vector<double>>;

ForwardResult forward(const ModelParams& model, SampleView batch, Domain domain = Domain::kSource,
                      int jobs = 1);
ForwardResult forward(const ModelParams& model, const edf::EpochDataset& dataset, int jobs = 1);

// Mean cross-entropy and its gradient over the batch. Per-sample gradients
// are reduced in sample order, so the result does not depend on `jobs`.
GradientResult backward(const ModelParams& model, SampleView batch, std::span<const int> labels,
                        int jobs = 1);

// W <- W - lr * (grad + weight_decay * W) for every parameter.
void sgd_step(ModelParams& model, std::span<const double> gradients, double lr, double weight_decay);

// Feature map phi: forward pass, logits discarded, domain tag copied.
FeatureSet extract_features(const ModelParams& model, const edf::EpochDataset& dataset, int jobs = 1);

std::vector<double> softmax(std::span<const double> logits);
std::vector<int> predict(const ModelParams& model, const edf::EpochDataset& dataset, int jobs = 1);

// Binary checkpoint: "SLMRCNN1" magic, format version, model config, layer
// specs, then float64 little-endian parameters in declaration order.
std::string serialize_checkpoint(const ModelParams& model);
ModelParams deserialize_checkpoint(std::string_view bytes);
void write_checkpoint(const ModelParams& model, const std::string& path);
ModelParams read_checkpoint(const std::string& path);
// Shapes and configuration for the JSON sidecar.
nlohmann::json checkpoint_sidecar(const ModelParams& model);

}  // namespace sleepalign::nn
