#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sleepalign/nn/tensor.hpp"

namespace sleepalign::nn {

enum class Activation { kIdentity = 0, kReLU = 1, kGELU = 2 };

std::string_view activation_name(Activation a);
double activate(Activation a, double x);
double activate_derivative(Activation a, double x);  // d sigma / dx at pre-activation x

struct ConvLayerSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  Activation activation = Activation::kIdentity;

  // floor((in + 2*padding - kernel)/stride) + 1; throws when < 1 or the layer shape is invalid.
  int output_length(int input_length) const;
  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel;
  }
};

// Cross-correlation with bias, no activation. `input` is channels x length
// (one sample); weights are laid out [out][in][k].
std::vector<double> conv1d_preactivation(std::span<const double> input, int input_length,
                                         const ConvLayerSpec& spec, std::span<const double> weights,
                                         std::span<const double> bias);

// Accumulates dL/dW and dL/db and optionally writes dL/dinput, given dL/dz for
// the pre-activation output.
void conv1d_backward(std::span<const double> input, int input_length, const ConvLayerSpec& spec,
                     std::span<const double> weights, std::span<const double> grad_preact,
                     std::span<double> grad_weights, std::span<double> grad_bias,
                     std::span<double> grad_input);

// Batched forward: bias, cross-correlation, then activation.
Tensor conv1d_forward(const Tensor& input, const ConvLayerSpec& spec, std::span<const double> weights,
                      std::span<const double> bias);

// Non-overlapping max pooling (window = stride = `size`, floor). `argmax`
// receives the winning input index per output element.
std::vector<double> max_pool(std::span<const double> input, int channels, int length, int size,
                             std::vector<std::size_t>* argmax = nullptr);

}  // namespace sleepalign::nn
