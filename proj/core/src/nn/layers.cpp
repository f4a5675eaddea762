#include "sleepalign/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace sleepalign::nn {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kReLU: return "relu";
    case Activation::kGELU: return "gelu";
  }
  return "?";
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kReLU: return x > 0.0 ? x : 0.0;
    case Activation::kGELU: return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  }
  return x;
}

double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kGELU: {
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + x * pdf;
    }
  }
  return 1.0;
}

int ConvLayerSpec::output_length(int input_length) const {
  if (kernel < 1 || stride < 1 || padding < 0 || in_channels < 1 || out_channels < 1) {
    throw InvalidArgument("invalid conv spec: kernel " + std::to_string(kernel) + ", stride " +
                          std::to_string(stride) + ", padding " + std::to_string(padding));
  }
  const int span = input_length + 2 * padding - kernel;
  if (span < 0) {
    throw InvalidArgument("conv kernel " + std::to_string(kernel) + " longer than padded input " +
                          std::to_string(input_length + 2 * padding));
  }
  return span / stride + 1;
}

std::vector<double> conv1d_preactivation(std::span<const double> input, int input_length,
                                         const ConvLayerSpec& spec, std::span<const double> weights,
                                         std::span<const double> bias) {
  const int out_len = spec.output_length(input_length);
  const auto in_ch = static_cast<std::size_t>(spec.in_channels);
  const auto out_ch = static_cast<std::size_t>(spec.out_channels);
  const auto k_len = static_cast<std::size_t>(spec.kernel);
  if (input.size() != in_ch * static_cast<std::size_t>(input_length)) {
    throw InvalidArgument("conv1d: input has " + std::to_string(input.size()) + " values, expected " +
                          std::to_string(in_ch) + "x" + std::to_string(input_length));
  }
  if (weights.size() != spec.weight_count() || bias.size() != out_ch) {
    throw InvalidArgument("conv1d: weight/bias shape mismatch");
  }

  std::vector<double> out(out_ch * static_cast<std::size_t>(out_len));
  for (std::size_t o = 0; o < out_ch; ++o) {
    double* dst = out.data() + o * static_cast<std::size_t>(out_len);
    for (int t = 0; t < out_len; ++t) {
      const int start = t * spec.stride - spec.padding;
      const int k_lo = std::max(0, -start);
      const int k_hi = std::min(spec.kernel, input_length - start);
      double acc = bias[o];
      for (std::size_t c = 0; c < in_ch; ++c) {
        const double* w = weights.data() + (o * in_ch + c) * k_len;
        const double* x = input.data() + c * static_cast<std::size_t>(input_length);
        for (int k = k_lo; k < k_hi; ++k) acc += w[k] * x[start + k];
      }
      dst[t] = acc;
    }
  }
  return out;
}

void conv1d_backward(std::span<const double> input, int input_length, const ConvLayerSpec& spec,
                     std::span<const double> weights, std::span<const double> grad_preact,
                     std::span<double> grad_weights, std::span<double> grad_bias,
                     std::span<double> grad_input) {
  const int out_len = spec.output_length(input_length);
  const auto in_ch = static_cast<std::size_t>(spec.in_channels);
  const auto out_ch = static_cast<std::size_t>(spec.out_channels);
  const auto k_len = static_cast<std::size_t>(spec.kernel);
  const bool want_input = !grad_input.empty();

  for (std::size_t o = 0; o < out_ch; ++o) {
    const double* dz = grad_preact.data() + o * static_cast<std::size_t>(out_len);
    for (int t = 0; t < out_len; ++t) {
      const double g = dz[t];
      grad_bias[o] += g;
      if (g == 0.0) continue;
      const int start = t * spec.stride - spec.padding;
      const int k_lo = std::max(0, -start);
      const int k_hi = std::min(spec.kernel, input_length - start);
      for (std::size_t c = 0; c < in_ch; ++c) {
        double* dw = grad_weights.data() + (o * in_ch + c) * k_len;
        const double* x = input.data() + c * static_cast<std::size_t>(input_length);
        for (int k = k_lo; k < k_hi; ++k) dw[k] += g * x[start + k];
        if (want_input) {
          const double* w = weights.data() + (o * in_ch + c) * k_len;
          double* dx = grad_input.data() + c * static_cast<std::size_t>(input_length);
          for (int k = k_lo; k < k_hi; ++k) dx[start + k] += g * w[k];
        }
      }
    }
  }
}

Tensor conv1d_forward(const Tensor& input, const ConvLayerSpec& spec, std::span<const double> weights,
                      std::span<const double> bias) {
  if (input.channels != static_cast<std::size_t>(spec.in_channels)) {
    throw InvalidArgument("conv1d: input has " + std::to_string(input.channels) + " channels, layer expects " +
                          std::to_string(spec.in_channels));
  }
  const int in_len = static_cast<int>(input.length);
  const int out_len = spec.output_length(in_len);
  Tensor out(input.batch, static_cast<std::size_t>(spec.out_channels), static_cast<std::size_t>(out_len));
  const std::size_t in_stride = input.channels * input.length;
  const std::size_t out_stride = out.channels * out.length;
  for (std::size_t b = 0; b < input.batch; ++b) {
    auto z = conv1d_preactivation(std::span(input.values).subspan(b * in_stride, in_stride), in_len, spec,
                                  weights, bias);
    for (std::size_t i = 0; i < z.size(); ++i) out.values[b * out_stride + i] = activate(spec.activation, z[i]);
  }
  return out;
}

std::vector<double> max_pool(std::span<const double> input, int channels, int length, int size,
                             std::vector<std::size_t>* argmax) {
  if (size < 1) throw InvalidArgument("max_pool: window must be >= 1");
  const int out_len = length / size;
  if (out_len < 1) {
    throw InvalidArgument("max_pool: window " + std::to_string(size) + " longer than input " + std::to_string(length));
  }
  std::vector<double> out(static_cast<std::size_t>(channels) * out_len);
  if (argmax) argmax->assign(out.size(), 0);
  for (int c = 0; c < channels; ++c) {
    for (int t = 0; t < out_len; ++t) {
      std::size_t best = static_cast<std::size_t>(c) * length + static_cast<std::size_t>(t) * size;
      for (int k = 1; k < size; ++k) {
        const std::size_t idx = static_cast<std::size_t>(c) * length + static_cast<std::size_t>(t) * size + k;
        if (input[idx] > input[best]) best = idx;
      }
      const std::size_t o = static_cast<std::size_t>(c) * out_len + t;
      out[o] = input[best];
      if (argmax) (*argmax)[o] = best;
    }
  }
  return out;
}

}  // namespace sleepalign::nn
