#pragma once

#include <span>
#include <vector>

#include "freqpatch/rng.hpp"

// Minimal float CNN building blocks for the bundled toy detector. Activations
// are CHW, a batch is processed one image at a time.
namespace freqpatch::nn {

struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  [[nodiscard]] std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  float& at(int c, int y, int x) {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] float at(int c, int y, int x) const {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
};

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int dilation = 1;

  [[nodiscard]] int padding() const { return dilation * (kernel - 1) / 2; }
  [[nodiscard]] int out_size(int in) const {
    return (in + 2 * padding() - dilation * (kernel - 1) - 1) / stride + 1;
  }
  [[nodiscard]] int patch_size() const { return in_channels * kernel * kernel; }
};

class Conv2d {
 public:
  explicit Conv2d(const ConvSpec& spec);

  [[nodiscard]] const ConvSpec& spec() const { return spec_; }
  [[nodiscard]] std::size_t weight_count() const { return weight_.size(); }
  [[nodiscard]] std::size_t parameter_count() const { return weight_.size() + bias_.size(); }
  std::span<float> weight() { return weight_; }
  std::span<float> bias() { return bias_; }
  [[nodiscard]] std::span<const float> weight() const { return weight_; }
  [[nodiscard]] std::span<const float> bias() const { return bias_; }

  void init_he(Rng& rng, float gain = 1.0f);

  // `col` receives the unfolded input, reused by backward().
  Tensor3 forward(const Tensor3& in, std::vector<float>& col) const;

  // grad_in may be null. Weight/bias gradients are accumulated when the spans
  // are non-empty.
  void backward(const Tensor3& in, const std::vector<float>& col, const Tensor3& grad_out,
                Tensor3* grad_in, std::span<float> grad_weight,
                std::span<float> grad_bias) const;

 private:
  ConvSpec spec_;
  std::vector<float> weight_;  // out x (in * k * k)
  std::vector<float> bias_;
};

void leaky_relu(Tensor3& t, float slope);
// Uses the activation output: the sign of x is preserved by leaky ReLU.
void leaky_relu_backward(const Tensor3& out, Tensor3& grad, float slope);

}  // namespace freqpatch::nn
