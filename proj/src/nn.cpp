#include "freqpatch/nn.hpp"

#include <Eigen/Core>

#include <cmath>

#include "freqpatch/errors.hpp"

namespace freqpatch::nn {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void im2col(const Tensor3& in, const ConvSpec& s, int out_h, int out_w, std::vector<float>& col) {
  const int k = s.kernel;
  const int pad = s.padding();
  const std::size_t hw = static_cast<std::size_t>(out_h) * out_w;
  col.assign(static_cast<std::size_t>(s.patch_size()) * hw, 0.0f);
  for (int ci = 0; ci < s.in_channels; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col.data() + ((ci * k + ky) * k + kx) * hw;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s.stride - pad + ky * s.dilation;
          if (iy < 0 || iy >= in.height) continue;
          const float* src = in.data.data() + ci * in.plane_size() +
                             static_cast<std::size_t>(iy) * in.width;
          float* dst = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s.stride - pad + kx * s.dilation;
            if (ix >= 0 && ix < in.width) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im(const std::vector<float>& col, const ConvSpec& s, int out_h, int out_w,
            Tensor3& grad_in) {
  const int k = s.kernel;
  const int pad = s.padding();
  const std::size_t hw = static_cast<std::size_t>(out_h) * out_w;
  for (int ci = 0; ci < s.in_channels; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col.data() + ((ci * k + ky) * k + kx) * hw;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s.stride - pad + ky * s.dilation;
          if (iy < 0 || iy >= grad_in.height) continue;
          float* dst = grad_in.data.data() + ci * grad_in.plane_size() +
                       static_cast<std::size_t>(iy) * grad_in.width;
          const float* src = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s.stride - pad + kx * s.dilation;
            if (ix >= 0 && ix < grad_in.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(const ConvSpec& spec)
    : spec_(spec),
      weight_(static_cast<std::size_t>(spec.out_channels) * spec.patch_size(), 0.0f),
      bias_(static_cast<std::size_t>(spec.out_channels), 0.0f) {
  if (spec.in_channels < 1 || spec.out_channels < 1 || spec.kernel < 1 || spec.stride < 1 ||
      spec.dilation < 1) {
    throw ContractViolation("Conv2d: invalid layer shape");
  }
}

void Conv2d::init_he(Rng& rng, float gain) {
  const double std_dev = gain * std::sqrt(2.0 / spec_.patch_size());
  for (float& w : weight_) w = static_cast<float>(std_dev * rng.normal());
  for (float& b : bias_) b = 0.0f;
}

Tensor3 Conv2d::forward(const Tensor3& in, std::vector<float>& col) const {
  if (in.channels != spec_.in_channels) throw ShapeError("Conv2d: input channel mismatch");
  const int out_h = spec_.out_size(in.height);
  const int out_w = spec_.out_size(in.width);
  im2col(in, spec_, out_h, out_w, col);
  Tensor3 out(spec_.out_channels, out_h, out_w);
  const auto hw = static_cast<Eigen::Index>(out.plane_size());
  ConstMapMat w(weight_.data(), spec_.out_channels, spec_.patch_size());
  ConstMapMat x(col.data(), spec_.patch_size(), hw);
  MapMat y(out.data.data(), spec_.out_channels, hw);
  y.noalias() = w * x;
  for (int o = 0; o < spec_.out_channels; ++o) y.row(o).array() += bias_[o];
  return out;
}

void Conv2d::backward(const Tensor3& in, const std::vector<float>& col, const Tensor3& grad_out,
                      Tensor3* grad_in, std::span<float> grad_weight,
                      std::span<float> grad_bias) const {
  const auto hw = static_cast<Eigen::Index>(grad_out.plane_size());
  ConstMapMat g(grad_out.data.data(), spec_.out_channels, hw);
  if (!grad_weight.empty()) {
    ConstMapMat x(col.data(), spec_.patch_size(), hw);
    MapMat gw(grad_weight.data(), spec_.out_channels, spec_.patch_size());
    gw.noalias() += g * x.transpose();
  }
  if (!grad_bias.empty()) {
    // Plain loop: Eigen's vectorised sum depends on the buffer's alignment.
    for (int o = 0; o < spec_.out_channels; ++o) {
      const float* row = grad_out.data.data() + static_cast<std::size_t>(o) * hw;
      float acc = 0.0f;
      for (Eigen::Index i = 0; i < hw; ++i) acc += row[i];
      grad_bias[o] += acc;
    }
  }
  if (grad_in != nullptr) {
    ConstMapMat w(weight_.data(), spec_.out_channels, spec_.patch_size());
    std::vector<float> grad_col(static_cast<std::size_t>(spec_.patch_size()) * hw);
    MapMat gc(grad_col.data(), spec_.patch_size(), hw);
    gc.noalias() = w.transpose() * g;
    *grad_in = Tensor3(in.channels, in.height, in.width);
    col2im(grad_col, spec_, grad_out.height, grad_out.width, *grad_in);
  }
}

void leaky_relu(Tensor3& t, float slope) {
  for (float& v : t.data) v = v > 0.0f ? v : slope * v;
}

void leaky_relu_backward(const Tensor3& out, Tensor3& grad, float slope) {
  for (std::size_t k = 0; k < grad.data.size(); ++k) {
    if (!(out.data[k] > 0.0f)) grad.data[k] *= slope;
  }
}

}  // namespace freqpatch::nn
