#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include "freqpatch/image.hpp"
#include "freqpatch/patch.hpp"

namespace freqpatch {

// One channel of an unnormalised 2-D DFT, DC at index (0,0), row-major.
struct Spectrum {
  int height = 0;
  int width = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int u, int v) { return data[static_cast<std::size_t>(u) * width + v]; }
  [[nodiscard]] const std::complex<double>& at(int u, int v) const {
    return data[static_cast<std::size_t>(u) * width + v];
  }
};

struct InverseTransform {
  std::vector<double> real;
  double max_imag = 0.0;  // largest |Im| discarded by taking the real part
};

Spectrum fft2(std::span<const double> channel, int height, int width);
InverseTransform ifft2(const Spectrum& spec);

// Real spectral attention weights, one plane per channel (Y, Cb, Cr when the
// pipeline runs in YCbCr, otherwise R, G, B).
class FrequencyMask {
 public:
  static constexpr int kChannels = 3;

  FrequencyMask() = default;
  FrequencyMask(int height, int width, double fill = 1.0);

  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }

  double& at(int c, int u, int v) {
    return data_[c * plane_size() + static_cast<std::size_t>(u) * width_ + v];
  }
  [[nodiscard]] double at(int c, int u, int v) const {
    return data_[c * plane_size() + static_cast<std::size_t>(u) * width_ + v];
  }
  std::span<double> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  [[nodiscard]] std::span<const double> plane(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<double> values() { return data_; }
  [[nodiscard]] std::span<const double> values() const { return data_; }

  friend bool operator==(const FrequencyMask&, const FrequencyMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// theta'(u,v) = (theta(u,v) + theta(-u mod H, -v mod W)) / 2 on every plane.
FrequencyMask symmetrize_mask(const FrequencyMask& theta);

struct FranOptions {
  bool use_ycbcr = true;
  // Imaginary residual tolerated after the inverse transform.
  double max_imag_residual = 1e-4;
};

// Everything fran_backward needs from a forward pass.
struct FranTrace {
  Patch output;           // clamped to [0,1]
  ImageTensor preclamp;   // RGB before the clamp
  std::array<Spectrum, 3> spectra;
  FrequencyMask symmetric_mask;
  bool use_ycbcr = true;
  double max_imag_residual = 0.0;
};

FranTrace fran_forward_traced(const Patch& patch, const FrequencyMask& theta,
                              const FranOptions& options = {});
Patch fran_forward(const Patch& patch, const FrequencyMask& theta,
                   const FranOptions& options = {});

struct FranGradients {
  ImageTensor patch;
  FrequencyMask theta;
};

// Pulls a gradient on the clamped output back to the patch pixels and to the
// unsymmetrised mask parameters.
FranGradients fran_backward(const FranTrace& trace, const ImageTensor& grad_output);

// Y plane of the symmetrised mask, DC moved to (H/2, W/2), min-max scaled to
// [0,1] and replicated into a grey RGB image. Constant masks give zeros.
ImageTensor mask_visualization(const FrequencyMask& theta);

// Binary layout: "FPQM", u32 version, u32 height, u32 width, u32 channels,
// u32 channel order (0 = Y,Cb,Cr), then float32 values, plane-major and
// row-major, all little-endian.
void write_mask(const std::filesystem::path& path, const FrequencyMask& theta);
FrequencyMask read_mask(const std::filesystem::path& path);

}  // namespace freqpatch
