#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "freqpatch/image.hpp"

namespace freqpatch {

// Full-range BT.601 conversion (the JPEG/JFIF convention). Both directions
// are affine and never clamp; callers clamp explicitly.
ImageTensor rgb_to_ycbcr(const ImageTensor& img);
ImageTensor ycbcr_to_rgb(const ImageTensor& img);

// Vector-Jacobian products of the two conversions. The input is a gradient
// with respect to the conversion's output; the result is tagged with the
// colorspace of the conversion's input.
ImageTensor rgb_to_ycbcr_adjoint(const ImageTensor& grad_ycbcr);
ImageTensor ycbcr_to_rgb_adjoint(const ImageTensor& grad_rgb);

// Bilinear resampling with half-pixel centres and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);
// Adjoint of resize_bilinear for a source of size in_h x in_w.
ImageTensor resize_bilinear_adjoint(const ImageTensor& grad_out, int in_h, int in_w);

// 8-bit quantisation, v -> round(v * 255) with clamping to [0, 255].
std::uint8_t to_u8(double v);
double from_u8(std::uint8_t v);

std::vector<std::uint8_t> encode_jpeg(const ImageTensor& img, int quality);
ImageTensor decode_jpeg(const std::vector<std::uint8_t>& bytes);
// Baseline JPEG encode then decode. Evaluation-only, not differentiable.
ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality);

void write_png(const std::filesystem::path& path, const ImageTensor& img);
ImageTensor read_png(const std::filesystem::path& path);
void write_jpeg(const std::filesystem::path& path, const ImageTensor& img, int quality);

}  // namespace freqpatch
