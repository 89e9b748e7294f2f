#include "freqpatch/imaging.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <string>

#include "freqpatch/errors.hpp"

namespace freqpatch {
namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kRgbToYcc = {{{0.299, 0.587, 0.114},
                             {-0.168736, -0.331264, 0.5},
                             {0.5, -0.418688, -0.081312}}};
constexpr std::array<double, 3> kYccOffset = {0.0, 0.5, 0.5};

constexpr Mat3 invert(const Mat3& m) {
  const double a = m[0][0], b = m[0][1], c = m[0][2];
  const double d = m[1][0], e = m[1][1], f = m[1][2];
  const double g = m[2][0], h = m[2][1], i = m[2][2];
  const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  return {{{(e * i - f * h) / det, (c * h - b * i) / det, (b * f - c * e) / det},
           {(f * g - d * i) / det, (a * i - c * g) / det, (c * d - a * f) / det},
           {(d * h - e * g) / det, (b * g - a * h) / det, (a * e - b * d) / det}}};
}

constexpr Mat3 kYccToRgb = invert(kRgbToYcc);

constexpr Mat3 transpose(const Mat3& m) {
  return {{{m[0][0], m[1][0], m[2][0]},
           {m[0][1], m[1][1], m[2][1]},
           {m[0][2], m[1][2], m[2][2]}}};
}

// out = M * (in - pre) + post, pixelwise.
ImageTensor apply_affine(const ImageTensor& in, const Mat3& m,
                         const std::array<double, 3>& pre,
                         const std::array<double, 3>& post, ColorSpace out_cs) {
  ImageTensor out(in.height(), in.width(), out_cs);
  const auto p0 = in.plane(0), p1 = in.plane(1), p2 = in.plane(2);
  auto o0 = out.plane(0), o1 = out.plane(1), o2 = out.plane(2);
  for (std::size_t k = 0; k < p0.size(); ++k) {
    const double x0 = p0[k] - pre[0], x1 = p1[k] - pre[1], x2 = p2[k] - pre[2];
    o0[k] = m[0][0] * x0 + m[0][1] * x1 + m[0][2] * x2 + post[0];
    o1[k] = m[1][0] * x0 + m[1][1] * x1 + m[1][2] * x2 + post[1];
    o2[k] = m[2][0] * x0 + m[2][1] * x1 + m[2][2] * x2 + post[2];
  }
  return out;
}

void expect_colorspace(const ImageTensor& img, ColorSpace cs, const char* op) {
  if (img.empty()) throw ContractViolation(std::string(op) + ": empty image");
  if (img.colorspace() != cs) {
    throw ContractViolation(std::string(op) + ": expected " +
                            std::string(to_string(cs)) + " input, got " +
                            std::string(to_string(img.colorspace())));
  }
}

// Source taps for one output axis under the half-pixel-centre convention.
struct AxisTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

AxisTaps make_taps(int in_size, int out_size) {
  AxisTaps taps;
  taps.lo.resize(out_size);
  taps.hi.resize(out_size);
  taps.frac.resize(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(src));
    taps.lo[i] = lo;
    taps.hi[i] = std::min(lo + 1, in_size - 1);
    taps.frac[i] = src - lo;
  }
  return taps;
}

}  // namespace

ImageTensor rgb_to_ycbcr(const ImageTensor& img) {
  expect_colorspace(img, ColorSpace::kRgb, "rgb_to_ycbcr");
  return apply_affine(img, kRgbToYcc, {0.0, 0.0, 0.0}, kYccOffset, ColorSpace::kYCbCr);
}

ImageTensor ycbcr_to_rgb(const ImageTensor& img) {
  expect_colorspace(img, ColorSpace::kYCbCr, "ycbcr_to_rgb");
  return apply_affine(img, kYccToRgb, kYccOffset, {0.0, 0.0, 0.0}, ColorSpace::kRgb);
}

ImageTensor rgb_to_ycbcr_adjoint(const ImageTensor& grad_ycbcr) {
  return apply_affine(grad_ycbcr, transpose(kRgbToYcc), {0.0, 0.0, 0.0},
                      {0.0, 0.0, 0.0}, ColorSpace::kRgb);
}

ImageTensor ycbcr_to_rgb_adjoint(const ImageTensor& grad_rgb) {
  return apply_affine(grad_rgb, transpose(kYccToRgb), {0.0, 0.0, 0.0},
                      {0.0, 0.0, 0.0}, ColorSpace::kYCbCr);
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ContractViolation("resize_bilinear: output dimensions must be positive");
  }
  if (img.empty()) throw ContractViolation("resize_bilinear: empty image");
  const AxisTaps ty = make_taps(img.height(), out_h);
  const AxisTaps tx = make_taps(img.width(), out_w);
  ImageTensor out(out_h, out_w, img.colorspace());
  const int in_w = img.width();
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    const auto src = img.plane(c);
    auto dst = out.plane(c);
    for (int i = 0; i < out_h; ++i) {
      const double* r0 = src.data() + static_cast<std::size_t>(ty.lo[i]) * in_w;
      const double* r1 = src.data() + static_cast<std::size_t>(ty.hi[i]) * in_w;
      const double fy = ty.frac[i];
      double* row = dst.data() + static_cast<std::size_t>(i) * out_w;
      for (int j = 0; j < out_w; ++j) {
        const double fx = tx.frac[j];
        const double top = r0[tx.lo[j]] * (1.0 - fx) + r0[tx.hi[j]] * fx;
        const double bot = r1[tx.lo[j]] * (1.0 - fx) + r1[tx.hi[j]] * fx;
        row[j] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

ImageTensor resize_bilinear_adjoint(const ImageTensor& grad_out, int in_h, int in_w) {
  if (in_h < 1 || in_w < 1) {
    throw ContractViolation("resize_bilinear_adjoint: source dimensions must be positive");
  }
  const int out_h = grad_out.height();
  const int out_w = grad_out.width();
  const AxisTaps ty = make_taps(in_h, out_h);
  const AxisTaps tx = make_taps(in_w, out_w);
  ImageTensor grad_in(in_h, in_w, grad_out.colorspace());
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    const auto g = grad_out.plane(c);
    auto dst = grad_in.plane(c);
    for (int i = 0; i < out_h; ++i) {
      double* r0 = dst.data() + static_cast<std::size_t>(ty.lo[i]) * in_w;
      double* r1 = dst.data() + static_cast<std::size_t>(ty.hi[i]) * in_w;
      const double fy = ty.frac[i];
      const double* row = g.data() + static_cast<std::size_t>(i) * out_w;
      for (int j = 0; j < out_w; ++j) {
        const double fx = tx.frac[j];
        const double top = row[j] * (1.0 - fy);
        const double bot = row[j] * fy;
        r0[tx.lo[j]] += top * (1.0 - fx);
        r0[tx.hi[j]] += top * fx;
        r1[tx.lo[j]] += bot * (1.0 - fx);
        r1[tx.hi[j]] += bot * fx;
      }
    }
  }
  return grad_in;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

double from_u8(std::uint8_t v) { return v / 255.0; }

namespace {

std::vector<std::uint8_t> interleave_u8(const ImageTensor& img) {
  std::vector<std::uint8_t> px(img.plane_size() * 3);
  for (int c = 0; c < 3; ++c) {
    const auto p = img.plane(c);
    for (std::size_t k = 0; k < p.size(); ++k) px[k * 3 + c] = to_u8(p[k]);
  }
  return px;
}

ImageTensor deinterleave_u8(const std::uint8_t* px, int h, int w) {
  ImageTensor img(h, w, ColorSpace::kRgb);
  for (int c = 0; c < 3; ++c) {
    auto p = img.plane(c);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = from_u8(px[k * 3 + c]);
  }
  return img;
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace

// The setjmp scopes below hold only trivially destructible locals; buffers
// that own memory live outside them.
std::vector<std::uint8_t> encode_jpeg(const ImageTensor& img, int quality) {
  if (quality < 1 || quality > 100) {
    throw ContractViolation("jpeg quality must be in 1..100, got " + std::to_string(quality));
  }
  expect_colorspace(img, ColorSpace::kRgb, "encode_jpeg");
  const std::vector<std::uint8_t> px = interleave_u8(img);
  unsigned char* out_buf = nullptr;
  unsigned long out_size = 0;
  jpeg_compress_struct cinfo{};
  JpegErrorManager jerr{};
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(out_buf);
    throw IoError(std::string("jpeg encode failed: ") + jerr.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &out_buf, &out_size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width());
  cinfo.image_height = static_cast<JDIMENSION>(img.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  // 4:4:4: no chroma subsampling, so quality is the only lossy setting.
  for (int c = 0; c < 3; ++c) {
    cinfo.comp_info[c].h_samp_factor = 1;
    cinfo.comp_info[c].v_samp_factor = 1;
  }
  jpeg_start_compress(&cinfo, TRUE);
  const int stride = img.width() * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(px.data() + static_cast<std::size_t>(cinfo.next_scanline) * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> bytes(out_buf, out_buf + out_size);
  std::free(out_buf);
  return bytes;
}

ImageTensor decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) throw IoError("jpeg decode failed: empty buffer");
  std::vector<std::uint8_t> px;
  int h = 0;
  int w = 0;
  jpeg_decompress_struct cinfo{};
  JpegErrorManager jerr{};
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError(std::string("jpeg decode failed: ") + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  px.resize(static_cast<std::size_t>(w) * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = px.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return deinterleave_u8(px.data(), h, w);
}

ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality) {
  return decode_jpeg(encode_jpeg(img, quality));
}

void write_png(const std::filesystem::path& path, const ImageTensor& img) {
  expect_colorspace(img, ColorSpace::kRgb, "write_png");
  const std::vector<std::uint8_t> px = interleave_u8(img);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, px.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

ImageTensor read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return deinterleave_u8(px.data(), static_cast<int>(image.height),
                         static_cast<int>(image.width));
}

void write_jpeg(const std::filesystem::path& path, const ImageTensor& img, int quality) {
  const std::vector<std::uint8_t> bytes = encode_jpeg(img, quality);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace freqpatch
