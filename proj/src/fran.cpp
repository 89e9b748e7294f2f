#include "freqpatch/fran.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "freqpatch/errors.hpp"
#include "freqpatch/imaging.hpp"

namespace freqpatch {
namespace {

static_assert(std::endian::native == std::endian::little,
              "mask files are written in host byte order");

// FFTW plans are cached per (height, width, direction). The planner itself is
// not thread-safe, executing a plan on new arrays is.
fftw_plan plan_for(int height, int width, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  const std::lock_guard lock(mutex);
  const auto key = std::make_tuple(height, width, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  const std::size_t n = static_cast<std::size_t>(height) * width;
  auto* in = fftw_alloc_complex(n);
  auto* out = fftw_alloc_complex(n);
  fftw_plan plan = fftw_plan_dft_2d(height, width, in, out, sign,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(in);
  fftw_free(out);
  plans.emplace(key, plan);
  return plan;
}

void execute(const std::vector<std::complex<double>>& in,
             std::vector<std::complex<double>>& out, int height, int width, int sign) {
  fftw_execute_dft(plan_for(height, width, sign),
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

void check_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw ContractViolation(std::string(op) + ": non-finite input");
  }
}

ImageTensor planes_to_image(const std::array<std::vector<double>, 3>& planes, int h, int w,
                            ColorSpace cs) {
  ImageTensor img(h, w, cs);
  for (int c = 0; c < 3; ++c) std::copy(planes[c].begin(), planes[c].end(), img.plane(c).begin());
  return img;
}

}  // namespace

Spectrum fft2(std::span<const double> channel, int height, int width) {
  if (height < 1 || width < 1 ||
      channel.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("fft2: channel size does not match dimensions");
  }
  check_finite(channel, "fft2");
  std::vector<std::complex<double>> in(channel.begin(), channel.end());
  Spectrum spec{height, width, std::vector<std::complex<double>>(in.size())};
  execute(in, spec.data, height, width, FFTW_FORWARD);
  return spec;
}

InverseTransform ifft2(const Spectrum& spec) {
  const std::size_t n = static_cast<std::size_t>(spec.height) * spec.width;
  if (spec.height < 1 || spec.width < 1 || spec.data.size() != n) {
    throw ShapeError("ifft2: malformed spectrum");
  }
  std::vector<std::complex<double>> out(n);
  execute(spec.data, out, spec.height, spec.width, FFTW_BACKWARD);
  InverseTransform result;
  result.real.resize(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    result.real[k] = out[k].real() * scale;
    result.max_imag = std::max(result.max_imag, std::abs(out[k].imag() * scale));
  }
  return result;
}

FrequencyMask::FrequencyMask(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) throw ShapeError("mask dimensions must be positive");
  data_.assign(kChannels * plane_size(), fill);
}

FrequencyMask symmetrize_mask(const FrequencyMask& theta) {
  FrequencyMask out(theta.height(), theta.width());
  const int h = theta.height();
  const int w = theta.width();
  for (int c = 0; c < FrequencyMask::kChannels; ++c) {
    for (int u = 0; u < h; ++u) {
      const int mu = (h - u) % h;
      for (int v = 0; v < w; ++v) {
        const int mv = (w - v) % w;
        out.at(c, u, v) = 0.5 * (theta.at(c, u, v) + theta.at(c, mu, mv));
      }
    }
  }
  return out;
}

FranTrace fran_forward_traced(const Patch& patch, const FrequencyMask& theta,
                              const FranOptions& options) {
  if (patch.empty()) throw ContractViolation("fran_forward: empty patch");
  const int side = patch.side();
  if (theta.height() != side || theta.width() != side) {
    throw ShapeError("fran_forward: mask is " + std::to_string(theta.height()) + "x" +
                     std::to_string(theta.width()) + ", patch side is " +
                     std::to_string(side));
  }
  FranTrace trace;
  trace.use_ycbcr = options.use_ycbcr;
  trace.symmetric_mask = symmetrize_mask(theta);
  const ImageTensor input =
      options.use_ycbcr ? rgb_to_ycbcr(patch.pixels()) : patch.pixels();

  std::array<std::vector<double>, 3> filtered;
  for (int c = 0; c < 3; ++c) {
    Spectrum spec = fft2(input.plane(c), side, side);
    Spectrum masked = spec;
    const auto weights = trace.symmetric_mask.plane(c);
    for (std::size_t k = 0; k < masked.data.size(); ++k) masked.data[k] *= weights[k];
    InverseTransform inv = ifft2(masked);
    trace.max_imag_residual = std::max(trace.max_imag_residual, inv.max_imag);
    filtered[c] = std::move(inv.real);
    trace.spectra[c] = std::move(spec);
  }
  if (trace.max_imag_residual > options.max_imag_residual) {
    throw InvariantError("fran_forward: imaginary residual " +
                         std::to_string(trace.max_imag_residual) + " after inverse FFT");
  }
  if (options.use_ycbcr) {
    trace.preclamp = ycbcr_to_rgb(planes_to_image(filtered, side, side, ColorSpace::kYCbCr));
  } else {
    trace.preclamp = planes_to_image(filtered, side, side, ColorSpace::kRgb);
  }
  ImageTensor clamped = trace.preclamp;
  clamped.clamp(0.0, 1.0);
  trace.output = Patch(std::move(clamped));
  return trace;
}

Patch fran_forward(const Patch& patch, const FrequencyMask& theta, const FranOptions& options) {
  return fran_forward_traced(patch, theta, options).output;
}

FranGradients fran_backward(const FranTrace& trace, const ImageTensor& grad_output) {
  const int side = trace.output.side();
  if (grad_output.height() != side || grad_output.width() != side) {
    throw ShapeError("fran_backward: gradient shape mismatch");
  }
  ImageTensor g(side, side, ColorSpace::kRgb);
  {
    const auto pre = trace.preclamp.values();
    const auto go = grad_output.values();
    auto dst = g.values();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = (pre[k] >= 0.0 && pre[k] <= 1.0) ? go[k] : 0.0;
    }
  }
  const ImageTensor gz = trace.use_ycbcr ? ycbcr_to_rgb_adjoint(g) : g;

  FrequencyMask grad_sym(side, side, 0.0);
  std::array<std::vector<double>, 3> grad_in;
  const double inv_n = 1.0 / (static_cast<double>(side) * side);
  for (int c = 0; c < 3; ++c) {
    Spectrum gspec = fft2(gz.plane(c), side, side);
    const auto& s = trace.spectra[c].data;
    const auto weights = trace.symmetric_mask.plane(c);
    auto gtheta = grad_sym.plane(c);
    for (std::size_t k = 0; k < s.size(); ++k) {
      gtheta[k] = (s[k] * std::conj(gspec.data[k])).real() * inv_n;
      gspec.data[k] *= weights[k];
    }
    grad_in[c] = ifft2(gspec).real;
  }
  FranGradients grads;
  if (trace.use_ycbcr) {
    grads.patch = rgb_to_ycbcr_adjoint(planes_to_image(grad_in, side, side, ColorSpace::kYCbCr));
  } else {
    grads.patch = planes_to_image(grad_in, side, side, ColorSpace::kRgb);
  }
  // Symmetrisation is self-adjoint.
  grads.theta = symmetrize_mask(grad_sym);
  return grads;
}

ImageTensor mask_visualization(const FrequencyMask& theta) {
  const FrequencyMask sym = symmetrize_mask(theta);
  const int h = sym.height();
  const int w = sym.width();
  const auto y = sym.plane(0);
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  ImageTensor out(h, w, ColorSpace::kRgb, 0.0);
  if (range <= 0.0) return out;
  for (int r = 0; r < h; ++r) {
    const int src_r = (r - h / 2 + h) % h;
    for (int c = 0; c < w; ++c) {
      const int src_c = (c - w / 2 + w) % w;
      const double v = (sym.at(0, src_r, src_c) - lo) / range;
      for (int ch = 0; ch < 3; ++ch) out.at(ch, r, c) = v;
    }
  }
  return out;
}

namespace {
constexpr char kMaskMagic[4] = {'F', 'P', 'Q', 'M'};
constexpr std::uint32_t kMaskVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void write_mask(const std::filesystem::path& path, const FrequencyMask& theta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMaskMagic, 4);
  put_u32(out, kMaskVersion);
  put_u32(out, static_cast<std::uint32_t>(theta.height()));
  put_u32(out, static_cast<std::uint32_t>(theta.width()));
  put_u32(out, FrequencyMask::kChannels);
  put_u32(out, 0);
  std::vector<float> values(theta.values().begin(), theta.values().end());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

FrequencyMask read_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask file " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMaskMagic, 4) != 0) {
    throw IoError(path.string() + " is not a frequency mask file");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kMaskVersion) {
    throw IoError(path.string() + ": unsupported mask version " + std::to_string(version));
  }
  const auto h = static_cast<int>(get_u32(in));
  const auto w = static_cast<int>(get_u32(in));
  const std::uint32_t channels = get_u32(in);
  get_u32(in);  // channel order, only Y,Cb,Cr is defined
  if (!in || channels != FrequencyMask::kChannels || h < 1 || w < 1) {
    throw IoError(path.string() + ": corrupt mask header");
  }
  FrequencyMask theta(h, w);
  std::vector<float> values(theta.values().size());
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!in) throw IoError(path.string() + ": truncated mask data");
  std::copy(values.begin(), values.end(), theta.values().begin());
  return theta;
}

}  // namespace freqpatch
