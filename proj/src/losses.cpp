#include "freqpatch/losses.hpp"

#include <array>
#include <cmath>
#include <string>

#include "freqpatch/errors.hpp"

namespace freqpatch {
namespace {

// Shared kernel for both variation losses. `offsets` lists (dy, dx) neighbour
// displacements; each pixel contributes sqrt(sum_n (p - p_n)^2 + delta).
template <std::size_t N>
double variation(const ImageTensor& img, const std::array<std::array<int, 2>, N>& offsets,
                 ImageTensor* grad) {
  const int h = img.height();
  const int w = img.width();
  if (grad != nullptr) *grad = ImageTensor(h, w, img.colorspace(), 0.0);
  double total = 0.0;
  for (int c = 0; c < ImageTensor::kChannels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double p = img.at(c, y, x);
        double sq = kTvDelta;
        for (const auto& [dy, dx] : offsets) {
          const int ny = y + dy;
          const int nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const double d = p - img.at(c, ny, nx);
          sq += d * d;
        }
        const double term = std::sqrt(sq);
        total += term;
        if (grad == nullptr) continue;
        const double inv = 1.0 / term;
        for (const auto& [dy, dx] : offsets) {
          const int ny = y + dy;
          const int nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const double g = (p - img.at(c, ny, nx)) * inv;
          grad->at(c, y, x) += g;
          grad->at(c, ny, nx) -= g;
        }
      }
    }
  }
  return total;
}

constexpr std::array<std::array<int, 2>, 2> kForwardNeighbours = {{{1, 0}, {0, 1}}};
constexpr std::array<std::array<int, 2>, 8> kEightNeighbours = {
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

void require_image(const ImageTensor& img, const char* op) {
  if (img.empty()) throw ContractViolation(std::string(op) + ": empty image");
}

}  // namespace

double tv_loss(const ImageTensor& img) {
  require_image(img, "tv_loss");
  return variation(img, kForwardNeighbours, nullptr);
}

LossWithGrad tv_loss_with_grad(const ImageTensor& img) {
  require_image(img, "tv_loss");
  LossWithGrad out;
  out.value = variation(img, kForwardNeighbours, &out.grad);
  return out;
}

double tv_r_loss(const ImageTensor& img) {
  require_image(img, "tv_r_loss");
  return variation(img, kEightNeighbours, nullptr);
}

LossWithGrad tv_r_loss_with_grad(const ImageTensor& img) {
  require_image(img, "tv_r_loss");
  LossWithGrad out;
  out.value = variation(img, kEightNeighbours, &out.grad);
  return out;
}

ObjectnessLoss objectness_loss_with_grad(std::span<const ScoreMap> score_maps) {
  if (score_maps.empty()) throw ContractViolation("objectness_loss: empty batch");
  ObjectnessLoss out;
  for (const ScoreMap& map : score_maps) {
    if (map.values.empty()) throw ContractViolation("objectness_loss: empty score map");
    int best = 0;
    for (std::size_t k = 1; k < map.values.size(); ++k) {
      if (map.values[k] > map.values[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    }
    out.value += map.values[static_cast<std::size_t>(best)];
    out.argmax.push_back(best);
    ScoreMap g{map.grid, std::vector<double>(map.values.size(), 0.0)};
    g.values[static_cast<std::size_t>(best)] = 1.0;
    out.grads.push_back(std::move(g));
  }
  return out;
}

double objectness_loss(std::span<const ScoreMap> score_maps) {
  return objectness_loss_with_grad(score_maps).value;
}

LossValue total_loss(double obj, double tvr, double alpha) {
  if (!(alpha >= 0.0)) throw ContractViolation("total_loss: alpha must be >= 0");
  return {obj + alpha * tvr, obj, tvr, alpha};
}

}  // namespace freqpatch
