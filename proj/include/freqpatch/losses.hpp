#pragma once

#include <span>
#include <vector>

#include "freqpatch/detector.hpp"
#include "freqpatch/image.hpp"

namespace freqpatch {

// Stabiliser added inside every square root of the variation losses.
inline constexpr double kTvDelta = 1e-8;

struct LossWithGrad {
  double value = 0.0;
  ImageTensor grad;
};

// sum_ij sqrt((p_ij - p_{i+1,j})^2 + (p_ij - p_{i,j+1})^2 + delta), per
// channel; neighbours outside the image are skipped.
double tv_loss(const ImageTensor& img);
LossWithGrad tv_loss_with_grad(const ImageTensor& img);

// sum_ij sqrt(sum over the 8-neighbourhood of (p_ij - p_n)^2 + delta), per
// channel; neighbours outside the image are skipped.
double tv_r_loss(const ImageTensor& img);
LossWithGrad tv_r_loss_with_grad(const ImageTensor& img);

struct ObjectnessLoss {
  double value = 0.0;
  std::vector<int> argmax;          // cell holding each map's maximum
  std::vector<ScoreMap> grads;      // d value / d map
};

// Sum over the batch of each image's highest objectness score.
double objectness_loss(std::span<const ScoreMap> score_maps);
ObjectnessLoss objectness_loss_with_grad(std::span<const ScoreMap> score_maps);

struct LossValue {
  double total = 0.0;
  double obj = 0.0;
  double tv_r = 0.0;
  double alpha = 0.0;
};

// total = obj + alpha * tvr.
LossValue total_loss(double obj, double tvr, double alpha);

}  // namespace freqpatch
