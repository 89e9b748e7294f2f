#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "freqpatch/box.hpp"
#include "freqpatch/dataset.hpp"
#include "freqpatch/errors.hpp"
#include "freqpatch/image.hpp"
#include "freqpatch/nn.hpp"

namespace freqpatch {

struct DetectorConfig {
  int input_side = 128;
  int grid_size = 16;
  double objectness_threshold = 0.5;
  double nms_iou = 0.5;
  int base_channels = 16;

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

struct Detection {
  BoundingBox box;
  double objectness = 0.0;
  int cell = 0;  // row * grid_size + col of the emitting cell
};

// Dense G x G objectness map, row-major.
struct ScoreMap {
  int grid = 0;
  std::vector<double> values;

  [[nodiscard]] double at(int r, int c) const { return values[static_cast<std::size_t>(r) * grid + c]; }
};

// Anchor-free grid detector: a few strided 3x3 convolutions down to the grid
// resolution, dilated context layers, and a 1x1 head emitting per cell an
// objectness logit, a centre offset inside the cell and log width/height.
class DetectorModel {
 public:
  static constexpr int kHeadChannels = 5;

  explicit DetectorModel(const DetectorConfig& config = {}, std::uint64_t init_seed = 0);

  [[nodiscard]] const DetectorConfig& config() const { return config_; }
  void set_objectness_threshold(double t);

  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] std::vector<float> flat_weights() const;
  void set_flat_weights(std::span<const float> weights);
  // FNV-1a over the raw weight bytes.
  [[nodiscard]] std::uint64_t weights_hash() const;

  struct Trace {
    std::vector<nn::Tensor3> inputs;  // input of each layer
    std::vector<std::vector<float>> cols;
    std::vector<nn::Tensor3> outputs;  // post-activation output of each layer
    nn::Tensor3 head;                  // raw head output
  };

  [[nodiscard]] Trace forward(const nn::Tensor3& input) const;
  // Backpropagates a gradient on the raw head output. grad_input and
  // grad_weights are optional; grad_weights is accumulated in flat order.
  void backward(const Trace& trace, const nn::Tensor3& grad_head, nn::Tensor3* grad_input,
                std::vector<float>* grad_weights) const;

 private:
  DetectorConfig config_;
  std::vector<nn::Conv2d> layers_;
};

// Result of running the detector on one image, kept for backpropagation.
struct DetectorPass {
  DetectorModel::Trace trace;
  int image_height = 0;
  int image_width = 0;
  bool resized = false;
  ScoreMap scores;
};

nn::Tensor3 to_network_input(const ImageTensor& image, int side);

DetectorPass run_detector(const DetectorModel& model, const ImageTensor& image);
ScoreMap objectness_scores(const DetectorModel& model, const ImageTensor& image);
// Gradient with respect to the image pixels of sum(grad_scores * scores).
ImageTensor objectness_backward(const DetectorModel& model, const DetectorPass& pass,
                                const ScoreMap& grad_scores);

std::vector<Detection> decode_detections(const DetectorModel& model, const DetectorPass& pass);
std::vector<Detection> detect(const DetectorModel& model, const ImageTensor& image);

// Greedy NMS by descending objectness; ties keep the lower cell index.
std::vector<Detection> non_maximum_suppression(std::vector<Detection> dets, double iou_threshold);

// Fraction of ground-truth boxes matched by a detection at iou >= t_iou.
double clean_recall(const DetectorModel& model, const Dataset& data, double t_iou = 0.5);

struct DetectorTrainConfig {
  int epochs = 24;
  double lr = 0.003;
  int batch_size = 8;
  std::uint64_t seed = 0;
  double pos_weight = 10.0;
  double box_weight = 4.0;
  bool hflip = true;
  bool channel_shuffle = true;
  double required_recall = 0.90;
  double t_iou = 0.5;
};

struct DetectorTrainResult {
  DetectorModel model;
  std::vector<double> epoch_loss;
  std::vector<double> val_recall;
  int best_epoch = -1;
  double best_recall = 0.0;
};

class TrainingFailed : public Error {
 public:
  TrainingFailed(const std::string& what, double best_recall)
      : Error(what), best_recall_(best_recall) {}
  [[nodiscard]] double best_recall() const { return best_recall_; }

 private:
  double best_recall_;
};

using DetectorEpochCallback = std::function<void(int epoch, double loss, double recall)>;

// Trains with binary cross-entropy on objectness plus L1 on the box terms of
// positive cells, Adam updates, and keeps the epoch with the best clean
// validation recall. Throws TrainingFailed when that recall stays below
// config.required_recall.
DetectorTrainResult train_toy_detector(const Dataset& train, const Dataset& val,
                                       const DetectorConfig& model_config,
                                       const DetectorTrainConfig& config,
                                       const DetectorEpochCallback& on_epoch = {});

// Self-describing binary: "FPDT", u32 version, architecture fields, weights.
void save_detector(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel load_detector(const std::filesystem::path& path);

}  // namespace freqpatch
