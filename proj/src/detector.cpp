#include "freqpatch/detector.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "freqpatch/adam.hpp"
#include "freqpatch/imaging.hpp"
#include "freqpatch/rng.hpp"

namespace freqpatch {
namespace {

constexpr float kLeakySlope = 0.1f;
constexpr double kLogSizeMin = -6.0;
constexpr double kLogSizeMax = 0.5;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<nn::ConvSpec> architecture(const DetectorConfig& cfg) {
  if (cfg.input_side < 1 || cfg.grid_size < 1 || cfg.input_side % cfg.grid_size != 0 ||
      !std::has_single_bit(static_cast<unsigned>(cfg.input_side / cfg.grid_size))) {
    throw ContractViolation("detector: input_side / grid_size must be a power of two");
  }
  if (!(cfg.objectness_threshold > 0.0 && cfg.objectness_threshold < 1.0)) {
    throw ContractViolation("detector: objectness_threshold must be in (0,1)");
  }
  const int downs = std::countr_zero(static_cast<unsigned>(cfg.input_side / cfg.grid_size));
  std::vector<nn::ConvSpec> specs;
  int ch = 3;
  for (int i = 0; i < downs; ++i) {
    const int out = cfg.base_channels * std::min(i + 1, 3);
    specs.push_back({ch, out, 3, 2, 1});
    ch = out;
  }
  for (int dilation : {2, 4, 1}) {
    specs.push_back({ch, ch, 3, 1, dilation});
  }
  specs.push_back({ch, DetectorModel::kHeadChannels, 1, 1, 1});
  return specs;
}

}  // namespace

DetectorModel::DetectorModel(const DetectorConfig& config, std::uint64_t init_seed)
    : config_(config) {
  Rng rng(derive_seed(init_seed, 0xde7ec7));
  for (const nn::ConvSpec& spec : architecture(config)) {
    layers_.emplace_back(spec);
    layers_.back().init_he(rng);
  }
  nn::Conv2d& head = layers_.back();
  for (float& w : head.weight()) w *= 0.1f;
  head.bias()[0] = -4.0f;
  head.bias()[3] = static_cast<float>(std::log(0.15));
  head.bias()[4] = static_cast<float>(std::log(0.4));
}

void DetectorModel::set_objectness_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw ContractViolation("objectness_threshold must be in (0,1)");
  config_.objectness_threshold = t;
}

std::size_t DetectorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

std::vector<float> DetectorModel::flat_weights() const {
  std::vector<float> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.weight().begin(), l.weight().end());
    flat.insert(flat.end(), l.bias().begin(), l.bias().end());
  }
  return flat;
}

void DetectorModel::set_flat_weights(std::span<const float> weights) {
  if (weights.size() != parameter_count()) throw ShapeError("detector: weight count mismatch");
  std::size_t off = 0;
  for (auto& l : layers_) {
    std::copy_n(weights.begin() + off, l.weight().size(), l.weight().begin());
    off += l.weight().size();
    std::copy_n(weights.begin() + off, l.bias().size(), l.bias().begin());
    off += l.bias().size();
  }
}

std::uint64_t DetectorModel::weights_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& l : layers_) {
    for (auto span : {l.weight(), l.bias()}) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(span.data());
      for (std::size_t i = 0; i < span.size_bytes(); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

DetectorModel::Trace DetectorModel::forward(const nn::Tensor3& input) const {
  Trace trace;
  trace.inputs.reserve(layers_.size());
  trace.cols.resize(layers_.size());
  trace.outputs.reserve(layers_.size());
  const nn::Tensor3* x = &input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    trace.inputs.push_back(*x);
    nn::Tensor3 y = layers_[i].forward(*x, trace.cols[i]);
    if (i + 1 < layers_.size()) nn::leaky_relu(y, kLeakySlope);
    trace.outputs.push_back(std::move(y));
    x = &trace.outputs.back();
  }
  trace.head = trace.outputs.back();
  return trace;
}

void DetectorModel::backward(const Trace& trace, const nn::Tensor3& grad_head,
                             nn::Tensor3* grad_input, std::vector<float>* grad_weights) const {
  if (grad_weights != nullptr && grad_weights->size() != parameter_count()) {
    grad_weights->assign(parameter_count(), 0.0f);
  }
  std::vector<std::size_t> offsets(layers_.size());
  std::size_t off = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offsets[i] = off;
    off += layers_[i].parameter_count();
  }
  nn::Tensor3 grad = grad_head;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const nn::Conv2d& layer = layers_[li];
    if (li + 1 < layers_.size()) nn::leaky_relu_backward(trace.outputs[li], grad, kLeakySlope);
    std::span<float> gw;
    std::span<float> gb;
    if (grad_weights != nullptr) {
      gw = std::span<float>(grad_weights->data() + offsets[li], layer.weight_count());
      gb = std::span<float>(grad_weights->data() + offsets[li] + layer.weight_count(),
                            layer.bias().size());
    }
    const bool need_input = li > 0 || grad_input != nullptr;
    nn::Tensor3 grad_in;
    layer.backward(trace.inputs[li], trace.cols[li], grad, need_input ? &grad_in : nullptr, gw, gb);
    if (li == 0) {
      if (grad_input != nullptr) *grad_input = std::move(grad_in);
    } else {
      grad = std::move(grad_in);
    }
  }
}

nn::Tensor3 to_network_input(const ImageTensor& image, int side) {
  if (image.empty() || image.colorspace() != ColorSpace::kRgb) {
    throw ContractViolation("detector input must be a non-empty RGB image");
  }
  const ImageTensor* src = &image;
  ImageTensor resized;
  if (image.height() != side || image.width() != side) {
    resized = resize_bilinear(image, side, side);
    src = &resized;
  }
  nn::Tensor3 t(3, side, side);
  const auto vals = src->values();
  for (std::size_t k = 0; k < vals.size(); ++k) t.data[k] = static_cast<float>(vals[k]);
  return t;
}

DetectorPass run_detector(const DetectorModel& model, const ImageTensor& image) {
  const int side = model.config().input_side;
  DetectorPass pass;
  pass.image_height = image.height();
  pass.image_width = image.width();
  pass.resized = image.height() != side || image.width() != side;
  pass.trace = model.forward(to_network_input(image, side));
  const nn::Tensor3& head = pass.trace.head;
  pass.scores.grid = head.height;
  pass.scores.values.resize(head.plane_size());
  for (std::size_t k = 0; k < head.plane_size(); ++k) {
    pass.scores.values[k] = sigmoid(head.data[k]);
  }
  return pass;
}

ScoreMap objectness_scores(const DetectorModel& model, const ImageTensor& image) {
  return run_detector(model, image).scores;
}

ImageTensor objectness_backward(const DetectorModel& model, const DetectorPass& pass,
                                const ScoreMap& grad_scores) {
  const nn::Tensor3& head = pass.trace.head;
  if (grad_scores.values.size() != head.plane_size()) {
    throw ShapeError("objectness_backward: score gradient has the wrong size");
  }
  nn::Tensor3 grad_head(head.channels, head.height, head.width);
  for (std::size_t k = 0; k < head.plane_size(); ++k) {
    const double s = pass.scores.values[k];
    grad_head.data[k] = static_cast<float>(grad_scores.values[k] * s * (1.0 - s));
  }
  nn::Tensor3 grad_in;
  model.backward(pass.trace, grad_head, &grad_in, nullptr);
  const int side = model.config().input_side;
  ImageTensor grad(side, side, ColorSpace::kRgb);
  auto dst = grad.values();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = grad_in.data[k];
  if (pass.resized) return resize_bilinear_adjoint(grad, pass.image_height, pass.image_width);
  return grad;
}

std::vector<Detection> non_maximum_suppression(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.objectness != b.objectness) return a.objectness > b.objectness;
    return a.cell < b.cell;
  });
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> decode_detections(const DetectorModel& model, const DetectorPass& pass) {
  const DetectorConfig& cfg = model.config();
  const nn::Tensor3& head = pass.trace.head;
  const int g = head.height;
  std::vector<Detection> dets;
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const double score = pass.scores.at(r, c);
      if (score < cfg.objectness_threshold) continue;
      const double cx = (c + sigmoid(head.at(1, r, c))) / g;
      const double cy = (r + sigmoid(head.at(2, r, c))) / g;
      const double w = std::exp(std::clamp<double>(head.at(3, r, c), kLogSizeMin, kLogSizeMax));
      const double h = std::exp(std::clamp<double>(head.at(4, r, c), kLogSizeMin, kLogSizeMax));
      BoundingBox box{std::clamp(cx - 0.5 * w, 0.0, 1.0), std::clamp(cy - 0.5 * h, 0.0, 1.0),
                      std::clamp(cx + 0.5 * w, 0.0, 1.0), std::clamp(cy + 0.5 * h, 0.0, 1.0)};
      if (!box.valid()) continue;
      dets.push_back({box, score, r * g + c});
    }
  }
  return non_maximum_suppression(std::move(dets), cfg.nms_iou);
}

std::vector<Detection> detect(const DetectorModel& model, const ImageTensor& image) {
  return decode_detections(model, run_detector(model, image));
}

double clean_recall(const DetectorModel& model, const Dataset& data, double t_iou) {
  std::size_t total = 0;
  std::size_t matched = 0;
  for (const DatasetSample& s : data) {
    const std::vector<Detection> dets = detect(model, s.image);
    for (const BoundingBox& gt : s.gt_boxes) {
      ++total;
      if (std::any_of(dets.begin(), dets.end(),
                      [&](const Detection& d) { return iou(gt, d.box) >= t_iou; })) {
        ++matched;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
}

namespace {

// Optional horizontal flip plus a channel permutation, written straight
// into the network input.
nn::Tensor3 augmented_input(const ImageTensor& img, bool flip, const std::array<int, 3>& perm) {
  nn::Tensor3 t(3, img.height(), img.width());
  const int w = img.width();
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < w; ++x) {
        t.at(c, y, x) = static_cast<float>(img.at(perm[c], y, flip ? w - 1 - x : x));
      }
    }
  }
  return t;
}

// Loss and head gradient for one image.
double detection_loss(const nn::Tensor3& head, std::span<const BoundingBox> boxes,
                      const DetectorTrainConfig& cfg, nn::Tensor3& grad_head) {
  const int g = head.height;
  const auto cells = static_cast<double>(head.plane_size());
  grad_head = nn::Tensor3(head.channels, head.height, head.width);
  std::vector<int> target(head.plane_size(), -1);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const int r = std::clamp(static_cast<int>(boxes[b].center_y() * g), 0, g - 1);
    const int c = std::clamp(static_cast<int>(boxes[b].center_x() * g), 0, g - 1);
    target[static_cast<std::size_t>(r) * g + c] = static_cast<int>(b);
  }
  double loss = 0.0;
  int positives = 0;
  for (int t : target) positives += t >= 0 ? 1 : 0;
  const double box_norm = cfg.box_weight / std::max(1, positives);
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * g + c;
      const double z = head.data[k];
      const bool pos = target[k] >= 0;
      const double w = pos ? cfg.pos_weight : 1.0;
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      loss += w * (softplus - (pos ? z : 0.0)) / cells;
      grad_head.at(0, r, c) = static_cast<float>(w * (sigmoid(z) - (pos ? 1.0 : 0.0)) / cells);
      if (!pos) continue;
      const BoundingBox& box = boxes[static_cast<std::size_t>(target[k])];
      const double tx = box.center_x() * g - c;
      const double ty = box.center_y() * g - r;
      const double sx = sigmoid(head.at(1, r, c));
      const double sy = sigmoid(head.at(2, r, c));
      const double lw = head.at(3, r, c);
      const double lh = head.at(4, r, c);
      const double dx = sx - tx;
      const double dy = sy - ty;
      const double dw = lw - std::log(box.width());
      const double dh = lh - std::log(box.height());
      loss += box_norm * (std::abs(dx) + std::abs(dy) + std::abs(dw) + std::abs(dh));
      auto sgn = [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); };
      grad_head.at(1, r, c) = static_cast<float>(box_norm * sgn(dx) * sx * (1.0 - sx));
      grad_head.at(2, r, c) = static_cast<float>(box_norm * sgn(dy) * sy * (1.0 - sy));
      grad_head.at(3, r, c) = static_cast<float>(box_norm * sgn(dw));
      grad_head.at(4, r, c) = static_cast<float>(box_norm * sgn(dh));
    }
  }
  return loss;
}

}  // namespace

DetectorTrainResult train_toy_detector(const Dataset& train, const Dataset& val,
                                       const DetectorConfig& model_config,
                                       const DetectorTrainConfig& config,
                                       const DetectorEpochCallback& on_epoch) {
  if (train.empty() || val.empty()) {
    throw ContractViolation("train_toy_detector: datasets must be non-empty");
  }
  if (config.batch_size < 1 || config.epochs < 1) {
    throw ContractViolation("train_toy_detector: batch_size and epochs must be >= 1");
  }
  DetectorModel model(model_config, config.seed);
  DetectorTrainResult result{model, {}, {}, -1, -1.0};
  std::vector<float> weights = model.flat_weights();
  Adam<float> adam(weights.size(), AdamOptions{config.lr});
  std::vector<float> grad(weights.size(), 0.0f);
  std::vector<std::size_t> order(train.size());
  const int side = model_config.input_side;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Cosine decay down to 5% of the base rate.
    const double progress = static_cast<double>(epoch) / config.epochs;
    adam.set_lr(config.lr * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(3.141592653589793 * progress))));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, 0x7a1, epoch));
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0f);
      for (std::size_t i = start; i < end; ++i) {
        const DatasetSample& s = train[order[i]];
        const bool flip = config.hflip && rng.uniform() < 0.5;
        std::array<int, 3> perm = {0, 1, 2};
        if (config.channel_shuffle) std::shuffle(perm.begin(), perm.end(), rng.engine());
        std::vector<BoundingBox> boxes = s.gt_boxes;
        if (flip) {
          for (BoundingBox& b : boxes) b = {1.0 - b.x_max, b.y_min, 1.0 - b.x_min, b.y_max};
        }
        const nn::Tensor3 input =
            s.image.height() == side && s.image.width() == side
                ? augmented_input(s.image, flip, perm)
                : augmented_input(resize_bilinear(s.image, side, side), flip, perm);
        const DetectorModel::Trace trace = model.forward(input);
        nn::Tensor3 grad_head;
        epoch_loss += detection_loss(trace.head, boxes, config, grad_head);
        model.backward(trace, grad_head, nullptr, &grad);
      }
      const float inv = 1.0f / static_cast<float>(end - start);
      for (float& g : grad) g *= inv;
      adam.step(weights, grad);
      model.set_flat_weights(weights);
    }
    epoch_loss /= static_cast<double>(train.size());
    const double recall = clean_recall(model, val, config.t_iou);
    result.epoch_loss.push_back(epoch_loss);
    result.val_recall.push_back(recall);
    if (recall > result.best_recall) {
      result.best_recall = recall;
      result.best_epoch = epoch;
      result.model = model;
    }
    if (on_epoch) on_epoch(epoch, epoch_loss, recall);
  }
  if (result.best_recall < config.required_recall) {
    throw TrainingFailed("toy detector reached clean recall " + std::to_string(result.best_recall) +
                             ", required " + std::to_string(config.required_recall),
                         result.best_recall);
  }
  return result;
}

namespace {
static_assert(std::endian::native == std::endian::little,
              "detector files are written in host byte order");
constexpr char kDetectorMagic[4] = {'F', 'P', 'D', 'T'};
constexpr std::uint32_t kDetectorVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void save_detector(const std::filesystem::path& path, const DetectorModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const DetectorConfig& cfg = model.config();
  out.write(kDetectorMagic, 4);
  put<std::uint32_t>(out, kDetectorVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.input_side));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.grid_size));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.base_channels));
  put<double>(out, cfg.objectness_threshold);
  put<double>(out, cfg.nms_iou);
  const std::vector<float> w = model.flat_weights();
  put<std::uint64_t>(out, w.size());
  out.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

DetectorModel load_detector(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open detector file " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDetectorMagic, 4) != 0) {
    throw IoError(path.string() + " is not a detector weights file");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kDetectorVersion) {
    throw IoError(path.string() + ": unsupported detector file version " + std::to_string(version));
  }
  DetectorConfig cfg;
  cfg.input_side = static_cast<int>(get<std::uint32_t>(in));
  cfg.grid_size = static_cast<int>(get<std::uint32_t>(in));
  cfg.base_channels = static_cast<int>(get<std::uint32_t>(in));
  cfg.objectness_threshold = get<double>(in);
  cfg.nms_iou = get<double>(in);
  const auto count = get<std::uint64_t>(in);
  if (!in) throw IoError(path.string() + ": truncated detector header");
  DetectorModel model(cfg);
  if (count != model.parameter_count()) {
    throw IoError(path.string() + ": weight count does not match the architecture");
  }
  std::vector<float> w(count);
  in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw IoError(path.string() + ": truncated detector weights");
  model.set_flat_weights(w);
  return model;
}

}  // namespace freqpatch
