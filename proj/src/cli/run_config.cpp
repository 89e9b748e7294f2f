#include "freqpatch/cli/run_config.hpp"

#include <fstream>

namespace freqpatch::cli {
namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ContractViolation("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void take(const Json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception&) {
    throw ContractViolation(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

Json to_json(const RunConfig& cfg) {
  Json j;
  j["mode"] = std::string(to_string(cfg.mode));
  j["run_dir"] = cfg.run_dir;
  j["seed"] = cfg.seed;
  const TrainConfig& t = cfg.train;
  Json train;
  train["patch_side"] = t.patch_side;
  train["lr"] = t.lr;
  train["theta_lr"] = t.theta_lr;
  train["batch_size"] = t.batch_size;
  train["epochs"] = t.epochs;
  train["fran_epochs"] = t.fran_epochs;
  train["alpha"] = t.alpha;
  train["normalize_tv"] = t.normalize_tv;
  train["scale_ratio"] = t.scale_ratio;
  train["use_ycbcr"] = t.use_ycbcr;
  train["eval_every"] = t.eval_every;
  j["train"] = std::move(train);
  j["metrics"] = to_json(t.metrics);
  j["augment"] = to_json(t.augment);
  Json det;
  det["input_side"] = cfg.detector.input_side;
  det["grid_size"] = cfg.detector.grid_size;
  det["objectness_threshold"] = cfg.detector.objectness_threshold;
  det["nms_iou"] = cfg.detector.nms_iou;
  det["base_channels"] = cfg.detector.base_channels;
  j["detector"] = std::move(det);
  const DetectorTrainConfig& d = cfg.detector_train;
  Json dt;
  dt["epochs"] = d.epochs;
  dt["lr"] = d.lr;
  dt["batch_size"] = d.batch_size;
  dt["pos_weight"] = d.pos_weight;
  dt["box_weight"] = d.box_weight;
  dt["hflip"] = d.hflip;
  dt["channel_shuffle"] = d.channel_shuffle;
  dt["required_recall"] = d.required_recall;
  dt["t_iou"] = d.t_iou;
  j["detector_train"] = std::move(dt);
  Json data;
  data["n"] = cfg.data_n;
  data["image_side"] = cfg.image_side;
  j["data"] = std::move(data);
  j["jpeg_qualities"] = cfg.jpeg_qualities;
  return j;
}

RunConfig run_config_from_json(const Json& j, RunConfig cfg) {
  if (!j.is_object()) throw ContractViolation("config must be a JSON object");
  reject_unknown(j,
                 {"mode", "run_dir", "seed", "train", "metrics", "augment", "detector",
                  "detector_train", "data", "jpeg_qualities"},
                 "");
  if (j.contains("mode")) cfg.mode = parse_attack_mode(j.at("mode").get<std::string>());
  take(j, "run_dir", cfg.run_dir);
  take(j, "seed", cfg.seed);
  take(j, "jpeg_qualities", cfg.jpeg_qualities);
  if (const auto it = j.find("train"); it != j.end()) {
    const Json& t = *it;
    reject_unknown(t,
                   {"patch_side", "lr", "theta_lr", "batch_size", "epochs", "fran_epochs", "alpha",
                    "normalize_tv", "scale_ratio", "use_ycbcr", "eval_every"},
                   "train.");
    take(t, "patch_side", cfg.train.patch_side);
    take(t, "lr", cfg.train.lr);
    take(t, "theta_lr", cfg.train.theta_lr);
    take(t, "batch_size", cfg.train.batch_size);
    take(t, "epochs", cfg.train.epochs);
    take(t, "fran_epochs", cfg.train.fran_epochs);
    take(t, "alpha", cfg.train.alpha);
    take(t, "normalize_tv", cfg.train.normalize_tv);
    take(t, "scale_ratio", cfg.train.scale_ratio);
    take(t, "use_ycbcr", cfg.train.use_ycbcr);
    take(t, "eval_every", cfg.train.eval_every);
  }
  if (const auto it = j.find("metrics"); it != j.end()) {
    reject_unknown(*it, {"t_iou", "eps0", "eps1"}, "metrics.");
    take(*it, "t_iou", cfg.train.metrics.t_iou);
    take(*it, "eps0", cfg.train.metrics.eps0);
    take(*it, "eps1", cfg.train.metrics.eps1);
  }
  if (const auto it = j.find("augment"); it != j.end()) {
    AugmentConfig& a = cfg.train.augment;
    reject_unknown(*it,
                   {"brightness", "brightness_range", "contrast", "contrast_min", "contrast_max",
                    "noise", "noise_range"},
                   "augment.");
    take(*it, "brightness", a.brightness);
    take(*it, "brightness_range", a.brightness_range);
    take(*it, "contrast", a.contrast);
    take(*it, "contrast_min", a.contrast_min);
    take(*it, "contrast_max", a.contrast_max);
    take(*it, "noise", a.noise);
    take(*it, "noise_range", a.noise_range);
  }
  if (const auto it = j.find("detector"); it != j.end()) {
    DetectorConfig& d = cfg.detector;
    reject_unknown(*it, {"input_side", "grid_size", "objectness_threshold", "nms_iou", "base_channels"},
                   "detector.");
    take(*it, "input_side", d.input_side);
    take(*it, "grid_size", d.grid_size);
    take(*it, "objectness_threshold", d.objectness_threshold);
    take(*it, "nms_iou", d.nms_iou);
    take(*it, "base_channels", d.base_channels);
  }
  if (const auto it = j.find("detector_train"); it != j.end()) {
    DetectorTrainConfig& d = cfg.detector_train;
    reject_unknown(*it,
                   {"epochs", "lr", "batch_size", "pos_weight", "box_weight", "hflip",
                    "channel_shuffle", "required_recall", "t_iou"},
                   "detector_train.");
    take(*it, "epochs", d.epochs);
    take(*it, "lr", d.lr);
    take(*it, "batch_size", d.batch_size);
    take(*it, "pos_weight", d.pos_weight);
    take(*it, "box_weight", d.box_weight);
    take(*it, "hflip", d.hflip);
    take(*it, "channel_shuffle", d.channel_shuffle);
    take(*it, "required_recall", d.required_recall);
    take(*it, "t_iou", d.t_iou);
  }
  if (const auto it = j.find("data"); it != j.end()) {
    reject_unknown(*it, {"n", "image_side"}, "data.");
    take(*it, "n", cfg.data_n);
    take(*it, "image_side", cfg.image_side);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json(path));
}

void write_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) throw IoError("refusing to overwrite " + path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << render_json(to_json(cfg));
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

RunConfig finalize(RunConfig cfg) {
  cfg.train.seed = cfg.seed;
  cfg.detector_train.seed = cfg.seed;
  if (is_trainable(cfg.mode)) cfg.train = config_for_mode(cfg.train, cfg.mode);
  return cfg;
}

}  // namespace freqpatch::cli
