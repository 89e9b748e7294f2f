#include "freqpatch/cli/reports.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace freqpatch::cli {
namespace {

constexpr int kReportVersion = 1;

Json counts_json(const BucketCounts& c) {
  Json j;
  j["small"] = c.small;
  j["medium"] = c.medium;
  j["large"] = c.large;
  return j;
}

BucketCounts counts_from_json(const Json& j) {
  return {j.at("small").get<long>(), j.at("medium").get<long>(), j.at("large").get<long>()};
}

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "clean") return EvalMode::kClean;
  if (s == "random") return EvalMode::kRandom;
  if (s == "patched") return EvalMode::kPatched;
  throw SchemaError("unknown eval mode: " + s);
}

enum class Kind { kNumber, kInteger, kBool, kString, kObject, kArray };

bool has_kind(const Json& v, Kind k) {
  switch (k) {
    case Kind::kNumber: return v.is_number();
    case Kind::kInteger: return v.is_number_integer();
    case Kind::kBool: return v.is_boolean();
    case Kind::kString: return v.is_string();
    case Kind::kObject: return v.is_object();
    case Kind::kArray: return v.is_array();
  }
  return false;
}

struct Field {
  const char* name;
  Kind kind;
};

void require(const Json& j, std::initializer_list<Field> fields, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " must be an object");
  for (const Field& f : fields) {
    const auto it = j.find(f.name);
    if (it == j.end()) throw SchemaError(where + ": missing required field '" + f.name + "'");
    if (!has_kind(*it, f.kind)) throw SchemaError(where + ": field '" + f.name + "' has the wrong type");
  }
}

void check_rates(const Json& j, const std::string& where) {
  for (const char* key : {"asr", "asr_l", "asr_m", "asr_s"}) {
    const double v = j.at(key).get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw SchemaError(where + ": " + key + " outside [0,1]");
  }
}

void check_eval(const Json& j, const std::string& where) {
  require(j,
          {{"asr", Kind::kNumber}, {"asr_l", Kind::kNumber}, {"asr_m", Kind::kNumber},
           {"asr_s", Kind::kNumber}, {"objects", Kind::kObject}, {"vanished", Kind::kObject},
           {"images", Kind::kInteger}, {"empty_gt_images", Kind::kInteger},
           {"mode", Kind::kString}, {"fran_applied", Kind::kBool}, {"seed", Kind::kInteger},
           {"metrics", Kind::kObject}, {"options", Kind::kObject}},
          where);
  check_rates(j, where);
  for (const char* key : {"objects", "vanished"}) {
    require(j.at(key), {{"small", Kind::kInteger}, {"medium", Kind::kInteger}, {"large", Kind::kInteger}},
            where + "." + key);
  }
  require(j.at("metrics"), {{"t_iou", Kind::kNumber}, {"eps0", Kind::kNumber}, {"eps1", Kind::kNumber}},
          where + ".metrics");
  require(j.at("options"),
          {{"scale_ratio", Kind::kNumber}, {"use_ycbcr", Kind::kBool}, {"augment", Kind::kObject}},
          where + ".options");
}

void check_sweep(const Json& j) {
  require(j, {{"lossless", Kind::kObject}, {"records", Kind::kArray}}, "jpeg_sweep");
  check_eval(j.at("lossless"), "jpeg_sweep.lossless");
  for (std::size_t i = 0; i < j.at("records").size(); ++i) {
    const Json& r = j.at("records")[i];
    const std::string where = "jpeg_sweep.records[" + std::to_string(i) + "]";
    require(r,
            {{"quality", Kind::kInteger}, {"asr", Kind::kNumber}, {"asr_l", Kind::kNumber},
             {"asr_m", Kind::kNumber}, {"asr_s", Kind::kNumber}, {"delta_asr", Kind::kNumber},
             {"delta_asr_l", Kind::kNumber}, {"delta_asr_m", Kind::kNumber},
             {"delta_asr_s", Kind::kNumber}, {"report", Kind::kObject}},
            where);
    check_eval(r.at("report"), where + ".report");
  }
}

void check_history(const Json& j) {
  require(j, {{"epochs", Kind::kArray}}, "train_history");
  for (const Json& e : j.at("epochs")) {
    require(e,
            {{"epoch", Kind::kInteger}, {"mean_loss", Kind::kNumber}, {"mean_obj", Kind::kNumber},
             {"mean_tv_r", Kind::kNumber}, {"fran_active", Kind::kBool}, {"evaluated", Kind::kBool}},
            "train_history.epochs[]");
  }
}

Json header(const char* kind) {
  Json j;
  j["kind"] = kind;
  j["version"] = kReportVersion;
  return j;
}

}  // namespace

Json to_json(const MetricsConfig& cfg) {
  Json j;
  j["t_iou"] = cfg.t_iou;
  j["eps0"] = cfg.eps0;
  j["eps1"] = cfg.eps1;
  return j;
}

Json to_json(const AugmentConfig& cfg) {
  Json j;
  j["brightness"] = cfg.brightness;
  j["brightness_range"] = cfg.brightness_range;
  j["contrast"] = cfg.contrast;
  j["contrast_min"] = cfg.contrast_min;
  j["contrast_max"] = cfg.contrast_max;
  j["noise"] = cfg.noise;
  j["noise_range"] = cfg.noise_range;
  return j;
}

MetricsConfig metrics_config_from_json(const Json& j) {
  MetricsConfig cfg;
  cfg.t_iou = j.value("t_iou", cfg.t_iou);
  cfg.eps0 = j.value("eps0", cfg.eps0);
  cfg.eps1 = j.value("eps1", cfg.eps1);
  return cfg;
}

AugmentConfig augment_config_from_json(const Json& j) {
  AugmentConfig cfg;
  cfg.brightness = j.value("brightness", cfg.brightness);
  cfg.brightness_range = j.value("brightness_range", cfg.brightness_range);
  cfg.contrast = j.value("contrast", cfg.contrast);
  cfg.contrast_min = j.value("contrast_min", cfg.contrast_min);
  cfg.contrast_max = j.value("contrast_max", cfg.contrast_max);
  cfg.noise = j.value("noise", cfg.noise);
  cfg.noise_range = j.value("noise_range", cfg.noise_range);
  return cfg;
}

Json to_json(const EvalReport& r) {
  Json j = header("eval_report");
  j["mode"] = std::string(to_string(r.mode));
  j["fran_applied"] = r.fran_applied;
  j["seed"] = r.seed;
  j["asr"] = r.asr;
  j["asr_l"] = r.asr_l;
  j["asr_m"] = r.asr_m;
  j["asr_s"] = r.asr_s;
  j["images"] = r.images;
  j["empty_gt_images"] = r.empty_gt_images;
  j["objects"] = counts_json(r.objects);
  j["vanished"] = counts_json(r.vanished);
  j["metrics"] = to_json(r.config);
  Json opt;
  opt["scale_ratio"] = r.options.scale_ratio;
  opt["use_ycbcr"] = r.options.use_ycbcr;
  opt["augment"] = to_json(r.options.augment);
  j["options"] = std::move(opt);
  return j;
}

EvalReport eval_report_from_json(const Json& j) {
  check_eval(j, "eval_report");
  EvalReport r;
  r.mode = eval_mode_from_string(j.at("mode").get<std::string>());
  r.fran_applied = j.at("fran_applied").get<bool>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.asr = j.at("asr").get<double>();
  r.asr_l = j.at("asr_l").get<double>();
  r.asr_m = j.at("asr_m").get<double>();
  r.asr_s = j.at("asr_s").get<double>();
  r.images = j.at("images").get<long>();
  r.empty_gt_images = j.at("empty_gt_images").get<long>();
  r.objects = counts_from_json(j.at("objects"));
  r.vanished = counts_from_json(j.at("vanished"));
  r.config = metrics_config_from_json(j.at("metrics"));
  const Json& opt = j.at("options");
  r.options.mode = r.mode;
  r.options.scale_ratio = opt.at("scale_ratio").get<double>();
  r.options.use_ycbcr = opt.at("use_ycbcr").get<bool>();
  r.options.augment = augment_config_from_json(opt.at("augment"));
  return r;
}

Json to_json(const JpegSweepReport& rep) {
  Json j = header("jpeg_sweep");
  Json lossless = to_json(rep.lossless);
  lossless.erase("kind");
  lossless.erase("version");
  j["lossless"] = std::move(lossless);
  Json records = Json::array();
  for (const JpegRecord& rec : rep.records) {
    Json r;
    r["quality"] = rec.quality;
    r["asr"] = rec.report.asr;
    r["asr_l"] = rec.report.asr_l;
    r["asr_m"] = rec.report.asr_m;
    r["asr_s"] = rec.report.asr_s;
    r["delta_asr"] = rec.delta_asr;
    r["delta_asr_l"] = rec.delta_asr_l;
    r["delta_asr_m"] = rec.delta_asr_m;
    r["delta_asr_s"] = rec.delta_asr_s;
    Json inner = to_json(rec.report);
    inner.erase("kind");
    inner.erase("version");
    r["report"] = std::move(inner);
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  return j;
}

JpegSweepReport jpeg_report_from_json(const Json& j) {
  check_sweep(j);
  JpegSweepReport rep;
  rep.lossless = eval_report_from_json(j.at("lossless"));
  for (const Json& r : j.at("records")) {
    JpegRecord rec;
    rec.quality = r.at("quality").get<int>();
    rec.report = eval_report_from_json(r.at("report"));
    rec.delta_asr = r.at("delta_asr").get<double>();
    rec.delta_asr_l = r.at("delta_asr_l").get<double>();
    rec.delta_asr_m = r.at("delta_asr_m").get<double>();
    rec.delta_asr_s = r.at("delta_asr_s").get<double>();
    rep.records.push_back(std::move(rec));
  }
  return rep;
}

Json to_json(const TrainHistory& history) {
  Json j = header("train_history");
  Json epochs = Json::array();
  for (const EpochRecord& r : history.records) {
    Json e;
    e["epoch"] = r.epoch;
    e["mean_loss"] = r.mean_loss;
    e["mean_obj"] = r.mean_obj;
    e["mean_tv_r"] = r.mean_tv_r;
    e["fran_active"] = r.fran_active;
    e["evaluated"] = r.evaluated;
    if (r.evaluated) {
      e["asr"] = r.asr;
      e["asr_l"] = r.asr_l;
      e["asr_m"] = r.asr_m;
      e["asr_s"] = r.asr_s;
      e["patch_checkpoint"] = r.patch_checkpoint_ref;
      e["theta_checkpoint"] = r.theta_checkpoint_ref;
    }
    epochs.push_back(std::move(e));
  }
  j["epochs"] = std::move(epochs);
  return j;
}

void check_report_schema(const Json& j) {
  require(j, {{"kind", Kind::kString}, {"version", Kind::kInteger}}, "report");
  if (j.at("version").get<int>() != kReportVersion) throw SchemaError("unsupported report version");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "eval_report") {
    check_eval(j, kind);
  } else if (kind == "jpeg_sweep") {
    check_sweep(j);
  } else if (kind == "train_history") {
    check_history(j);
  } else {
    throw SchemaError("unknown report kind: " + kind);
  }
}

std::string render_json(const Json& j) { return j.dump(2) + "\n"; }

void write_report(const Json& j, const std::filesystem::path& path) {
  check_report_schema(j);
  std::string text;
  try {
    text = render_json(j);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("report not serialisable: ") + e.what());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + path.string());
  out << text;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  write_report(to_json(report), path);
}

void write_report(const JpegSweepReport& report, const std::filesystem::path& path) {
  write_report(to_json(report), path);
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

EvalReport read_eval_report(const std::filesystem::path& path) {
  return eval_report_from_json(read_json(path));
}

JpegSweepReport read_jpeg_report(const std::filesystem::path& path) {
  return jpeg_report_from_json(read_json(path));
}

void write_predictions(const std::filesystem::path& path,
                       std::span<const std::vector<Detection>> predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    Json line;
    line["image"] = i;
    Json dets = Json::array();
    for (const Detection& d : predictions[i]) {
      Json dj;
      dj["box"] = {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max};
      dj["objectness"] = d.objectness;
      dets.push_back(std::move(dj));
    }
    line["detections"] = std::move(dets);
    out << line.dump() << '\n';
  }
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

}  // namespace freqpatch::cli
