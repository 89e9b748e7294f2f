#include "freqpatch/cli/annotations.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "freqpatch/imaging.hpp"

namespace freqpatch::cli {
namespace {

using nlohmann::ordered_json;

AnnotationRecord parse_record(const std::string& text, long line_no) {
  const auto fail = [&](const std::string& msg) -> AnnotationError {
    return AnnotationError("annotations line " + std::to_string(line_no) + ": " + msg, line_no);
  };
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw fail(std::string("malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw fail("record must be an object");
  AnnotationRecord rec;
  try {
    rec.image_path = j.at("image").get<std::string>();
    rec.width = j.at("width").get<int>();
    rec.height = j.at("height").get<int>();
    for (const auto& b : j.at("boxes")) {
      if (!b.is_array() || b.size() != 4) throw fail("each box must be [x_min, y_min, x_max, y_max]");
      rec.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    }
  } catch (const ordered_json::exception& e) {
    throw fail(std::string("bad field (") + e.what() + ")");
  }
  if (rec.image_path.empty()) throw fail("empty image path");
  if (rec.width < 1 || rec.height < 1) throw fail("width and height must be positive");
  if (rec.boxes.empty()) throw fail("record has no boxes");
  for (std::size_t i = 0; i < rec.boxes.size(); ++i) {
    if (!rec.boxes[i].valid()) {
      throw fail("invalid box " + std::to_string(i) + " in record for " + rec.image_path);
    }
  }
  return rec;
}

}  // namespace

std::vector<AnnotationRecord> parse_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations: " + path.string());
  std::vector<AnnotationRecord> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(line, line_no));
  }
  return out;
}

Dataset load_annotations(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  const std::vector<AnnotationRecord> records = parse_annotations(path);
  if (records.empty() && warnings) warnings->push_back("annotation file is empty: " + path.string());
  const std::filesystem::path base = path.parent_path();
  Dataset data;
  data.reserve(records.size());
  for (const AnnotationRecord& rec : records) {
    const std::filesystem::path image_path = base / rec.image_path;
    if (!std::filesystem::exists(image_path)) {
      throw IoError("missing image file: " + image_path.string());
    }
    DatasetSample s;
    const std::string ext = image_path.extension().string();
    if (ext == ".jpg" || ext == ".jpeg") {
      std::ifstream f(image_path, std::ios::binary);
      std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), {});
      s.image = decode_jpeg(bytes);
    } else {
      s.image = read_png(image_path);
    }
    if (s.image.width() != rec.width || s.image.height() != rec.height) {
      throw ShapeError("image size differs from its record: " + image_path.string());
    }
    s.gt_boxes = rec.boxes;
    data.push_back(std::move(s));
  }
  return data;
}

std::string annotation_line(const AnnotationRecord& rec) {
  ordered_json j;
  j["image"] = rec.image_path;
  j["width"] = rec.width;
  j["height"] = rec.height;
  ordered_json boxes = ordered_json::array();
  for (const BoundingBox& b : rec.boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  j["boxes"] = std::move(boxes);
  return j.dump();
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  const std::filesystem::path ann = dir / "annotations.jsonl";
  if (std::filesystem::exists(ann)) throw IoError("refusing to overwrite " + ann.string());
  std::filesystem::create_directories(dir / "images");
  std::ofstream out(ann, std::ios::binary);
  if (!out) throw IoError("cannot write " + ann.string());
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "images/%06zu.png", i);
    write_png(dir / name, data[i].image);
    AnnotationRecord rec{name, data[i].image.width(), data[i].image.height(), data[i].gt_boxes};
    out << annotation_line(rec) << '\n';
  }
  if (!out) throw IoError("write failed: " + ann.string());
  return ann;
}

}  // namespace freqpatch::cli
