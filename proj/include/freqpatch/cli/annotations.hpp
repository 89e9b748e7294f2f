#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "freqpatch/box.hpp"
#include "freqpatch/dataset.hpp"
#include "freqpatch/errors.hpp"

namespace freqpatch::cli {

// One JSON-Lines record:
//   {"image": "images/000000.png", "width": 128, "height": 128,
//    "boxes": [[x_min, y_min, x_max, y_max], ...]}
// Paths are relative to the annotation file's directory.
struct AnnotationRecord {
  std::string image_path;
  int width = 0;
  int height = 0;
  std::vector<BoundingBox> boxes;
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

class AnnotationError : public Error {
 public:
  AnnotationError(const std::string& what, long line) : Error(what), line_(line) {}
  [[nodiscard]] long line() const { return line_; }

 private:
  long line_;
};

// Parses without touching the images. Blank lines are skipped.
std::vector<AnnotationRecord> parse_annotations(const std::filesystem::path& path);

// Decodes every referenced image. An empty file yields an empty dataset and
// a message in warnings (when given).
Dataset load_annotations(const std::filesystem::path& path,
                         std::vector<std::string>* warnings = nullptr);

// Writes images as dir/images/NNNNNN.png plus dir/annotations.jsonl.
// Refuses to overwrite an existing annotation file.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& data);

std::string annotation_line(const AnnotationRecord& rec);

}  // namespace freqpatch::cli
