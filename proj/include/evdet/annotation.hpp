#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evdet/detection.hpp"
#include "evdet/event_model.hpp"

namespace evdet {

struct AnnotatedBox {
  BBox box;
  /// Present on detector output, absent on ground truth.
  std::optional<int> s_p;
  std::optional<double> s_s;

  friend bool operator==(const AnnotatedBox&, const AnnotatedBox&) = default;
};

/// One period's boxes, shared by ground-truth and prediction files:
/// {"file", "width", "height", "duration_us", "boxes": [{"x","y","w","h"[,"s_p","s_s"]}]}
struct Annotation {
  std::string file;
  SensorGeometry sensor;
  std::uint64_t duration_us = 0;
  std::vector<AnnotatedBox> boxes;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

Annotation make_annotation(const std::vector<Detection>& detections, std::string file,
                           const SensorGeometry& sensor, std::uint64_t duration_us);

std::string annotation_to_json(const Annotation& a);
Annotation annotation_from_json(const std::string& text);

void write_annotation(const Annotation& a, const std::filesystem::path& path);
Annotation load_annotations(const std::filesystem::path& path);

/// Serializes detections for one period and writes them to `path`.
void write_detections(const std::vector<Detection>& detections, const std::string& file,
                      const SensorGeometry& sensor, std::uint64_t duration_us,
                      const std::filesystem::path& path);

}  // namespace evdet
