#include "evdet/annotation.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace evdet {

using nlohmann::json;

Annotation make_annotation(const std::vector<Detection>& detections, std::string file,
                           const SensorGeometry& sensor, std::uint64_t duration_us) {
  Annotation a{std::move(file), sensor, duration_us, {}};
  a.boxes.reserve(detections.size());
  for (const Detection& d : detections) a.boxes.push_back({d.bbox, d.s_p, d.s_s});
  return a;
}

std::string annotation_to_json(const Annotation& a) {
  json boxes = json::array();
  for (const AnnotatedBox& b : a.boxes) {
    json j = {{"x", b.box.x}, {"y", b.box.y}, {"w", b.box.w}, {"h", b.box.h}};
    if (b.s_p) j["s_p"] = *b.s_p;
    if (b.s_s) j["s_s"] = *b.s_s;
    boxes.push_back(std::move(j));
  }
  const json doc = {{"file", a.file},
                    {"width", a.sensor.width},
                    {"height", a.sensor.height},
                    {"duration_us", a.duration_us},
                    {"boxes", std::move(boxes)}};
  return doc.dump();
}

Annotation annotation_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    Annotation a;
    a.file = doc.at("file").get<std::string>();
    a.sensor = {doc.at("width").get<int>(), doc.at("height").get<int>()};
    a.duration_us = doc.at("duration_us").get<std::uint64_t>();
    for (const json& b : doc.at("boxes")) {
      AnnotatedBox box{{b.at("x").get<int>(), b.at("y").get<int>(), b.at("w").get<int>(),
                        b.at("h").get<int>()},
                       std::nullopt,
                       std::nullopt};
      if (!box.box.valid()) throw ValidationError("box " + to_string(box.box) + " has non-positive size");
      if (b.contains("s_p")) box.s_p = b.at("s_p").get<int>();
      if (b.contains("s_s")) box.s_s = b.at("s_s").get<double>();
      a.boxes.push_back(box);
    }
    return a;
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotation JSON: ") + e.what());
  }
}

void write_annotation(const Annotation& a, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << annotation_to_json(a) << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

Annotation load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return annotation_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail());
  }
}

void write_detections(const std::vector<Detection>& detections, const std::string& file,
                      const SensorGeometry& sensor, std::uint64_t duration_us,
                      const std::filesystem::path& path) {
  write_annotation(make_annotation(detections, file, sensor, duration_us), path);
}

}  // namespace evdet
