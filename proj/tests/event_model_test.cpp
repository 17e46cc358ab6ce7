#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "evdet/annotation.hpp"
#include "evdet/event_io.hpp"
#include "evdet/event_model.hpp"

using namespace evdet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / ("evdet_em_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

EventPeriod parse_csv(const std::string& text, SensorGeometry sensor = {}, LoadOptions opts = {}) {
  std::istringstream in(text);
  return parse_events_csv(in, sensor, opts);
}

EventPeriod random_period(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<Event> ev;
  for (std::size_t i = 0; i < n; ++i) {
    ev.push_back({1000 + rng() % 20000, static_cast<std::uint16_t>(rng() % 640),
                  static_cast<std::uint16_t>(rng() % 480),
                  rng() % 2 ? Polarity::positive : Polarity::negative});
  }
  return EventPeriod(std::move(ev), 1000, 20000, {});
}

}  // namespace

TEST(EventPeriod, SortsAndFlagsReordering) {
  EventPeriod p({{30, 1, 1, Polarity::positive}, {10, 2, 2, Polarity::negative}, {30, 3, 3, Polarity::negative}},
                0, 100, {});
  EXPECT_TRUE(p.was_reordered());
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p.events()[0].t, 10u);
  // Stable: the two t=30 events keep their input order.
  EXPECT_EQ(p.events()[1].x, 1);
  EXPECT_EQ(p.events()[2].x, 3);
}

TEST(EventPeriod, RejectsOutOfBoundsAndOutOfWindow) {
  EXPECT_THROW(EventPeriod({{0, 640, 0, Polarity::positive}}, 0, 10, {}), ValidationError);
  EXPECT_THROW(EventPeriod({{10, 0, 0, Polarity::positive}}, 0, 10, {}), ValidationError);
  EXPECT_THROW(EventPeriod({{4, 0, 0, Polarity::positive}}, 5, 10, {}), ValidationError);
  EXPECT_THROW(EventPeriod({}, 0, 0, {}), ValidationError);
  EXPECT_NO_THROW(EventPeriod({{9, 639, 479, Polarity::positive}}, 0, 10, {}));
}

TEST(BBoxTest, DilationClampsToSensor) {
  const SensorGeometry s{640, 480};
  EXPECT_EQ((BBox{10, 10, 5, 5}.dilated(2, s)), (BBox{8, 8, 9, 9}));
  EXPECT_EQ((BBox{0, 0, 5, 5}.dilated(2, s)), (BBox{0, 0, 7, 7}));
  EXPECT_EQ((BBox{636, 476, 4, 4}.dilated(3, s)), (BBox{633, 473, 7, 7}));
  EXPECT_EQ(bbox_union({0, 0, 2, 2}, {5, 6, 1, 1}), (BBox{0, 0, 6, 7}));
}

TEST(DetectorConfigTest, DefaultsAndValidation) {
  DetectorConfig c;
  EXPECT_EQ(c.tau_s, 50);
  EXPECT_EQ(c.tau_p, 3);
  EXPECT_EQ(c.k_top, 4);
  EXPECT_DOUBLE_EQ(c.d_merge, 50.0);
  EXPECT_EQ(c.smooth_window, 3);
  EXPECT_EQ(c.region_margin, 2);
  const DetectorConfig r = c.resolved(20000);
  EXPECT_EQ(r.n(), 20);
  EXPECT_EQ(r.m(), 40);

  c.tau_s = 300;
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("0-255"), std::string::npos);
  }
  c = {};
  c.smooth_window = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.n_slices = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.tau_p = 7;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CsvLoad, ParsesRow) {
  const EventPeriod p = parse_csv("t_us,x,y,p\n1000,320,240,1\n", {}, {0, 20000});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p.events()[0], (Event{1000, 320, 240, Polarity::positive}));
}

TEST(CsvLoad, HeaderOnlyUsesDeclaredDuration) {
  const EventPeriod p = parse_csv("# t_start_us=0 duration_us=15000\nt_us,x,y,p\n");
  EXPECT_TRUE(p.empty());
  EXPECT_EQ(p.duration(), 15000u);
}

TEST(CsvLoad, EmptyUndeclaredFallsBackToDefaultPeriod) {
  const EventPeriod p = parse_csv("");
  EXPECT_TRUE(p.empty());
  EXPECT_EQ(p.duration(), kDefaultPeriodUs);
}

TEST(CsvLoad, InfersPeriodFromEvents) {
  const EventPeriod p = parse_csv("500,1,1,0\n900,2,2,1\n");
  EXPECT_EQ(p.t_start(), 500u);
  EXPECT_EQ(p.duration(), 401u);
}

TEST(CsvLoad, OutOfBoundsIsValidationError) {
  EXPECT_THROW(parse_csv("500,700,100,0\n", {640, 480}, {0, 1000}), ValidationError);
}

TEST(CsvLoad, MalformedRowsReportLine) {
  try {
    parse_csv("t_us,x,y,p\n1,2,3,1\n1,2,x,1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_csv("1,2,3\n"), ParseError);
  EXPECT_THROW(parse_csv("1,2,3,2\n"), ParseError);
  EXPECT_THROW(parse_csv("-1,2,3,1\n"), ParseError);
}

TEST(CsvLoad, UnsortedIsRepaired) {
  const EventPeriod p = parse_csv("20,1,1,1\n10,1,1,0\n", {}, {0, 100});
  EXPECT_TRUE(p.was_reordered());
  EXPECT_EQ(p.events().front().t, 10u);
}

TEST(EventIo, RoundTripBothFormats) {
  const fs::path dir = temp_dir();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const EventPeriod p = random_period(seed, 500);
    for (auto fmt : {EventFormat::csv, EventFormat::binary}) {
      const fs::path path = dir / (fmt == EventFormat::csv ? "rt.csv" : "rt.bin");
      write_events(p, path, fmt);
      const EventPeriod back = load_events(path, p.sensor());
      EXPECT_EQ(back, p);
      for (const Event& e : back.events()) {
        EXPECT_TRUE(p.sensor().contains(e.x, e.y));
        EXPECT_GE(e.t, back.t_start());
        EXPECT_LT(e.t, back.t_end());
      }
    }
  }
  const EventPeriod empty({}, 0, 5000, {});
  write_events(empty, dir / "e.csv", EventFormat::csv);
  EXPECT_EQ(load_events(dir / "e.csv", {}), empty);
  fs::remove_all(dir);
}

TEST(EventIo, BinaryLayout) {
  const EventPeriod p({{7, 513, 2, Polarity::positive}}, 0, 10,
                      {640, 480});
  std::ostringstream out;
  write_events_binary(p, out);
  const std::string b = out.str();
  ASSERT_EQ(b.size(), kBinaryHeaderSize + kBinaryRecordSize);
  EXPECT_EQ(b.substr(0, 4), "EVD1");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 640 & 0xFF);
  EXPECT_EQ(static_cast<unsigned char>(b[5]), 640 >> 8);
  EXPECT_EQ(static_cast<unsigned char>(b[24]), 7);
  EXPECT_EQ(static_cast<unsigned char>(b[32]), 513 & 0xFF);
  EXPECT_EQ(static_cast<unsigned char>(b[33]), 513 >> 8);
  EXPECT_EQ(static_cast<unsigned char>(b[36]), 1);
}

TEST(EventIo, BinaryGeometryMismatchAndTruncation) {
  const EventPeriod p = random_period(9, 10);
  std::ostringstream out;
  write_events_binary(p, out);
  std::istringstream wrong(out.str());
  EXPECT_THROW(parse_events_binary(wrong, {320, 240}), ValidationError);
  std::istringstream cut(out.str().substr(0, out.str().size() - 3));
  EXPECT_THROW(parse_events_binary(cut, p.sensor()), ParseError);
}

TEST(EventIo, MissingFileIsIoError) {
  EXPECT_THROW(load_events("/nonexistent/dir/x.csv", {}), IoError);
}

TEST(Annotations, DetectionJsonFields) {
  const Detection d{{10, 20, 30, 40}, 5, 1234.0, {}};
  const Annotation a = make_annotation({d}, "p.csv", {}, 20000);
  const std::string json = annotation_to_json(a);
  for (const char* key : {"\"x\":10", "\"y\":20", "\"w\":30", "\"h\":40", "\"s_p\":5", "\"s_s\":1234"}) {
    EXPECT_NE(json.find(key), std::string::npos) << key << " in " << json;
  }
  const Annotation empty = make_annotation({}, "e.csv", {}, 20000);
  EXPECT_NE(annotation_to_json(empty).find("\"boxes\":[]"), std::string::npos);
}

TEST(Annotations, WriteLoadRoundTrip) {
  const fs::path dir = temp_dir();
  const std::vector<Detection> dets{{{10, 20, 30, 40}, 5, 1234.5, {}}, {{0, 0, 1, 1}, 3, 0.25, {}}};
  write_detections(dets, "a.csv", {}, 20000, dir / "a.json");
  const Annotation back = load_annotations(dir / "a.json");
  ASSERT_EQ(back.boxes.size(), 2u);
  EXPECT_EQ(back.boxes[0].box, (BBox{10, 20, 30, 40}));
  EXPECT_EQ(back.boxes[0].s_p, 5);
  EXPECT_EQ(back.boxes[0].s_s, 1234.5);
  EXPECT_EQ(back.boxes[1].box, (BBox{0, 0, 1, 1}));
  EXPECT_EQ(back.file, "a.csv");
  EXPECT_EQ(back.duration_us, 20000u);

  Annotation gt;
  gt.file = "g.csv";
  gt.duration_us = 20000;
  gt.boxes.push_back({{1, 2, 3, 4}, std::nullopt, std::nullopt});
  EXPECT_EQ(annotation_from_json(annotation_to_json(gt)), gt);
  EXPECT_EQ(annotation_to_json(gt).find("s_p"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Annotations, MalformedJson) {
  EXPECT_THROW(annotation_from_json("{"), ParseError);
  EXPECT_THROW(annotation_from_json(R"({"file":"a","width":640,"height":480,"duration_us":1,"boxes":[{"x":1}]})"),
               ParseError);
}
