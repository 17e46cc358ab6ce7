#include "evdet/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "evdet/annotation.hpp"
#include "evdet/detector.hpp"
#include "evdet/evalkit.hpp"
#include "evdet/event_io.hpp"
#include "evdet/synth.hpp"

namespace evdet::cli {
namespace fs = std::filesystem;

namespace {

int exit_code_for(const std::exception& e) {
  return dynamic_cast<const IoError*>(&e) ? kExitIo : kExitInvalid;
}

// Appends "_<tag>" to the stem of `path`.
fs::path with_tag(const fs::path& path, const std::string& tag) {
  fs::path out = path;
  out.replace_filename(path.stem().string() + "_" + tag + path.extension().string());
  return out;
}

void write_feature_csv(const DetectionTrace& trace, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "candidate,x,y,w,h,s_s,s_p,slice,f_d,f_s,f_p\n";
  for (std::size_t c = 0; c < trace.scored.size(); ++c) {
    const Candidate& cand = trace.scored[c];
    const FeatureSeries& f = cand.features;
    for (std::size_t j = 0; j < f.f_d.size(); ++j) {
      out << c << ',' << cand.window.x << ',' << cand.window.y << ',' << cand.window.w << ','
          << cand.window.h << ',' << cand.cluster.scores.s_s << ',' << cand.cluster.scores.s_p << ','
          << j << ',' << f.f_d[j] << ',';
      if (j < f.f_s.size()) out << f.f_s[j];
      out << ',';
      if (j < f.f_p.size()) out << f.f_p[j];
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

struct DetectFlags {
  std::vector<std::string> inputs;
  std::string output;
  int width = 640;
  int height = 480;
  std::uint64_t duration_us = 0;
  int n_slices = 0;
  int m_slices = 0;
  DetectorConfig config;
  double iou = kDefaultIouThreshold;
  std::string dump_saliency;
  std::string dump_features;
  int jobs = 1;
};

int cmd_detect(const DetectFlags& f, std::ostream& out, std::ostream& err) {
  DetectorConfig config = f.config;
  if (f.n_slices) config.n_slices = f.n_slices;
  if (f.m_slices) config.m_slices = f.m_slices;
  try {
    config.validate();
    SensorGeometry{f.width, f.height}.validate();
    if (f.jobs < 1) throw ConfigError("--jobs must be >= 1");
    if (!(f.iou > 0.0 && f.iou <= 1.0)) throw ConfigError("--iou must be in (0, 1]");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  std::vector<fs::path> inputs(f.inputs.begin(), f.inputs.end());
  std::sort(inputs.begin(), inputs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  const bool many = inputs.size() > 1;
  const fs::path output(f.output);
  const bool to_dir = many || fs::is_directory(output);

  const SensorGeometry sensor{f.width, f.height};
  LoadOptions load_opts;
  if (f.duration_us) load_opts.duration = f.duration_us;

  struct Outcome {
    std::optional<std::string> error;
    int code = kExitOk;
    std::size_t detections = 0;
  };
  std::vector<Outcome> outcomes(inputs.size());

  const auto process = [&](std::size_t i) {
    const fs::path& in = inputs[i];
    try {
      const EventPeriod period = load_events(in, sensor, load_opts);
      if (period.was_reordered()) {
        // Collected per file so messages stay ordered by input.
        outcomes[i].error = "warning: " + in.string() + ": timestamps were out of order; repaired";
      }
      const DetectionTrace trace = detect_period_traced(period, config);
      const fs::path dest = to_dir ? output / (in.stem().string() + ".json") : output;
      write_detections(trace.detections, in.filename().string(), sensor, period.duration(), dest);
      if (!f.dump_saliency.empty()) {
        const fs::path p = many ? with_tag(f.dump_saliency, in.stem().string()) : fs::path(f.dump_saliency);
        write_pgm(trace.saliency.gray, p);
      }
      if (!f.dump_features.empty()) {
        const fs::path p = many ? with_tag(f.dump_features, in.stem().string()) : fs::path(f.dump_features);
        write_feature_csv(trace, p);
      }
      outcomes[i].detections = trace.detections.size();
    } catch (const std::exception& e) {
      outcomes[i].error = "error: " + std::string(e.what());
      outcomes[i].code = exit_code_for(e);
    }
  };

  if (to_dir) {
    std::error_code ec;
    fs::create_directories(output, ec);
    if (ec) {
      err << "error: cannot create output directory " << output.string() << ": " << ec.message() << "\n";
      return kExitIo;
    }
  }

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(f.jobs), inputs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) process(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  int code = kExitOk;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Outcome& o = outcomes[i];
    if (o.error) err << *o.error << "\n";
    if (o.code != kExitOk) {
      if (code == kExitOk) code = o.code;
    } else {
      out << inputs[i].filename().string() << ": " << o.detections << " detection(s)\n";
    }
  }
  return code;
}

struct SynthFlags {
  double rpm = 10000.0;
  int blades = 2;
  double radius = 50.0;
  std::string center;
  int edges = 3;
  double speed = 2.0;
  double noise_rate = 20.0;
  double events_per_edge = PropellerSpec{}.events_per_edge;
  std::uint64_t seed = 0;
  double duration_ms = 20.0;
  int width = 640;
  int height = 480;
  bool no_propeller = false;
  std::string output;
  std::string annotation;
  std::string format = "auto";
};

int cmd_synth(const SynthFlags& f, std::ostream& out, std::ostream& err) {
  SynthScene scene;
  try {
    scene.sensor = {f.width, f.height};
    scene.sensor.validate();
    if (!(f.duration_ms > 0.0)) throw ValidationError("--duration-ms must be > 0");
    scene.duration_us = static_cast<std::uint64_t>(std::llround(f.duration_ms * 1000.0));
    scene.seed = f.seed;
    scene.background = {f.edges, f.speed, f.noise_rate, BackgroundSpec{}.edge_length,
                        BackgroundSpec{}.bar_width};
    scene.background.validate();
    if (!f.no_propeller) {
      PropellerSpec prop;
      prop.rpm = f.rpm;
      prop.blades = f.blades;
      prop.radius = f.radius;
      prop.events_per_edge = f.events_per_edge;
      prop.center = {f.width / 2.0, f.height / 2.0};
      if (!f.center.empty()) {
        double cx = 0, cy = 0;
        char comma = 0;
        std::istringstream s(f.center);
        if (!(s >> cx >> comma >> cy) || comma != ',') {
          throw ValidationError("--center must be 'x,y', got '" + f.center + "'");
        }
        prop.center = {cx, cy};
      }
      prop.validate(scene.sensor);
      scene.propellers.push_back(prop);
    }
    if (f.format != "auto" && f.format != "csv" && f.format != "bin") {
      throw ValidationError("--format must be auto, csv or bin");
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  const fs::path events_path(f.output);
  const fs::path ann_path =
      f.annotation.empty() ? fs::path(events_path).replace_extension(".json") : fs::path(f.annotation);
  if (ann_path == events_path) {
    err << "error: annotation path must differ from the event file path\n";
    return kExitInvalid;
  }
  scene.name = events_path.filename().string();

  try {
    const GeneratedScene generated = generate_scene(scene);
    const EventFormat format = f.format == "auto" ? format_for_path(events_path)
                               : f.format == "bin" ? EventFormat::binary
                                                   : EventFormat::csv;
    write_events(generated.period, events_path, format);
    write_annotation(generated.annotation, ann_path);
    out << "wrote " << generated.period.size() << " events to " << events_path.string() << " and "
        << generated.annotation.boxes.size() << " box(es) to " << ann_path.string() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

struct EvalFlags {
  std::string pred;
  std::string gt;
  double iou = kDefaultIouThreshold;
  bool json = false;
  bool per_period = false;
  std::string scale;
  std::string aspect;
};

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  EvalOptions opts;
  try {
    if (!(f.iou > 0.0 && f.iou <= 1.0)) throw ConfigError("--iou must be in (0, 1]");
    opts.iou_threshold = f.iou;
    std::optional<ScaleBucket> scale;
    std::optional<AspectBucket> aspect;
    if (!f.scale.empty()) scale = parse_scale_bucket(f.scale);
    if (!f.aspect.empty()) aspect = parse_aspect_bucket(f.aspect);
    if (scale || aspect) {
      opts.include = [scale, aspect](const Annotation& gt) {
        if (gt.boxes.empty()) return false;
        const BBox& b = gt.boxes.front().box;
        return (!scale || scale_bucket(b) == *scale) && (!aspect || aspect_bucket(b) == *aspect);
      };
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    const MetricsReport report = evaluate_dataset(f.pred, f.gt, opts);
    if (f.json) {
      out << report_to_json(report, f.per_period) << "\n";
    } else {
      out << report_to_table(report);
      if (f.per_period) {
        for (const auto& p : report.per_period) {
          out << "  " << p.file << " TP=" << p.tp << " FP=" << p.fp << " FN=" << p.fn << "\n";
        }
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace

BenchResult run_bench(std::size_t events, int reps, unsigned long long seed) {
  const EventPeriod period = make_bench_period(events, seed);
  const DetectorConfig config;
  BenchResult r;
  r.events = period.size();
  r.reps = reps;
  r.detections = detect_period(period, config).size();  // warm-up

  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dets = detect_period(period, config);
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    r.detections = dets.size();
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  r.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  // Nearest-rank percentile; a single sample is its own p95.
  r.p95_ms = n == 1 ? r.median_ms : ms[static_cast<std::size_t>(std::ceil(0.95 * n)) - 1];
  r.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / n;
  r.min_ms = ms.front();
  r.max_ms = ms.back();
  return r;
}

std::string bench_to_json(const BenchResult& r) {
  const nlohmann::json j = {{"events", r.events},       {"reps", r.reps},
                            {"median_ms", r.median_ms}, {"p95_ms", r.p95_ms},
                            {"mean_ms", r.mean_ms},     {"min_ms", r.min_ms},
                            {"max_ms", r.max_ms},       {"detections", r.detections}};
  return j.dump(2);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-free MAV detector for event cameras", "mavdet"};
  app.require_subcommand(1);

  const DetectorConfig defaults;

  DetectFlags df;
  auto* detect = app.add_subcommand("detect", "Detect propeller areas in event periods");
  detect->add_option("-i,--input", df.inputs, "Event file(s), CSV or binary")->required();
  detect->add_option("-o,--output", df.output,
                     "Detections JSON file, or a directory for several inputs")
      ->required();
  detect->add_option("--width", df.width, "Sensor width in pixels")->capture_default_str();
  detect->add_option("--height", df.height, "Sensor height in pixels")->capture_default_str();
  detect->add_option("--duration-us", df.duration_us,
                     "Period length when the file does not declare one (0 = infer)")
      ->capture_default_str();
  detect->add_option("--n-slices", df.n_slices, "Saliency slices (0 = one per ms)")
      ->capture_default_str();
  detect->add_option("--m-slices", df.m_slices, "Feature slices (0 = two per ms)")
      ->capture_default_str();
  df.config = defaults;
  detect->add_option("--tau-s", df.config.tau_s, "Saliency gray threshold, 0-255")
      ->capture_default_str();
  detect->add_option("--tau-p", df.config.tau_p, "Periodicity score threshold, 0-6")
      ->capture_default_str();
  detect->add_option("--k", df.config.k_top, "Clusters kept by the coarse stage")
      ->capture_default_str();
  detect->add_option("--d-merge", df.config.d_merge, "Cluster merge distance in pixels")
      ->capture_default_str();
  detect->add_option("--smooth-window", df.config.smooth_window, "Moving-average window (odd)")
      ->capture_default_str();
  detect->add_option("--margin", df.config.region_margin, "Local window dilation in pixels")
      ->capture_default_str();
  detect->add_flag("--autocorrelation-extrema", df.config.autocorrelation_extrema,
                   "Find periodicity extrema on the autocorrelation of each series");
  detect->add_option("--iou", df.iou, "Evaluation IoU threshold; validated, not used by detection")
      ->capture_default_str();
  detect->add_option("--dump-saliency", df.dump_saliency, "Write the saliency map as PGM");
  detect->add_option("--dump-features", df.dump_features, "Write candidate feature series as CSV");
  detect->add_option("-j,--jobs", df.jobs, "Periods processed in parallel")->capture_default_str();

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic propeller scene");
  synth->add_option("--rpm", sf.rpm, "Propeller speed, 5000-15000")->capture_default_str();
  synth->add_option("--blades", sf.blades, "Blade count")->capture_default_str();
  synth->add_option("--radius", sf.radius, "Propeller radius in pixels (>= 5)")->capture_default_str();
  synth->add_option("--center", sf.center, "Hub position 'x,y' (default: frame centre)");
  synth->add_option("--edges", sf.edges, "Moving background bars")->capture_default_str();
  synth->add_option("--speed", sf.speed, "Bar speed in px/ms")->capture_default_str();
  synth->add_option("--noise-rate", sf.noise_rate, "Uniform noise events per ms")->capture_default_str();
  synth->add_option("--events-per-edge", sf.events_per_edge, "Mean events per blade-edge crossing")
      ->capture_default_str();
  synth->add_option("--seed", sf.seed, "RNG seed")->capture_default_str();
  synth->add_option("--duration-ms", sf.duration_ms, "Period length in ms")->capture_default_str();
  synth->add_option("--width", sf.width, "Sensor width")->capture_default_str();
  synth->add_option("--height", sf.height, "Sensor height")->capture_default_str();
  synth->add_flag("--no-propeller", sf.no_propeller, "Background only");
  synth->add_option("-o,--output", sf.output, "Event file (.csv, or .bin for binary)")->required();
  synth->add_option("--annotation", sf.annotation, "Ground-truth JSON (default: <output>.json)");
  synth->add_option("--format", sf.format, "auto|csv|bin")->capture_default_str();

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Score prediction files against ground truth");
  eval->add_option("--pred", ef.pred, "Directory of prediction JSON files")->required();
  eval->add_option("--gt", ef.gt, "Directory of ground-truth JSON files")->required();
  eval->add_option("--iou", ef.iou, "IoU match threshold")->capture_default_str();
  eval->add_flag("--json", ef.json, "Print the report as JSON");
  eval->add_flag("--per-period", ef.per_period, "Include per-period counts");
  eval->add_option("--scale", ef.scale, "Restrict to GT scale bucket: tiny|small|medium|large");
  eval->add_option("--aspect", ef.aspect, "Restrict to GT aspect bucket: low|mid|high");

  std::size_t bench_events = 200000;
  int bench_reps = 50;
  unsigned long long bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "Time the detector on a generated scene");
  bench->add_option("--events", bench_events, "Events in the benchmark period")->capture_default_str();
  bench->add_option("--reps", bench_reps, "Timed repetitions")->capture_default_str();
  bench->add_option("--seed", bench_seed, "Scene seed")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  if (detect->parsed()) return cmd_detect(df, out, err);
  if (synth->parsed()) return cmd_synth(sf, out, err);
  if (eval->parsed()) return cmd_eval(ef, out, err);
  if (bench->parsed()) {
    if (bench_reps < 1 || bench_events < 1) {
      err << "error: --reps and --events must be >= 1\n";
      return kExitInvalid;
    }
    out << bench_to_json(run_bench(bench_events, bench_reps, bench_seed)) << "\n";
    return kExitOk;
  }
  return kExitInvalid;
}

}  // namespace evdet::cli
