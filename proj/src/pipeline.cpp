#include "semfusion/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "semfusion/errors.hpp"
#include "semfusion/synth.hpp"

namespace semfusion {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  double v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw std::invalid_argument(what + ": not a number: '" + s + "'");
  return v;
}

int to_int(const std::string& s, const std::string& what) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw std::invalid_argument(what + ": not an integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw std::invalid_argument(what + ": not a boolean: '" + s + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

OmegaSetting OmegaSetting::parse(const std::string& text) {
  OmegaSetting o;
  if (text == "sidecar") {
    o.mode = Mode::Sidecar;
  } else if (text == "off") {
    o.mode = Mode::Off;
    o.value = 0;
  } else if (text.rfind("const:", 0) == 0) {
    o.mode = Mode::Constant;
    o.value = to_double(text.substr(6), "omega");
    if (!(o.value >= 0 && o.value <= 1)) throw std::invalid_argument("omega: constant must lie in [0, 1]");
  } else {
    throw std::invalid_argument("omega: expected const:<v>, sidecar or off, got '" + text + "'");
  }
  return o;
}

std::string OmegaSetting::str() const {
  switch (mode) {
    case Mode::Sidecar: return "sidecar";
    case Mode::Off: return "off";
    case Mode::Constant: return "const:" + fmt(value);
  }
  return {};
}

EvalToggles EvalToggles::parse(const std::string& text) {
  EvalToggles t{false, false, false, false};
  for (const auto& item : split(text, ',')) {
    if (item == "ate") t.ate = true;
    else if (item == "recon") t.recon = true;
    else if (item == "iou") t.iou = true;
    else if (item == "mem") t.mem = true;
    else if (!item.empty()) throw std::invalid_argument("eval: unknown protocol '" + item + "'");
  }
  return t;
}

Intrinsics parse_intrinsics(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) throw std::invalid_argument("intrinsics: expected fx,fy,cx,cy");
  Intrinsics K;
  K.fx = to_double(parts[0], "intrinsics");
  K.fy = to_double(parts[1], "intrinsics");
  K.cx = to_double(parts[2], "intrinsics");
  K.cy = to_double(parts[3], "intrinsics");
  if (!(K.fx > 0) || !(K.fy > 0)) throw std::invalid_argument("intrinsics: focal lengths must be positive");
  return K;
}

std::pair<int, int> parse_frame_range(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw std::invalid_argument("frames: expected a:b");
  const int a = to_int(parts[0], "frames"), b = to_int(parts[1], "frames");
  if (a < 0 || b < a) throw std::invalid_argument("frames: need 0 <= a <= b");
  return {a, b};
}

void RunConfig::validate() const {
  if (dataset.empty()) throw std::invalid_argument("no dataset given");
  if (!std::filesystem::is_directory(dataset)) throw MissingFileError("dataset directory not found: " + dataset.string());
  if (seg_dir && !std::filesystem::is_directory(*seg_dir))
    throw MissingFileError("segmentation directory not found: " + seg_dir->string());
  if (out.empty()) throw std::invalid_argument("no output directory given");
  if (frames && (frames->first < 0 || frames->second < frames->first)) throw std::invalid_argument("invalid frame range");
  if (!(max_time_gap > 0) || !(depth_max > 0)) throw std::invalid_argument("time gap and depth_max must be positive");
  registration.validate();
  refine.validate();
}

void apply_config_value(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "dataset") c.dataset = v;
  else if (key == "seg_dir") c.seg_dir = v;
  else if (key == "intrinsics") c.intrinsics = parse_intrinsics(v);
  else if (key == "omega") c.omega = OmegaSetting::parse(v);
  else if (key == "frames") c.frames = parse_frame_range(v);
  else if (key == "out") c.out = v;
  else if (key == "eval") c.eval = EvalToggles::parse(v);
  else if (key == "refine_n") c.refine.window = to_int(v, key);
  else if (key == "refine_sigma") c.refine.threshold = to_int(v, key);
  else if (key == "refine_enabled") c.refine_enabled = to_bool(v, key);
  else if (key == "refine_adjacency") {
    const int a = to_int(v, key);
    if (a != 4 && a != 8) throw std::invalid_argument("refine_adjacency: expected 4 or 8");
    c.refine.adjacency = a == 4 ? Adjacency::Four : Adjacency::Eight;
  } else if (key == "refine_max_distance") c.refine.max_distance = to_double(v, key);
  else if (key == "levels") c.registration.levels = to_int(v, key);
  else if (key == "iterations") {
    c.registration.iterations.clear();
    for (const auto& s : split(v, ',')) c.registration.iterations.push_back(to_int(s, key));
  } else if (key == "omega_rgb_default") c.registration.omega_rgb_default = to_double(v, key);
  else if (key == "convergence_eps") c.registration.convergence_eps = to_double(v, key);
  else if (key == "huber_delta_icp") c.registration.huber_delta_icp = to_double(v, key);
  else if (key == "huber_delta_rgb") c.registration.huber_delta_rgb = to_double(v, key);
  else if (key == "min_correspondences") c.registration.min_valid_correspondences = to_int(v, key);
  else if (key == "max_correspondence_distance") c.registration.max_correspondence_distance = to_double(v, key);
  else if (key == "max_normal_angle") c.registration.max_normal_angle_deg = to_double(v, key);
  else if (key == "delta_depth") c.fusion.delta_depth = to_double(v, key);
  else if (key == "delta_angle") c.fusion.delta_angle_deg = to_double(v, key);
  else if (key == "weight_cap") c.fusion.weight_cap = to_double(v, key);
  else if (key == "carve_margin") c.fusion.carve_margin = to_double(v, key);
  else if (key == "inactive_window") c.fusion.inactive_window = to_int(v, key);
  else if (key == "min_instance_area") c.semantic.min_new_instance_area = static_cast<std::size_t>(to_int(v, key));
  else if (key == "max_time_gap") c.max_time_gap = to_double(v, key);
  else if (key == "depth_max") c.depth_max = to_double(v, key);
  else throw std::invalid_argument("unknown configuration key '" + key + "'");
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open configuration " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), lineno, "expected key=value");
    try {
      apply_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return base;
}

namespace {

Intrinsics resolve_intrinsics(const RunConfig& cfg, const RgbdFrame& first) {
  Intrinsics K;
  if (cfg.intrinsics) {
    K = *cfg.intrinsics;
  } else if (std::filesystem::exists(cfg.dataset / "camera.txt")) {
    K = synth::read_camera(cfg.dataset / "camera.txt");
  } else {
    throw MissingFileError("no intrinsics given and no camera.txt in " + cfg.dataset.string());
  }
  K.width = first.width();
  K.height = first.height();
  K.validate();
  return K;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

void evaluate_run(const RunConfig& cfg, const SequenceIndex& seq, const std::vector<std::size_t>& processed,
                  const SurfelMap& map, const InstanceTable& table, RunResult& res) {
  auto& rep = res.report;
  if (cfg.eval.ate) {
    if (!seq.ground_truth) {
      rep.notes.push_back("ate skipped: no groundtruth.txt");
    } else {
      try {
        rep.ate = ate(res.trajectory, *seq.ground_truth, cfg.max_time_gap);
      } catch (const InsufficientOverlapError& e) {
        rep.notes.push_back(std::string("ate skipped: ") + e.what());
      }
    }
  }
  if (cfg.eval.recon) {
    const auto scene_file = cfg.dataset / "scene.json";
    if (!std::filesystem::exists(scene_file) || map.empty()) {
      rep.notes.push_back("recon skipped: no scene.json");
    } else {
      const auto scene = synth::read_scene(scene_file);
      ReconstructionTruth all;
      for (const auto& p : scene.primitives) all.shapes.push_back(p.shape);
      std::vector<Vec3> pts;
      std::map<int, std::vector<Vec3>> per_label;
      for (const auto& s : map.surfels()) {
        pts.push_back(s.position);
        if (s.is_object()) per_label[s.label].push_back(s.position);
      }
      try {
        rep.recon_overall = reconstruction_error(pts, all).mean_distance;
        for (const auto& [label, obj] : per_label) {
          // compare against the object primitive the surfels already sit on
          std::optional<synth::Shape> best;
          double best_d = std::numeric_limits<double>::infinity();
          for (const auto& p : scene.primitives) {
            if (p.instance_id == 0) continue;
            double d = 0;
            for (const auto& x : obj) d += (synth::closest_point(p.shape, x) - x).norm();
            if (d < best_d) best_d = d, best = p.shape;
          }
          if (best) rep.recon_per_object[label] = reconstruction_error(obj, ReconstructionTruth{{}, {*best}}).mean_distance;
        }
      } catch (const RegistrationFailureError& e) {
        rep.notes.push_back(std::string("recon failed: ") + e.what());
      }
    }
  }
  if (cfg.eval.iou) {
    for (std::size_t k = 0; k < processed.size(); ++k) {
      const auto& e = seq.entries[processed[k]];
      const auto truth_file = seq.root / "truth" / (e.frame_id + ".png");
      if (!std::filesystem::exists(truth_file)) continue;
      const auto truth = read_label_png(truth_file);
      Intrinsics K = *cfg.intrinsics;
      K.width = truth.width();
      K.height = truth.height();
      const auto view = render_model(map, res.trajectory[k].pose, K, false);
      rep.iou_per_frame.push_back(instance_iou(view.instance, truth));
    }
    if (!rep.iou_per_frame.empty()) {
      double s = 0;
      for (double v : rep.iou_per_frame) s += v;
      rep.iou_mean = s / static_cast<double>(rep.iou_per_frame.size());
    } else {
      rep.notes.push_back("iou skipped: no truth instance maps");
    }
  }
  if (cfg.eval.mem) rep.memory = memory_report(map, table);
}

}  // namespace

RunResult run_pipeline(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  const auto seq = load_sequence(cfg.dataset, cfg.max_time_gap, cfg.seg_dir);
  if (seq.entries.empty()) throw MissingFileError("dataset has no associated frames: " + cfg.dataset.string());

  std::size_t first = 0, last = seq.entries.size() - 1;
  if (cfg.frames) {
    first = static_cast<std::size_t>(cfg.frames->first);
    last = std::min(last, static_cast<std::size_t>(cfg.frames->second));
    if (first > last) throw std::invalid_argument("frame range starts past the end of the dataset");
  }

  std::filesystem::create_directories(cfg.out);
  std::ofstream promo_log(cfg.out / "promotions.log");
  if (!promo_log) throw IoError("cannot write " + (cfg.out / "promotions.log").string());

  RunResult res;
  SurfelMap map(cfg.fusion);
  InstanceTable table;
  Pose pose;
  std::vector<std::size_t> processed;

  for (std::size_t i = first; i <= last; ++i) {
    const int k = static_cast<int>(i - first);
    const auto& entry = seq.entries[i];
    const RgbdFrame frame = load_frame(entry);
    if (k == 0) cfg.intrinsics = resolve_intrinsics(cfg, frame);
    const Intrinsics& K = *cfg.intrinsics;
    frame.validate(K, cfg.depth_max);

    SegmentationFrame seg;
    seg.omega_rgb = cfg.registration.omega_rgb_default;
    if (entry.segmentation_path) {
      seg = load_segmentation(*entry.segmentation_path, cfg.registration.omega_rgb_default);
      seg.validate();
    }
    double omega = seg.omega_rgb;
    if (cfg.omega.mode == OmegaSetting::Mode::Constant) omega = cfg.omega.value;
    if (cfg.omega.mode == OmegaSetting::Mode::Off) omega = 0.0;

    if (k > 0) {
      try {
        pose = solve(frame, map, K, pose, omega, cfg.registration).pose;
      } catch (const TrackingLostError& e) {
        res.exit_code = 3;
        res.failed_frame = static_cast<int>(i);
        res.message = "tracking lost at frame " + std::to_string(i) + " (" + entry.frame_id + "): " + e.what();
        break;
      }
    }
    res.trajectory.push_back({entry.timestamp, pose});
    processed.push_back(i);

    fuse_frame(map, frame, pose, K, k);
    fuse_semantic_frame(map, table, seg, pose, K, k, cfg.semantic);
    if (cfg.refine_enabled) {
      const ModelView view = render_model(map, pose, K, false);
      refine_step(map, view, seg, cfg.refine);
      if ((k + 1) % cfg.refine.window == 0) {
        const auto rep = refine_commit(map, table, cfg.refine, k + 1, static_cast<int>(i));
        res.promotions += rep.total;
        promo_log << format_promotion(rep) << '\n';
      }
    }
    mark_inactive(map, k, cfg.fusion.inactive_window);
  }

  if (!cfg.intrinsics) throw MissingFileError("no frame could be processed");
  evaluate_run(cfg, seq, processed, map, table, res);
  res.surfels = map.size();
  res.instances = table.size();

  write_trajectory(res.trajectory, cfg.out / "trajectory.txt");
  export_ply(map, cfg.out / "surfels.ply");
  write_instance_table(table, cfg.out / "instances.txt");
  std::string text = res.report.to_text();
  std::string kv = res.report.to_kv();
  text += "Frames processed: " + std::to_string(res.trajectory.size()) + "\nSurfels: " + std::to_string(res.surfels) +
          "\nInstances: " + std::to_string(res.instances) + "\nPromotions: " + std::to_string(res.promotions) + "\n";
  kv += "frames=" + std::to_string(res.trajectory.size()) + "\nsurfels=" + std::to_string(res.surfels) +
        "\ninstances=" + std::to_string(res.instances) + "\npromotions=" + std::to_string(res.promotions) + "\n";
  kv += "status=" + std::string(res.exit_code == 0 ? "ok" : "tracking_lost") + "\n";
  if (res.failed_frame) {
    text += "Status: " + res.message + "\n";
    kv += "failed_frame=" + std::to_string(*res.failed_frame) + "\n";
  } else {
    text += "Status: ok\n";
  }
  write_text(cfg.out / "report.txt", text);
  write_text(cfg.out / "report.kv", kv);
  return res;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<double>& omegas) {
  if (omegas.empty()) throw std::invalid_argument("ablation needs at least one omega value");
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    AblationRow row;
    row.omega = omegas[i];
    RunConfig c = cfg;
    c.omega.mode = OmegaSetting::Mode::Constant;
    c.omega.value = omegas[i];
    c.out = cfg.out / ("omega_" + std::to_string(i) + "_" + fmt(omegas[i]));
    try {
      if (!(omegas[i] >= 0 && omegas[i] <= 1)) throw std::invalid_argument("omega outside [0, 1]");
      const auto r = run_pipeline(c);
      row.ok = r.exit_code == 0;
      if (r.report.ate) row.ate = r.report.ate->rmse;
      row.recon = r.report.recon_overall;
      if (!row.ok) row.error = r.message;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  std::filesystem::create_directories(cfg.out);
  write_text(cfg.out / "ablation.txt", format_ablation(rows));
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::string s = "# omega ate_rmse recon_mean status\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8g %-14s %-14s %s\n", r.omega, r.ate ? fmt(*r.ate).c_str() : "-",
                  r.recon ? fmt(*r.recon).c_str() : "-", r.ok ? "ok" : ("failed: " + r.error).c_str());
    s += buf;
  }
  return s;
}

}  // namespace semfusion
