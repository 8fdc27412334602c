#include "semfusion/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "semfusion/errors.hpp"

namespace semfusion {

namespace {

struct ListLine {
  double timestamp;
  std::string path;
};

std::vector<ListLine> read_list(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingFileError("cannot open " + file.string());
  std::vector<ListLine> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ListLine l;
    if (!(ss >> l.timestamp >> l.path)) throw ParseError(file.string(), lineno, "expected '<timestamp> <path>'");
    if (!out.empty() && !(l.timestamp > out.back().timestamp))
      throw ParseError(file.string(), lineno, "timestamps must be strictly increasing");
    out.push_back(std::move(l));
  }
  return out;
}

Trajectory parse_trajectory(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingFileError("cannot open " + file.string());
  Trajectory out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw ParseError(file.string(), lineno, "expected 'timestamp tx ty tz qx qy qz qw'");
    if (!out.empty() && !(t > out.back().timestamp))
      throw ParseError(file.string(), lineno, "timestamps must be strictly increasing");
    const Eigen::Quaterniond q(qw, qx, qy, qz);
    if (!(q.norm() > 0.5)) throw ParseError(file.string(), lineno, "degenerate quaternion");
    out.push_back({t, Pose::from_quaternion(q, {tx, ty, tz})});
  }
  return out;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_png(const cv::Mat& m, const fs::path& path) {
  ensure_parent(path);
  if (!cv::imwrite(path.string(), m)) throw IoError("failed to write " + path.string());
}

cv::Mat read_png(const fs::path& path, int flags) {
  if (!fs::exists(path)) throw MissingFileError("missing file " + path.string());
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw IoError("failed to decode " + path.string());
  return m;
}

}  // namespace

std::size_t InstanceMask::area() const {
  return static_cast<std::size_t>(std::count(mask.pixels().begin(), mask.pixels().end(), 1));
}

void SegmentationFrame::validate() const {
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& m = masks[i];
    if (has_soft_prob() && !m.mask.same_shape(soft_prob))
      throw ShapeMismatchError("mask " + std::to_string(i) + " does not match soft_prob size");
    if (i > 0 && !m.mask.same_shape(masks[0].mask)) throw ShapeMismatchError("masks differ in size");
    if (m.class_probs.size() != classes.size())
      throw ShapeMismatchError("class_probs length differs from the class list");
    if (m.area() == 0) throw ShapeMismatchError("mask " + std::to_string(i) + " is empty");
    double sum = 0;
    for (double p : m.class_probs) {
      if (!(p >= 0.0 && p <= 1.0)) throw ProbabilityRangeError("class probability outside [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ProbabilityRangeError("class probabilities do not sum to 1");
  }
  for (std::size_t i = 0; i + 1 < masks.size(); ++i)
    for (std::size_t j = i + 1; j < masks.size(); ++j)
      for (std::size_t k = 0; k < masks[i].mask.size(); ++k)
        if (masks[i].mask[k] && masks[j].mask[k]) throw ShapeMismatchError("masks overlap");
  if (has_soft_prob()) {
    for (double p : soft_prob.pixels())
      if (!(p >= 0.0 && p <= 1.0)) throw ProbabilityRangeError("soft_prob outside [0, 1]");
    for (const auto& m : masks)
      for (std::size_t k = 0; k < m.mask.size(); ++k)
        if (m.mask[k] && soft_prob[k] < 0.5)
          throw ProbabilityRangeError("mask pixel with soft_prob below 0.5");
  }
  if (!(omega_rgb >= 0.0 && omega_rgb <= 1.0)) throw ProbabilityRangeError("omega_rgb outside [0, 1]");
}

std::vector<std::pair<std::size_t, std::size_t>> associate_timestamps(
    const std::vector<double>& a, const std::vector<double>& b, double max_gap) {
  struct Candidate {
    double diff;
    std::size_t i, j;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < a.size(); ++i) {
    // b is sorted; only scan the window that can be within max_gap.
    auto lo = std::lower_bound(b.begin(), b.end(), a[i] - max_gap);
    for (auto it = lo; it != b.end() && *it <= a[i] + max_gap; ++it) {
      const double d = std::abs(*it - a[i]);
      if (d <= max_gap) cands.push_back({d, i, static_cast<std::size_t>(it - b.begin())});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(x.diff, x.i, x.j) < std::tie(y.diff, y.i, y.j);
  });
  std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : cands) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = 1;
    out.emplace_back(c.i, c.j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

SequenceIndex load_sequence(const fs::path& root, double max_time_gap,
                            const std::optional<fs::path>& seg_dir) {
  const auto rgb = read_list(root / "rgb.txt");
  const auto depth = read_list(root / "depth.txt");
  std::vector<double> ta, tb;
  for (const auto& l : rgb) ta.push_back(l.timestamp);
  for (const auto& l : depth) tb.push_back(l.timestamp);

  SequenceIndex idx;
  idx.root = root;
  const fs::path segroot = seg_dir.value_or(root / "seg");
  for (auto [i, j] : associate_timestamps(ta, tb, max_time_gap)) {
    SequenceEntry e;
    e.timestamp = rgb[i].timestamp;
    e.depth_timestamp = depth[j].timestamp;
    e.color_path = root / rgb[i].path;
    e.depth_path = root / depth[j].path;
    e.frame_id = fs::path(rgb[i].path).stem().string();
    if (!fs::exists(e.color_path)) throw MissingFileError("missing file " + e.color_path.string());
    if (!fs::exists(e.depth_path)) throw MissingFileError("missing file " + e.depth_path.string());
    if (fs::is_directory(segroot / e.frame_id)) e.segmentation_path = segroot / e.frame_id;
    idx.entries.push_back(std::move(e));
  }
  if (fs::exists(root / "groundtruth.txt")) idx.ground_truth = parse_trajectory(root / "groundtruth.txt");
  return idx;
}

RgbdFrame load_frame(const SequenceEntry& entry) {
  RgbdFrame f;
  f.timestamp = entry.timestamp;
  f.color = read_color_png(entry.color_path);
  f.depth = read_depth_png(entry.depth_path);
  if (!f.color.same_shape(f.depth))
    throw ShapeMismatchError("color and depth sizes differ for frame " + entry.frame_id);
  return f;
}

DepthImage read_depth_png(const fs::path& path) {
  const cv::Mat m = read_png(path, cv::IMREAD_ANYDEPTH);
  if (m.type() != CV_16UC1) throw ShapeMismatchError(path.string() + ": expected 16-bit single channel");
  DepthImage d(m.cols, m.rows, 0.0);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) d(x, y) = m.at<std::uint16_t>(y, x) / kDepthScale;
  return d;
}

void write_depth_png(const DepthImage& depth, const fs::path& path) {
  cv::Mat m(depth.height(), depth.width(), CV_16UC1);
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) {
      const double raw = std::round(depth(x, y) * kDepthScale);
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::clamp(raw, 0.0, 65535.0));
    }
  write_png(m, path);
}

ColorImage read_color_png(const fs::path& path) {
  const cv::Mat m = read_png(path, cv::IMREAD_COLOR);
  ColorImage c(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      const auto& bgr = m.at<cv::Vec3b>(y, x);
      c(x, y) = Rgb(bgr[2], bgr[1], bgr[0]);
    }
  return c;
}

void write_color_png(const ColorImage& color, const fs::path& path) {
  cv::Mat m(color.height(), color.width(), CV_8UC3);
  for (int y = 0; y < color.height(); ++y)
    for (int x = 0; x < color.width(); ++x) {
      const Rgb& c = color(x, y);
      m.at<cv::Vec3b>(y, x) = cv::Vec3b(c[2], c[1], c[0]);
    }
  write_png(m, path);
}

Image<int> read_label_png(const fs::path& path) {
  const cv::Mat m = read_png(path, cv::IMREAD_ANYDEPTH);
  if (m.type() != CV_16UC1) throw ShapeMismatchError(path.string() + ": expected 16-bit single channel");
  Image<int> out(m.cols, m.rows, 0);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) out(x, y) = m.at<std::uint16_t>(y, x);
  return out;
}

void write_label_png(const Image<int>& labels, const fs::path& path) {
  cv::Mat m(labels.height(), labels.width(), CV_16UC1);
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x) {
      const int v = labels(x, y);
      if (v < 0 || v > 65535) throw IoError("label value out of 16-bit range");
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(v);
    }
  write_png(m, path);
}

SegmentationFrame load_segmentation(const fs::path& dir, double default_omega) {
  SegmentationFrame seg;
  seg.omega_rgb = default_omega;
  if (!fs::is_directory(dir)) return seg;

  std::ifstream in(dir / "meta");
  if (!in) throw MissingFileError("missing sidecar metadata " + (dir / "meta").string());
  nlohmann::json meta;
  try {
    in >> meta;
    seg.classes = meta.at("classes").get<std::vector<std::string>>();
    seg.omega_rgb = meta.at("omega_rgb").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "meta").string(), 1, e.what());
  }

  const Image<int> inst = read_label_png(dir / "inst.png");
  const cv::Mat soft = read_png(dir / "soft.png", cv::IMREAD_ANYDEPTH);
  if (soft.type() != CV_16UC1) throw ShapeMismatchError("soft.png: expected 16-bit single channel");
  if (soft.cols != inst.width() || soft.rows != inst.height())
    throw ShapeMismatchError("soft.png and inst.png sizes differ");
  seg.soft_prob = Image<double>(soft.cols, soft.rows, 0.0);
  for (int y = 0; y < soft.rows; ++y)
    for (int x = 0; x < soft.cols; ++x) seg.soft_prob(x, y) = soft.at<std::uint16_t>(y, x) / 65535.0;

  const auto& jmasks = meta.at("masks");
  for (std::size_t k = 0; k < jmasks.size(); ++k) {
    const auto& jm = jmasks[k];
    const int index = jm.at("index").get<int>();
    if (index != static_cast<int>(k) + 1)
      throw ParseError((dir / "meta").string(), 1, "mask indices must be 1..N in order");
    InstanceMask m;
    m.class_probs = jm.at("class_probs").get<std::vector<double>>();
    m.mask = MaskImage(inst.width(), inst.height(), 0);
    for (std::size_t i = 0; i < inst.size(); ++i) m.mask[i] = inst[i] == index ? 1 : 0;
    seg.masks.push_back(std::move(m));
  }
  for (int v : inst.pixels())
    if (v > static_cast<int>(seg.masks.size()))
      throw ShapeMismatchError("inst.png references a mask index missing from meta");
  seg.validate();
  return seg;
}

void save_segmentation(const SegmentationFrame& seg, const fs::path& dir) {
  seg.validate();
  if (!seg.has_soft_prob()) throw ShapeMismatchError("cannot serialize a frame without soft_prob");
  fs::create_directories(dir);
  Image<int> inst(seg.soft_prob.width(), seg.soft_prob.height(), 0);
  nlohmann::json meta;
  meta["classes"] = seg.classes;
  meta["omega_rgb"] = seg.omega_rgb;
  meta["masks"] = nlohmann::json::array();
  for (std::size_t k = 0; k < seg.masks.size(); ++k) {
    const auto& m = seg.masks[k];
    for (std::size_t i = 0; i < m.mask.size(); ++i)
      if (m.mask[i]) inst[i] = static_cast<int>(k) + 1;
    meta["masks"].push_back({{"index", k + 1}, {"class_probs", m.class_probs}});
  }
  write_label_png(inst, dir / "inst.png");

  cv::Mat soft(seg.soft_prob.height(), seg.soft_prob.width(), CV_16UC1);
  for (int y = 0; y < soft.rows; ++y)
    for (int x = 0; x < soft.cols; ++x)
      soft.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(seg.soft_prob(x, y) * 65535.0));
  write_png(soft, dir / "soft.png");

  std::ofstream out(dir / "meta");
  if (!out) throw IoError("cannot write " + (dir / "meta").string());
  out << meta.dump(2) << '\n';
}

std::vector<InstanceMask> resolve_overlaps(std::vector<InstanceMask> masks) {
  auto peak = [](const InstanceMask& m) {
    return m.class_probs.empty() ? 0.0 : *std::max_element(m.class_probs.begin(), m.class_probs.end());
  };
  for (std::size_t i = 0; i < masks.size(); ++i)
    for (std::size_t j = i + 1; j < masks.size(); ++j) {
      // Ties keep the earlier mask.
      auto& loser = peak(masks[j]) > peak(masks[i]) ? masks[i] : masks[j];
      const auto& winner = &loser == &masks[i] ? masks[j] : masks[i];
      for (std::size_t k = 0; k < loser.mask.size(); ++k)
        if (loser.mask[k] && winner.mask[k]) loser.mask[k] = 0;
    }
  std::erase_if(masks, [](const InstanceMask& m) { return m.area() == 0; });
  return masks;
}

std::string format_trajectory_line(const TimedPose& tp) {
  const auto q = tp.pose.quaternion();
  const Vec3& t = tp.pose.translation();
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f", tp.timestamp, t.x(), t.y(),
                t.z(), q.x(), q.y(), q.z(), q.w());
  return buf;
}

Trajectory read_trajectory(const fs::path& path) { return parse_trajectory(path); }

void write_trajectory(const Trajectory& traj, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& tp : traj) out << format_trajectory_line(tp) << '\n';
}

}  // namespace semfusion
