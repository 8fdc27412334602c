#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "json.hpp"
#include "semfusion/dataset.hpp"
#include "semfusion/errors.hpp"
#include "test_util.hpp"

using namespace semfusion;
namespace fs = std::filesystem;

namespace {

void write_list(const fs::path& file, const std::string& dir, const std::vector<double>& stamps) {
  std::ofstream out(file);
  out << "# list\n";
  char buf[64];
  for (double t : stamps) {
    std::snprintf(buf, sizeof buf, "%.6f", t);
    out << buf << ' ' << dir << '/' << buf << ".png\n";
  }
}

void write_images(const fs::path& root, const std::string& dir, const std::vector<double>& stamps, bool depth) {
  fs::create_directories(root / dir);
  char buf[64];
  for (double t : stamps) {
    std::snprintf(buf, sizeof buf, "%.6f", t);
    if (depth)
      write_depth_png(DepthImage(4, 4, 1.0), root / dir / (std::string(buf) + ".png"));
    else
      write_color_png(ColorImage(4, 4, Rgb(10, 20, 30)), root / dir / (std::string(buf) + ".png"));
  }
}

void make_sequence(const fs::path& root, const std::vector<double>& rgb, const std::vector<double>& depth) {
  write_images(root, "rgb", rgb, false);
  write_images(root, "depth", depth, true);
  write_list(root / "rgb.txt", "rgb", rgb);
  write_list(root / "depth.txt", "depth", depth);
}

// Exhaustive partial matchings: most pairs, then smallest total gap.
struct Best {
  std::size_t count = 0;
  double cost = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  int ties = 0;
};

void enumerate(const std::vector<double>& a, const std::vector<double>& b, double gap, std::size_t i,
               std::vector<bool>& used, std::vector<std::pair<std::size_t, std::size_t>>& cur, double cost, Best& best) {
  if (i == a.size()) {
    const bool better = cur.size() > best.count || (cur.size() == best.count && cost < best.cost - 1e-12);
    const bool tie = cur.size() == best.count && std::abs(cost - best.cost) <= 1e-12;
    if (better) {
      best = {cur.size(), cost, cur, 0};
    } else if (tie) {
      ++best.ties;
    }
    return;
  }
  enumerate(a, b, gap, i + 1, used, cur, cost, best);
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (used[j] || std::abs(a[i] - b[j]) > gap) continue;
    used[j] = true;
    cur.emplace_back(i, j);
    enumerate(a, b, gap, i + 1, used, cur, cost + std::abs(a[i] - b[j]), best);
    cur.pop_back();
    used[j] = false;
  }
}

}  // namespace

TEST(AssociateTimestamps, WithinGap) {
  const auto p = associate_timestamps({1.00}, {1.01}, 0.02);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], std::make_pair(std::size_t{0}, std::size_t{0}));
}

TEST(AssociateTimestamps, BeyondGap) { EXPECT_TRUE(associate_timestamps({1.00}, {1.50}, 0.02).empty()); }

TEST(AssociateTimestamps, MatchesExhaustiveOracleOnJitteredStamps) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> jitter(-0.006, 0.006);
  std::uniform_int_distribution<int> count(1, 5);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> a, b;
    const int na = count(rng), nb = count(rng);
    for (int i = 0; i < na; ++i) a.push_back(1.0 + i / 30.0 + jitter(rng));
    for (int i = 0; i < nb; ++i) b.push_back(1.0 + i / 30.0 + jitter(rng));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    Best best;
    std::vector<bool> used(b.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> cur;
    enumerate(a, b, 0.02, 0, used, cur, 0.0, best);
    if (best.ties) continue;
    ++compared;
    EXPECT_EQ(associate_timestamps(a, b, 0.02), best.pairs) << "trial " << trial;
  }
  EXPECT_GT(compared, 250);
}

TEST(LoadSequence, PairsWithinGap) {
  testutil::TempDir dir("seq_pair");
  make_sequence(dir.path(), {1.00}, {1.01});
  const auto seq = load_sequence(dir.path(), 0.02);
  ASSERT_EQ(seq.entries.size(), 1u);
  EXPECT_DOUBLE_EQ(seq.entries[0].timestamp, 1.00);
  EXPECT_DOUBLE_EQ(seq.entries[0].depth_timestamp, 1.01);
  EXPECT_EQ(seq.entries[0].frame_id, "1.000000");
  EXPECT_FALSE(seq.ground_truth.has_value());
  const auto f = load_frame(seq.entries[0]);
  EXPECT_EQ(f.width(), 4);
  EXPECT_DOUBLE_EQ(f.depth(0, 0), 1.0);
  EXPECT_EQ(f.color(3, 3), Rgb(10, 20, 30));
}

TEST(LoadSequence, NoPairsBeyondGap) {
  testutil::TempDir dir("seq_gap");
  make_sequence(dir.path(), {1.00}, {1.50});
  EXPECT_TRUE(load_sequence(dir.path(), 0.02).entries.empty());
}

TEST(LoadSequence, MissingListThrows) {
  testutil::TempDir dir("seq_missing");
  EXPECT_THROW(load_sequence(dir.path()), MissingFileError);
}

TEST(LoadSequence, MalformedLineReportsLine) {
  testutil::TempDir dir("seq_bad");
  make_sequence(dir.path(), {1.0}, {1.0});
  std::ofstream(dir.path() / "rgb.txt") << "# header\n1.0 rgb/1.000000.png\nnot-a-line\n";
  try {
    load_sequence(dir.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(LoadSequence, AttachesGroundTruth) {
  testutil::TempDir dir("seq_gt");
  make_sequence(dir.path(), {1.0, 2.0}, {1.0, 2.0});
  Trajectory gt{{1.0, Pose()}, {2.0, Pose(Mat3::Identity(), Vec3(0.1, 0, 0))}};
  write_trajectory(gt, dir.path() / "groundtruth.txt");
  const auto seq = load_sequence(dir.path());
  ASSERT_TRUE(seq.ground_truth.has_value());
  ASSERT_EQ(seq.ground_truth->size(), 2u);
  EXPECT_NEAR((*seq.ground_truth)[1].pose.translation().x(), 0.1, 1e-9);
}

TEST(DepthPng, FiveThousandUnitsPerMetre) {
  testutil::TempDir dir("depth");
  DepthImage d(3, 2, 0.0);
  d(0, 0) = 1.0;
  d(1, 0) = 0.0002;
  d(2, 1) = 13.107;
  write_depth_png(d, dir.path() / "d.png");
  const auto r = read_depth_png(dir.path() / "d.png");
  EXPECT_DOUBLE_EQ(r(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r(1, 0), 1.0 / 5000.0);
  EXPECT_DOUBLE_EQ(r(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(r(2, 1), 65535 / 5000.0);
}

TEST(Trajectory, RoundTripAndFormat) {
  testutil::TempDir dir("traj");
  std::mt19937_64 rng(4);
  Trajectory t;
  for (int i = 0; i < 5; ++i) t.push_back({1.0 + i * 0.5, testutil::random_pose(rng, 2.0, 1.0)});
  write_trajectory(t, dir.path() / "t.txt");
  const auto r = read_trajectory(dir.path() / "t.txt");
  ASSERT_EQ(r.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_DOUBLE_EQ(r[i].timestamp, t[i].timestamp);
    EXPECT_LT((r[i].pose.matrix() - t[i].pose.matrix()).cwiseAbs().maxCoeff(), 1e-8);
  }
  const auto line = format_trajectory_line({1.5, Pose()});
  EXPECT_EQ(line, "1.500000 0.000000000 0.000000000 0.000000000 0.000000000 0.000000000 0.000000000 1.000000000");
}

TEST(Segmentation, RoundTripTwoMasks) {
  testutil::TempDir dir("seg");
  SegmentationFrame s;
  s.classes = {"background", "cup"};
  s.omega_rgb = 0.25;
  s.soft_prob = Image<double>(6, 4, 0.1);
  for (int k = 0; k < 2; ++k) {
    InstanceMask m;
    m.mask = MaskImage(6, 4, 0);
    m.class_probs = {0.9, 0.1};
    for (int y = 0; y < 2; ++y)
      for (int x = 3 * k; x < 3 * k + 2; ++x) {
        m.mask(x, y) = 1;
        s.soft_prob(x, y) = 0.8;
      }
    s.masks.push_back(m);
  }
  save_segmentation(s, dir.path() / "f");
  const auto r = load_segmentation(dir.path() / "f");
  ASSERT_EQ(r.masks.size(), 2u);
  EXPECT_EQ(r.classes, s.classes);
  EXPECT_DOUBLE_EQ(r.omega_rgb, 0.25);
  for (int k = 0; k < 2; ++k) {
    EXPECT_TRUE(r.masks[k].mask == s.masks[k].mask);
    EXPECT_EQ(r.masks[k].class_probs, (std::vector<double>{0.9, 0.1}));
  }
  EXPECT_NEAR(r.soft_prob(0, 0), 0.8, 1.0 / 65535);
  EXPECT_NEAR(r.soft_prob(5, 3), 0.1, 1.0 / 65535);
}

TEST(Segmentation, AbsentSidecarIsEmpty) {
  const auto r = load_segmentation("/nonexistent/sidecar", 0.1);
  EXPECT_TRUE(r.masks.empty());
  EXPECT_DOUBLE_EQ(r.omega_rgb, 0.1);
  EXPECT_FALSE(r.has_soft_prob());
}

TEST(Segmentation, OutOfRangeProbabilitiesRejected) {
  SegmentationFrame s;
  s.classes = {"background", "cup"};
  s.soft_prob = Image<double>(2, 2, 0.2);
  s.soft_prob(1, 1) = 1.2;
  EXPECT_THROW(s.validate(), ProbabilityRangeError);

  // a value of 1.2 written into the metadata file
  testutil::TempDir dir("seg_bad");
  SegmentationFrame ok;
  ok.classes = {"background", "cup"};
  ok.soft_prob = Image<double>(2, 2, 0.9);
  InstanceMask m;
  m.mask = MaskImage(2, 2, 1);
  m.class_probs = {0.5, 0.5};
  ok.masks.push_back(m);
  save_segmentation(ok, dir.path() / "f");
  nlohmann::json meta;
  std::ifstream(dir.path() / "f" / "meta") >> meta;
  meta["masks"][0]["class_probs"] = {1.2, -0.2};
  std::ofstream(dir.path() / "f" / "meta") << meta.dump();
  EXPECT_THROW(load_segmentation(dir.path() / "f"), ProbabilityRangeError);
}

TEST(Segmentation, OverlappingMasksRejected) {
  SegmentationFrame s;
  s.classes = {"a", "b"};
  s.soft_prob = Image<double>(2, 2, 0.9);
  InstanceMask m;
  m.mask = MaskImage(2, 2, 1);
  m.class_probs = {0.5, 0.5};
  s.masks = {m, m};
  EXPECT_THROW(s.validate(), ShapeMismatchError);
  const auto resolved = resolve_overlaps(s.masks);
  EXPECT_EQ(resolved.size(), 1u);
}
