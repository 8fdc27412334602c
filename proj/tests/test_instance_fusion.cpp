#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "semfusion/errors.hpp"
#include "semfusion/instance_fusion.hpp"
#include "semfusion/synth.hpp"
#include "test_util.hpp"

using namespace semfusion;

namespace {

Surfel disk(const Vec3& p, double r, int label) {
  Surfel s;
  s.position = p;
  s.normal = Vec3(0, 0, -1);
  s.radius = r;
  s.weight = 1;
  s.label = label;
  return s;
}

InstanceMask rect_mask(int w, int h, int x0, int y0, int x1, int y1, std::vector<double> probs = {0.5, 0.5}) {
  InstanceMask m;
  m.mask = MaskImage(w, h, 0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.mask(x, y) = 1;
  m.class_probs = std::move(probs);
  return m;
}

std::vector<double> random_distribution(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(n);
  for (auto& v : p) v = u(rng);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  return p;
}

synth::Scene sphere_on_plane() {
  synth::Scene s;
  s.primitives.push_back({synth::Plane{{0, 0, 2}, {0, 0, -1}, 50}, Rgb{120, 120, 120}, 0, 0});
  s.primitives.push_back({synth::Sphere{{0, 0, 1.2}, 0.2}, Rgb{200, 60, 60}, 1, 1});
  return s;
}

}  // namespace

TEST(PredictMasks, SingleInstanceSilhouette) {
  const auto K = synth::default_intrinsics(80, 60);
  SurfelMap map;
  for (int i = -3; i <= 3; ++i) map.add(disk(Vec3(0.02 * i, 0, 1), 0.015, 4));
  const auto v = render_model(map, Pose(), K);
  const auto masks = predict_instance_masks(v);
  ASSERT_EQ(masks.size(), 1u);
  const auto& m = masks.at(4);
  for (int y = 0; y < K.height; ++y)
    for (int x = 0; x < K.width; ++x) EXPECT_EQ(m(x, y) != 0, v.valid(x, y));
}

TEST(PredictMasks, InstanceBehindCameraEmitsNothing) {
  const auto K = synth::default_intrinsics(80, 60);
  SurfelMap map;
  map.add(disk(Vec3(0, 0, -1), 0.05, 3));
  EXPECT_TRUE(predict_instance_masks(map, Pose(), K).empty());
}

TEST(PredictMasks, OcclusionMatchesRayDiskZBuffer) {
  Intrinsics K{100, 100, 20, 20, 41, 41};
  SurfelMap map;
  // radii avoid pixel centres lying exactly on a rim
  const Surfel front = disk(Vec3(0.02, 0, 1), 0.053, 1), back = disk(Vec3(0, 0, 2), 0.147, 2);
  map.add(back);
  map.add(front);
  const auto masks = predict_instance_masks(map, Pose(), K);
  ASSERT_EQ(masks.size(), 2u);
  int contested = 0;
  for (int y = 0; y < K.height; ++y)
    for (int x = 0; x < K.width; ++x) {
      const Vec3 d((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      auto covers = [&](const Surfel& s) { return (d * s.position.z() - s.position).norm() <= s.radius; };
      const bool f = covers(front), b = covers(back);
      contested += f && b;
      const int expected = f ? 1 : (b ? 2 : 0);
      EXPECT_EQ(masks.at(1)(x, y) != 0, expected == 1) << x << ',' << y;
      EXPECT_EQ(masks.at(2)(x, y) != 0, expected == 2) << x << ',' << y;
    }
  EXPECT_GT(contested, 50);
}

TEST(AssociateMasks, OverlapFourTenthsAssociates) {
  std::map<int, MaskImage> pred;
  pred[7] = rect_mask(20, 20, 0, 0, 10, 10).mask;  // 100 px
  const std::vector<InstanceMask> masks{rect_mask(20, 20, 0, 0, 4, 10)};
  const auto a = associate_masks(masks, pred);
  EXPECT_EQ(a.instance[0], 7);
  EXPECT_DOUBLE_EQ(a.overlap[0], 0.4);
}

TEST(AssociateMasks, OverlapExactlyThreeTenthsIsNew) {
  std::map<int, MaskImage> pred;
  pred[7] = rect_mask(20, 20, 0, 0, 10, 10).mask;
  const std::vector<InstanceMask> masks{rect_mask(20, 20, 0, 0, 3, 10)};
  const auto a = associate_masks(masks, pred);
  EXPECT_EQ(a.instance[0], kNewInstance);
  EXPECT_EQ(a.overlap[0], 0.0);
}

TEST(AssociateMasks, ConflictGoesToLargerOverlap) {
  std::map<int, MaskImage> pred;
  pred[2] = rect_mask(20, 20, 0, 0, 10, 10).mask;
  const std::vector<InstanceMask> masks{rect_mask(20, 20, 0, 0, 4, 10), rect_mask(20, 20, 4, 0, 10, 10)};
  const auto a = associate_masks(masks, pred);
  EXPECT_EQ(a.instance[0], kNewInstance);
  EXPECT_EQ(a.instance[1], 2);
}

TEST(AssociateMasks, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(31);
  int exact = 0, boundary_pairs = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = oracle::random_assoc_problem(rng, trial % 5 == 0);
    const auto a = associate_masks(p.masks, p.predicted);
    const auto v = oracle::check_association(p, a.instance);
    ASSERT_TRUE(v.ok) << "trial " << trial << ": " << v.why;
    exact += v.compared_exactly;
    if (trial % 5 == 0 && !p.masks.empty()) boundary_pairs += a.instance[0] == kNewInstance || a.overlap[0] > 0.3;
  }
  EXPECT_GT(exact, 200);
  EXPECT_EQ(boundary_pairs, 100);
}

TEST(AssociateMasks, InvariantUnderMaskPermutation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = oracle::random_assoc_problem(rng, false);
    const auto a = associate_masks(p.masks, p.predicted);
    std::vector<std::size_t> perm(p.masks.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<InstanceMask> shuffled;
    for (auto k : perm) shuffled.push_back(p.masks[k]);
    const auto b = associate_masks(shuffled, p.predicted);
    for (std::size_t i = 0; i < perm.size(); ++i) ASSERT_EQ(b.instance[i], a.instance[perm[i]]) << "trial " << trial;
  }
}

TEST(ClassDistribution, TwoTermAverage) {
  ObjectInstance o;
  o.class_probs = {0.8, 0.2};
  o.obs_count = 1;
  update_class_distribution(o, {0.6, 0.4});
  EXPECT_NEAR(o.class_probs[0], 0.7, 1e-15);
  EXPECT_NEAR(o.class_probs[1], 0.3, 1e-15);
  EXPECT_EQ(o.obs_count, 2);
}

TEST(ClassDistribution, FixedPoint) {
  ObjectInstance o;
  o.class_probs = {0.25, 0.5, 0.25};
  o.obs_count = 3;
  update_class_distribution(o, {0.25, 0.5, 0.25});
  EXPECT_EQ(o.class_probs, (std::vector<double>{0.25, 0.5, 0.25}));
  EXPECT_EQ(o.obs_count, 4);
}

TEST(ClassDistribution, StreamingEqualsBatchMean) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> obs;
    for (int i = 0; i < 10; ++i) obs.push_back(random_distribution(rng, 4));
    InstanceTable table({"a", "b", "c", "d"});
    auto& o = table.create(obs[0]);
    for (int i = 1; i < 10; ++i) update_class_distribution(o, obs[i]);
    EXPECT_EQ(o.obs_count, 10);
    double sum = 0;
    for (int c = 0; c < 4; ++c) {
      double mean = 0;
      for (const auto& p : obs) mean += p[c];
      EXPECT_NEAR(o.class_probs[c], mean / 10, 1e-12);
      sum += o.class_probs[c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(ClassDistribution, AveragingNeverSaturates) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> top(0.34, 0.9);
  for (int trial = 0; trial < 100; ++trial) {
    InstanceTable table({"a", "b", "c"});
    auto next = [&] {
      const double m = top(rng);
      const double rest = 1 - m;
      std::vector<double> p{m, rest / 2, rest / 2};
      std::shuffle(p.begin(), p.end(), rng);
      return p;
    };
    auto& o = table.create(next());
    for (int i = 0; i < 50; ++i) update_class_distribution(o, next());
    EXPECT_LE(*std::max_element(o.class_probs.begin(), o.class_probs.end()), 0.9 + 1e-12);
  }
}

TEST(ClassDistribution, RejectsInvalid) {
  ObjectInstance o;
  o.class_probs = {0.5, 0.5};
  o.obs_count = 1;
  EXPECT_THROW(update_class_distribution(o, {0.7, 0.7}), InvalidDistributionError);
  EXPECT_THROW(update_class_distribution(o, {1.0}), InvalidDistributionError);
  InstanceTable t({"a", "b"});
  EXPECT_THROW(t.create({0.2, 0.2}), InvalidDistributionError);
}

TEST(Nonbackground, Examples) {
  double p = 1.0;
  int t = 1;
  update_nonbackground(p, t, 0.0);
  EXPECT_DOUBLE_EQ(p, 0.5);
  EXPECT_EQ(t, 2);

  p = 0;
  t = 0;
  for (int i = 0; i < 100; ++i) {
    update_nonbackground(p, t, 0.45);
    ASSERT_DOUBLE_EQ(p, 0.45);
  }

  p = 0;
  t = 0;
  for (double v : {0.9, 0.5, 0.1}) update_nonbackground(p, t, v);
  EXPECT_NEAR(p, 0.5, 1e-12);

  EXPECT_THROW(update_nonbackground(p, t, 1.2), ProbabilityRangeError);
  EXPECT_THROW(update_nonbackground(p, t, -0.1), ProbabilityRangeError);
}

TEST(FuseSemanticFrame, EmptySegmentationOnlyUpdatesProbabilities) {
  const auto K = synth::default_intrinsics(80, 60);
  const auto r = synth::render_frame(sphere_on_plane(), Pose(), K, {});
  SurfelMap map;
  fuse_frame(map, r.frame, Pose(), K, 0, &r.true_instances);
  InstanceTable table({"background", "object"});
  table.create({0.3, 0.7});
  SegmentationFrame seg;
  seg.classes = table.classes();
  seg.soft_prob = Image<double>(K.width, K.height, 0.7);
  const auto rep = fuse_semantic_frame(map, table, seg, Pose(), K, 0);
  EXPECT_EQ(rep.new_instances, 0u);
  ASSERT_EQ(table.size(), 1u);
  EXPECT_EQ(table.instances()[0].obs_count, 1);
  EXPECT_GT(rep.p_updates, map.size() * 9 / 10);
  int updated = 0;
  for (const auto& s : map.surfels())
    if (s.p_count) {
      ++updated;
      EXPECT_DOUBLE_EQ(s.p_object, 0.7);
    }
  EXPECT_EQ(static_cast<std::size_t>(updated), rep.p_updates);
}

TEST(FuseSemanticFrame, TwoMasksMakeTwoInstances) {
  const auto K = synth::default_intrinsics(80, 60);
  const auto r = synth::render_frame(synth::objects_on_plane(), Pose(), K, {});
  ASSERT_EQ(r.segmentation.masks.size(), 2u);
  SurfelMap map;
  fuse_frame(map, r.frame, Pose(), K, 0);
  InstanceTable table;
  const auto rep = fuse_semantic_frame(map, table, r.segmentation, Pose(), K, 0);
  EXPECT_EQ(rep.new_instances, 2u);
  ASSERT_EQ(table.size(), 2u);
  for (const auto& o : table.instances()) {
    EXPECT_EQ(o.obs_count, 1);
    EXPECT_GT(o.surfel_count, 0u);
  }
}

TEST(FuseSemanticFrame, StaticSequenceKeepsOneInstance) {
  const auto K = synth::default_intrinsics(80, 60);
  const auto r = synth::render_frame(sphere_on_plane(), Pose(), K, {});
  ASSERT_EQ(r.segmentation.masks.size(), 1u);
  SurfelMap map;
  InstanceTable table;
  for (int k = 0; k < 5; ++k) {
    fuse_frame(map, r.frame, Pose(), K, k);
    const auto rep = fuse_semantic_frame(map, table, r.segmentation, Pose(), K, k);
    EXPECT_EQ(rep.new_instances, k == 0 ? 1u : 0u);
  }
  ASSERT_EQ(table.size(), 1u);
  EXPECT_EQ(table.instances()[0].obs_count, 5);
  // the object surfels carry the label, the plane does not
  std::size_t truth = 0;
  for (int l : r.true_instances.pixels()) truth += l == 1;
  EXPECT_NEAR(static_cast<double>(table.instances()[0].surfel_count), static_cast<double>(truth), 0.05 * truth);
}

TEST(InstanceTableFile, OneRecordPerInstance) {
  testutil::TempDir dir("inst");
  InstanceTable t({"background", "cup"});
  t.create({0.2, 0.8});
  auto& b = t.create({0.9, 0.1});
  update_class_distribution(b, {0.7, 0.3});
  write_instance_table(t, dir.path() / "instances.txt");
  std::ifstream in(dir.path() / "instances.txt");
  std::string header, l1, l2, extra;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  EXPECT_EQ(header.front(), '#');
  EXPECT_EQ(l1, "1 1 cup 0.200000 0.800000");
  EXPECT_EQ(l2, "2 2 background 0.800000 0.200000");
  EXPECT_FALSE(std::getline(in, extra));
}
