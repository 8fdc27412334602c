#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "semfusion/surfel_map.hpp"
#include "semfusion/synth.hpp"
#include "test_util.hpp"

using namespace semfusion;

namespace {

Intrinsics small_K() { return synth::default_intrinsics(80, 60); }

Surfel make_surfel(const Vec3& p, double r = 0.002, int label = kBackground) {
  Surfel s;
  s.position = p;
  s.normal = Vec3(0, 0, -1);
  s.radius = r;
  s.weight = 1;
  s.label = label;
  return s;
}

synth::Scene plane_scene() {
  synth::Scene s;
  s.primitives.push_back({synth::Plane{{0, 0, 2}, {0, 0, -1}, 50}, Rgb{100, 150, 200}, 0, 0});
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(RenderModel, SingleSurfelOnAxis) {
  Intrinsics K{100, 100, 20, 20, 41, 41};
  SurfelMap map;
  map.add(make_surfel(Vec3(0, 0, 1)));
  const auto v = render_model(map, Pose(), K);
  ASSERT_TRUE(v.valid(20, 20));
  EXPECT_DOUBLE_EQ(v.depth(20, 20), 1.0);
  EXPECT_EQ(v.index(20, 20), 0);
}

TEST(RenderModel, EmptyMapAllInvalid) {
  const auto v = render_model(SurfelMap{}, Pose(), small_K());
  for (int i : v.index.pixels()) EXPECT_EQ(i, -1);
  for (double d : v.depth.pixels()) EXPECT_EQ(d, 0.0);
}

TEST(RenderModel, FrontSurfelWins) {
  Intrinsics K{100, 100, 20, 20, 41, 41};
  SurfelMap map;
  map.add(make_surfel(Vec3(0, 0, 2), 0.05));
  map.add(make_surfel(Vec3(0, 0, 1), 0.01, 7));
  const auto v = render_model(map, Pose(), K);
  EXPECT_EQ(v.index(20, 20), 1);
  EXPECT_EQ(v.instance(20, 20), 7);
  EXPECT_DOUBLE_EQ(v.depth(20, 20), 1.0);
}

TEST(RenderModel, DiskFootprintMatchesRadius) {
  Intrinsics K{100, 100, 20, 20, 41, 41};
  SurfelMap map;
  map.add(make_surfel(Vec3(0, 0, 1), 0.05));  // 5 px screen radius
  const auto v = render_model(map, Pose(), K);
  EXPECT_TRUE(v.valid(24, 20));
  EXPECT_FALSE(v.valid(26, 20));
  EXPECT_TRUE(v.valid(23, 23));
  EXPECT_FALSE(v.valid(24, 24));
}

TEST(FuseFrame, EmptyMapOneSurfelPerValidPixel) {
  const auto K = small_K();
  auto r = synth::render_frame(synth::objects_on_plane(), Pose(), K, {});
  int valid = 0;
  for (double d : r.frame.depth.pixels()) valid += d > 0;
  r.frame.depth(0, 0) = 0;
  --valid;
  SurfelMap map;
  const auto rep = fuse_frame(map, r.frame, Pose(), K, 0, &r.true_instances);
  EXPECT_EQ(static_cast<int>(map.size()), valid);
  EXPECT_EQ(static_cast<int>(rep.created), valid);
  int labelled = 0;
  for (const auto& s : map.surfels()) labelled += s.is_object();
  int truth = 0;
  for (int l : r.true_instances.pixels()) truth += l > 0;
  EXPECT_EQ(labelled, truth);
}

TEST(FuseFrame, SecondIdenticalPassAddsNoSurfels) {
  const auto K = small_K();
  const auto r = synth::render_frame(synth::textured_plane_with_spheres(), Pose(), K, {});
  SurfelMap map;
  fuse_frame(map, r.frame, Pose(), K, 0);
  const auto n = map.size();
  std::vector<double> w0;
  for (const auto& s : map.surfels()) w0.push_back(s.weight);
  const auto rep = fuse_frame(map, r.frame, Pose(), K, 1);
  EXPECT_EQ(map.size(), n);
  EXPECT_EQ(rep.created, 0u);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_GT(map.surfels()[i].weight, w0[i]);
    EXPECT_EQ(map.surfels()[i].t, 1);
    EXPECT_EQ(map.surfels()[i].t0, 0);
  }
}

TEST(FuseFrame, TwoNoisyPlaneObservationsReduceRms) {
  const auto K = small_K();
  synth::NoiseSpec noise;
  noise.sigma0 = 0.0005;
  const auto a = synth::render_frame(plane_scene(), Pose(), K, noise, 0);
  const auto b = synth::render_frame(plane_scene(), Pose(), K, noise, 1);
  auto rms = [](const DepthImage& d) {
    double s = 0;
    int n = 0;
    for (double z : d.pixels())
      if (z > 0) s += (z - 2) * (z - 2), ++n;
    return std::sqrt(s / n);
  };
  SurfelMap map;
  fuse_frame(map, a.frame, Pose(), K, 0);
  fuse_frame(map, b.frame, Pose(), K, 1);
  double s = 0;
  for (const auto& sf : map.surfels()) s += std::pow(sf.position.z() - 2, 2);
  const double fused = std::sqrt(s / map.size());
  EXPECT_LT(fused, rms(a.frame.depth));
  EXPECT_LT(fused, rms(b.frame.depth));
}

TEST(FuseFrame, RenderReproducesInputDepth) {
  // VGA; the one-pixel silhouette overhang of the disks weighs more at
  // lower resolutions
  const auto K = synth::default_intrinsics(640, 480);
  const Pose pose(Mat3::Identity(), Vec3(0.02, -0.01, 0));
  for (const auto& scene : {synth::colorless_structured(), synth::textured_plane_with_spheres(), synth::objects_on_plane()}) {
    const auto r = synth::render_frame(scene, pose, K, {});
    SurfelMap map;
    fuse_frame(map, r.frame, pose, K, 0);
    const auto v = render_model(map, pose, K);
    int valid = 0, good = 0;
    for (int y = 0; y < K.height; ++y)
      for (int x = 0; x < K.width; ++x) {
        if (r.frame.depth(x, y) <= 0) continue;
        ++valid;
        good += v.valid(x, y) && std::abs(v.depth(x, y) - r.frame.depth(x, y)) < map.params().delta_depth;
      }
    EXPECT_GE(good, 0.99 * valid);
  }
}

TEST(FuseFrame, ExistingLabelsKept) {
  const auto K = small_K();
  const auto r = synth::render_frame(plane_scene(), Pose(), K, {});
  SurfelMap map;
  fuse_frame(map, r.frame, Pose(), K, 0);
  LabelImage other(K.width, K.height, 5);
  fuse_frame(map, r.frame, Pose(), K, 1, &other);
  for (const auto& s : map.surfels()) EXPECT_EQ(s.label, kBackground);
}

TEST(IntegrateObservation, NormalsStayUnitAndPairOrderInsensitive) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  FusionParams p;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 p1(g(rng), g(rng), 2 + g(rng)), p2(g(rng), g(rng), 2 + g(rng));
    const Vec3 n1 = Vec3(g(rng), g(rng), -3).normalized(), n2 = Vec3(g(rng), g(rng), -3).normalized();
    Surfel a = make_surfel(Vec3::Zero()), b = a;
    a.weight = b.weight = 0;
    integrate_observation(a, p1, n1, Rgb(10, 20, 30), 0.01, 0, p);
    integrate_observation(a, p2, n2, Rgb(30, 40, 50), 0.01, 1, p);
    integrate_observation(b, p2, n2, Rgb(30, 40, 50), 0.01, 0, p);
    integrate_observation(b, p1, n1, Rgb(10, 20, 30), 0.01, 1, p);
    EXPECT_LT((a.position - b.position).norm(), 1e-6);
    EXPECT_LT((a.position - 0.5 * (p1 + p2)).norm(), 1e-12);
    EXPECT_NEAR(a.normal.norm(), 1.0, 1e-6);
    EXPECT_NEAR(b.normal.norm(), 1.0, 1e-6);
  }
  Surfel s = make_surfel(Vec3::Zero());
  for (int i = 0; i < 300; ++i) integrate_observation(s, Vec3::Zero(), Vec3(0, 0, -1), Rgb(1, 1, 1), 0.01, i, p);
  EXPECT_DOUBLE_EQ(s.weight, p.weight_cap);
}

TEST(SurfelRadius, ClampedFormula) {
  FusionParams p;
  EXPECT_NEAR(surfel_radius(1.0, 1.0, 500, p), std::sqrt(2.0) / 500, 1e-15);
  EXPECT_DOUBLE_EQ(surfel_radius(0.1, 1.0, 500, p), p.min_radius);
  EXPECT_DOUBLE_EQ(surfel_radius(5.0, 0.01, 500, p), p.max_radius);
}

TEST(MarkInactive, Examples) {
  SurfelMap map;
  map.add(make_surfel(Vec3(0, 0, 1)));
  map.add(make_surfel(Vec3(0, 0, 1), 0.002, 3));
  map.add(make_surfel(Vec3(0, 0, 1)));
  const int window = 200;
  for (int f = 1; f <= 10 * window; ++f) {
    map.surfels()[2].t = f;
    mark_inactive(map, f, window);
    if (f == window) EXPECT_TRUE(map.surfels()[0].active);
    if (f == window + 1) EXPECT_FALSE(map.surfels()[0].active);
  }
  EXPECT_FALSE(map.surfels()[0].active);
  EXPECT_TRUE(map.surfels()[1].active);
  EXPECT_TRUE(map.surfels()[2].active);
}

TEST(Ply, EmptyAndSingle) {
  testutil::TempDir dir("ply");
  export_ply(SurfelMap{}, dir.path() / "empty.ply");
  EXPECT_TRUE(load_ply(dir.path() / "empty.ply").empty());

  SurfelMap map;
  Surfel s = make_surfel(Vec3(0.125, -0.5, 1.75), 0.0035, 4);
  s.normal = Vec3(0.6, 0, -0.8);
  s.color = Rgb(1, 2, 3);
  map.add(s);
  export_ply(map, dir.path() / "one.ply");
  const auto r = load_ply(dir.path() / "one.ply");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_LT((r[0].position - s.position).norm(), 1e-9);
  EXPECT_LT((r[0].normal - s.normal).norm(), 1e-9);
  EXPECT_EQ(r[0].color, s.color);
  EXPECT_NEAR(r[0].radius, s.radius, 1e-12);
  EXPECT_EQ(r[0].label, 4);
}

TEST(Ply, ExportReloadExportByteIdentical) {
  testutil::TempDir dir("ply_rt");
  const auto K = small_K();
  const auto r = synth::render_frame(synth::objects_on_plane(), Pose(), K, synth::NoiseSpec::structured_light());
  SurfelMap map;
  fuse_frame(map, r.frame, Pose(), K, 0, &r.true_instances);
  export_ply(map, dir.path() / "a.ply");
  export_ply(load_ply(dir.path() / "a.ply"), dir.path() / "b.ply");
  EXPECT_EQ(slurp(dir.path() / "a.ply"), slurp(dir.path() / "b.ply"));
}
