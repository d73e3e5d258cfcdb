#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "relloc/metrics.hpp"

using namespace relloc;

namespace {

ErrorSample sample_at(double dist, double geom, double dpe) {
  ErrorSample s;
  s.true_dist = dist;
  s.geom_3d = geom;
  s.dpe = dpe;
  return s;
}

}  // namespace

TEST(Metrics_Geometric, EqualStatesHaveNoError) {
  const RelState s(Vec3(1.0, -2.0, 3.0), 0.4);
  const ErrorComponents e = geometric_error_3d(s, s);
  EXPECT_EQ(e.geom_3d, 0.0);
  EXPECT_EQ(e.eps_xy, 0.0);
  EXPECT_EQ(e.eps_z, 0.0);
}

TEST(Metrics_Geometric, HorizontalAndVerticalOffsets) {
  const RelState truth(Vec3(1.0, 1.0, 1.0), 0.0);
  ErrorComponents e = geometric_error_3d(RelState(Vec3(4.0, 5.0, 1.0), 0.0), truth);
  EXPECT_DOUBLE_EQ(e.geom_3d, 5.0);
  EXPECT_DOUBLE_EQ(e.eps_xy, 5.0);
  EXPECT_DOUBLE_EQ(e.eps_z, 0.0);
  e = geometric_error_3d(RelState(Vec3(1.0, 1.0, 3.0), 0.0), truth);
  EXPECT_DOUBLE_EQ(e.geom_3d, 2.0);
  EXPECT_DOUBLE_EQ(e.eps_xy, 0.0);
  EXPECT_DOUBLE_EQ(e.eps_z, 2.0);
}

TEST(Metrics_Geometric, DecompositionIdentityHolds) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 truth(n(rng), n(rng), n(rng));
    const Vec3 est(n(rng), n(rng), n(rng));
    for (const ErrorComponents& e :
         {geometric_error_3d(RelState(est, 0.0), RelState(truth, 0.0)), line_of_sight_error(est, truth)}) {
      EXPECT_NEAR(e.geom_3d * e.geom_3d, e.eps_xy * e.eps_xy + e.eps_z * e.eps_z, 1e-9);
      EXPECT_NEAR(e.geom_3d, (est - truth).norm(), 1e-9);
    }
  }
}

TEST(Metrics_LineOfSight, DepthErrorIsSigned) {
  ErrorComponents e = line_of_sight_error(Vec3(0.0, 0.0, 6.0), Vec3(0.0, 0.0, 5.0));
  EXPECT_NEAR(e.eps_z, 1.0, 1e-12);
  EXPECT_NEAR(e.eps_xy, 0.0, 1e-12);
  e = line_of_sight_error(Vec3(3.0, 0.0, 4.0) * 0.8, Vec3(3.0, 0.0, 4.0));
  EXPECT_NEAR(e.eps_z, -1.0, 1e-12);
  EXPECT_NEAR(e.eps_xy, 0.0, 1e-12);
  // Moving across the view direction is purely lateral.
  e = line_of_sight_error(Vec3(3.0, 0.0, 4.0) + Vec3(0.8, 0.0, -0.6), Vec3(3.0, 0.0, 4.0));
  EXPECT_NEAR(e.eps_xy, 1.0, 1e-12);
  EXPECT_NEAR(e.eps_z, 0.0, 1e-12);
  // Looking straight up still yields a valid split.
  e = line_of_sight_error(Vec3(0.5, 2.0, 0.0), Vec3(0.0, 2.0, 0.0));
  EXPECT_NEAR(e.eps_xy, 0.5, 1e-12);
  EXPECT_NEAR(e.eps_z, 0.0, 1e-12);
}

TEST(Metrics_Dpe, ZeroErrorIsZero) {
  EXPECT_EQ(display_proportional_error(0.0, 0.0, 3.0, CameraIntrinsics{}), 0.0);
}

TEST(Metrics_Dpe, DirectPlugIn) {
  CameraIntrinsics unit;
  unit.f_x = 1000.0;
  unit.h_x = 1000.0;
  EXPECT_DOUBLE_EQ(display_proportional_error(1.0, 0.0, 10.0, unit), 0.1);
  const CameraIntrinsics tablet;
  EXPECT_DOUBLE_EQ(tablet.f_x, 1440.0);
  EXPECT_DOUBLE_EQ(tablet.h_x, 1920.0);
  EXPECT_DOUBLE_EQ(display_proportional_error(0.5, 0.0, 1.5, tablet), 0.25);
  // Depth error shrinks or grows the denominator.
  EXPECT_DOUBLE_EQ(display_proportional_error(0.5, 0.5, 1.5, tablet), 0.5 / 2.0 * 0.75);
  EXPECT_DOUBLE_EQ(display_proportional_error(0.5, -3.5, 1.5, tablet), 0.5 / 2.0 * 0.75);
}

TEST(Metrics_Dpe, DegenerateDepthThrows) {
  EXPECT_THROW(display_proportional_error(0.3, -2.0, 2.0, CameraIntrinsics{}), DegenerateDepth);
  EXPECT_THROW(display_proportional_error(0.3, -2.0 + 5e-7, 2.0, CameraIntrinsics{}), DegenerateDepth);
  EXPECT_NO_THROW(display_proportional_error(0.3, -2.0 + 1e-5, 2.0, CameraIntrinsics{}));
}

TEST(Metrics_Sample, PixelErrorIsDpeTimesWidth) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  const CameraIntrinsics k;
  for (int i = 0; i < 500; ++i) {
    const Vec3 truth(n(rng), n(rng), n(rng));
    const Vec3 est = truth + Vec3(n(rng), n(rng), n(rng)) * 0.1;
    const ErrorSample s = make_error_sample(1.5, 1, 2, est, truth, k);
    EXPECT_EQ(s.pixel_err, s.dpe * k.h_x);
    EXPECT_GE(s.dpe, 0.0);
    EXPECT_DOUBLE_EQ(s.true_dist, truth.norm());
    EXPECT_NEAR(s.geom_3d * s.geom_3d, s.eps_xy * s.eps_xy + s.eps_z * s.eps_z, 1e-9);
  }
}

TEST(Metrics_Stats, PercentileInterpolatesLinearly) {
  EXPECT_DOUBLE_EQ(percentile({4.0, 1.0, 3.0, 2.0}, 50.0), 2.5);
  EXPECT_NEAR(percentile({4.0, 1.0, 3.0, 2.0}, 90.0), 3.7, 1e-12);
  EXPECT_NEAR(percentile({4.0, 1.0, 3.0, 2.0}, 99.0), 3.97, 1e-12);
  EXPECT_NEAR(percentile({7.5, 1.0, 3.0}, 10.0), 1.4, 1e-12);
  EXPECT_DOUBLE_EQ(median({7.5, 1.0, 3.0}), 3.0);
  EXPECT_DOUBLE_EQ(percentile({2.0}, 90.0), 2.0);
  EXPECT_DOUBLE_EQ(percentile({1.0, 9.0}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({1.0, 9.0}, 100.0), 9.0);
  EXPECT_TRUE(std::isnan(percentile({}, 50.0)));
}

TEST(Metrics_Stats, PercentilesAreMonotone) {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(777);
  for (double& x : v) x = d(rng);
  EXPECT_LE(percentile(v, 50.0), percentile(v, 90.0));
  EXPECT_LE(percentile(v, 90.0), percentile(v, 99.0));
}

TEST(Metrics_Stats, SpearmanMatchesReferenceValues) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {1, 0.5, 0.2, 0.1}), -1.0);
  // Tied ranks are averaged.
  EXPECT_NEAR(spearman({1, 2, 3, 4, 5}, {5, 6, 7, 8, 7}), 0.8207826816681233, 1e-12);
  EXPECT_NEAR(spearman({3, 1, 4, 1, 5, 9, 2, 6}, {2, 7, 1, 8, 2, 8, 1, 8}), 0.19885368120992467, 1e-12);
  EXPECT_TRUE(std::isnan(spearman({1, 2, 3}, {4, 4, 4})));
  EXPECT_TRUE(std::isnan(spearman({1}, {2})));
}

TEST(Metrics_Buckets, GroupsByTrueDistance) {
  const std::vector<ErrorSample> samples = {
      sample_at(0.5, 0.1, 0.3), sample_at(1.9, 0.3, 0.1), sample_at(2.0, 0.5, 0.05),
      sample_at(27.9, 2.0, 0.01), sample_at(28.0, 9.0, 9.0), sample_at(40.0, 9.0, 9.0)};
  const auto b = bucket_by_separation(samples);
  ASSERT_EQ(b.size(), 14u);
  EXPECT_DOUBLE_EQ(b[0].lo, 0.0);
  EXPECT_DOUBLE_EQ(b[0].hi, 2.0);
  EXPECT_EQ(b[0].count, 2u);
  EXPECT_DOUBLE_EQ(b[0].median_geom, 0.2);
  EXPECT_DOUBLE_EQ(b[0].median_dpe, 0.2);
  EXPECT_EQ(b[1].count, 1u);
  EXPECT_DOUBLE_EQ(b[1].median_geom, 0.5);
  EXPECT_EQ(b[5].count, 0u);
  EXPECT_TRUE(std::isnan(b[5].median_geom));
  EXPECT_EQ(b[13].count, 1u);
  EXPECT_DOUBLE_EQ(b[13].hi, 28.0);
  std::size_t total = 0;
  for (const auto& x : b) total += x.count;
  EXPECT_EQ(total, 4u);
}

TEST(Metrics_Buckets, UnevenWidthClipsLastBin) {
  const auto b = bucket_by_separation({sample_at(9.5, 1.0, 0.1)}, 3.0, 10.0);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_DOUBLE_EQ(b[3].lo, 9.0);
  EXPECT_DOUBLE_EQ(b[3].hi, 10.0);
  EXPECT_EQ(b[3].count, 1u);
  EXPECT_TRUE(bucket_by_separation({}, 0.0, 10.0).empty());
}
