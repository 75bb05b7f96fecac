// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "dynlabel/errors.hpp"
#include "dynlabel/ground_segmentation.hpp"
#include "dynlabel/simulator.hpp"
#include "test_support.hpp"

namespace dynlabel {
namespace {

OrganizedScan column(std::initializer_list<Vec3> pts) {
  std::vector<PointRecord> recs;
  for (const Vec3& p : pts) {
    PointRecord r;
    r.x = static_cast<float>(p.x());
    r.y = static_cast<float>(p.y());
    r.z = static_cast<float>(p.z());
    r.range = static_cast<float>(p.norm());
    r.valid = true;
    recs.push_back(r);
  }
  const auto rows = static_cast<std::uint32_t>(recs.size());
  return OrganizedScan(rows, 1, 0.0, std::move(recs));
}

// Sensor at the origin looking at a floor at z = -1 inside four walls.
SceneSpec room(bool floor, bool ceiling) {
  SceneSpec s;
  s.name = "room";
  s.duration = 0.1;
  s.seed = 9;
  if (floor) {
    s.planes.push_back({Vec3::UnitZ(), -1.0, 0.3F});
  }
  if (ceiling) {
    s.planes.push_back({Vec3::UnitZ(), 2.0, 0.3F});
  }
  s.boxes.push_back({{9.0, -10.0, -1.0}, {10.0, 10.0, 2.0}, 0.5F});
  s.boxes.push_back({{-10.0, -10.0, -1.0}, {-9.0, 10.0, 2.0}, 0.5F});
  s.boxes.push_back({{-9.0, 9.0, -1.0}, {9.0, 10.0, 2.0}, 0.5F});
  s.boxes.push_back({{-9.0, -10.0, -1.0}, {9.0, -9.0, 2.0}, 0.5F});
  s.sensor.rows = 64;
  s.sensor.cols = 1024;
  s.sensor.path = Path({{Vec3::Zero(), 0.0, 0.0}}, false);
  return s;
}

TEST(ElevationAngles, FlatSlopedAndVertical) {
  const auto flat = compute_elevation_angles(column({{2, 0, -1}, {3, 0, -1}}));
  EXPECT_NEAR(flat[0], 0.0, 1e-5);
  const auto slope = compute_elevation_angles(column({{2, 0, -1}, {3, 0, 0}}));
  EXPECT_NEAR(slope[0], 45.0, 1e-4);
  const auto wall = compute_elevation_angles(column({{5, 0, -1}, {5, 0, 0}}));
  EXPECT_NEAR(wall[0], 90.0, 1e-5);
  // The last row pairs with the row above.
  EXPECT_NEAR(slope[1], 45.0, 1e-4);
}

TEST(ElevationAngles, NoValidVerticalNeighborIs90) {
  std::vector<PointRecord> recs(2);
  recs[0].x = 3.0F;
  recs[0].range = 3.0F;
  recs[0].valid = true;
  const auto a = compute_elevation_angles(OrganizedScan(2, 1, 0.0, recs));
  EXPECT_EQ(a[0], 90.0F);
  EXPECT_EQ(a[1], 90.0F);
}

TEST(FitSupportPlanes, FloorWithWalls) {
  const RenderedScan r = render_scan(room(true, false), 0.0);
  const auto planes = fit_support_planes(r.scan, compute_elevation_angles(r.scan),
                                         Vec3::Zero(), GroundParams{}, 1);
  ASSERT_EQ(planes.size(), 1U);
  EXPECT_FALSE(planes[0].ceiling);
  EXPECT_NEAR(planes[0].normal.norm(), 1.0, 1e-9);
  EXPECT_GT(planes[0].normal.z(), 0.9999);
  EXPECT_NEAR(planes[0].offset, -1.0, 0.02);
}

TEST(FitSupportPlanes, FloorAndCeiling) {
  const RenderedScan r = render_scan(room(true, true), 0.0);
  const auto planes = fit_support_planes(r.scan, compute_elevation_angles(r.scan),
                                         Vec3::Zero(), GroundParams{}, 1);
  ASSERT_EQ(planes.size(), 2U);
  EXPECT_NEAR(planes[0].offset, -1.0, 0.05);
  EXPECT_TRUE(planes[1].ceiling);
  EXPECT_NEAR(planes[1].offset, 2.0, 0.05);
  EXPECT_GE(planes[1].inliers.size(), GroundParams{}.min_ceiling_inliers);
}

TEST(FitSupportPlanes, OnlyWallsThrowsNoPlane) {
  const RenderedScan r = render_scan(room(false, false), 0.0);
  try {
    fit_support_planes(r.scan, compute_elevation_angles(r.scan), Vec3::Zero(), GroundParams{},
                       1);
    FAIL() << "expected NoPlane";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPlane);
  }
  const GroundMask mask = segment_ground(r.scan, Vec3::Zero(), GroundParams{}, 1);
  EXPECT_EQ(std::count(mask.begin(), mask.end(), 1), 0);
}

TEST(FitSupportPlanes, AngleArraySizeMismatchThrows) {
  const OrganizedScan s = column({{2, 0, -1}, {3, 0, -1}});
  EXPECT_THROW(fit_support_planes(s, {0.0F}, Vec3::Zero(), GroundParams{}, 1), Error);
}

TEST(GrowGroundMask, EmptyPlaneListGivesEmptyMask) {
  const RenderedScan r = render_scan(room(true, false), 0.0);
  const GroundMask mask = grow_ground_mask(r.scan, {}, GroundParams{});
  EXPECT_EQ(mask.size(), r.scan.size());
  EXPECT_EQ(std::count(mask.begin(), mask.end(), 1), 0);
}

TEST(SegmentGround, FlagsAlmostAllFloorPoints) {
  const SceneSpec scene = testing::floor_boxes_scene(64, 1024);
  const RenderedScan r = render_scan(scene, 0.0);
  const Vec3 origin(0.0, 0.0, 1.5);
  const OrganizedScan world = undistort(r.scan, sensor_trajectory(scene));
  std::vector<SupportPlane> planes;
  const GroundMask mask = segment_ground(world, origin, GroundParams{}, 3, &planes);
  std::size_t floor = 0;
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < world.size(); ++i) {
    if (world[i].valid && std::abs(world[i].z) < 1e-3) {
      ++floor;
      flagged += mask[i];
    }
  }
  ASSERT_GT(floor, 10000U);
  EXPECT_GE(static_cast<double>(flagged) / static_cast<double>(floor), 0.99);

  for (const auto& p : planes) {
    for (const std::size_t i : p.inliers) {
      ASSERT_EQ(mask[i], 1) << "inlier not in mask";
    }
  }
  for (std::size_t i = 0; i < world.size(); ++i) {
    if (!world[i].valid) {
      ASSERT_EQ(mask[i], 0) << "invalid pixel flagged";
      continue;
    }
    if (mask[i] == 0) {
      continue;
    }
    double nearest = 1e9;
    for (const auto& p : planes) {
      nearest = std::min(nearest, p.distance(world[i].position()));
    }
    ASSERT_LE(nearest, 0.5);
  }
}

TEST(SegmentGround, StandingPedestrianTorsoIsNotFlagged) {
  SceneSpec scene = room(true, false);
  Mover walker;
  walker.name = "walker";
  walker.shape = MoverShape::kBiped;
  walker.size = Vec3(0.25, 1.75, 0.0);
  walker.path = Path({{Vec3(4.0, 1.0, -1.0), 0.0, 0.0}}, false);
  scene.movers.push_back(walker);
  const RenderedScan r = render_scan(scene, 0.0);
  const GroundMask mask = segment_ground(r.scan, Vec3::Zero(), GroundParams{}, 1);
  std::size_t torso = 0;
  for (std::size_t i = 0; i < r.scan.size(); ++i) {
    if (r.truth.instance[i] == 1 && r.scan[i].z > -0.5) {
      ++torso;
      EXPECT_EQ(mask[i], 0) << "torso pixel " << i << " z " << r.scan[i].z;
    }
  }
  EXPECT_GT(torso, 50U);
}

TEST(SegmentGround, DeterministicForFixedSeed) {
  SceneSpec scene = room(true, true);
  scene.noise_sigma = 0.03;
  const RenderedScan r = render_scan(scene, 0.0);
  const GroundMask a = segment_ground(r.scan, Vec3::Zero(), GroundParams{}, 42);
  const GroundMask b = segment_ground(r.scan, Vec3::Zero(), GroundParams{}, 42);
  EXPECT_EQ(a, b);
}

TEST(SegmentGround, OpenSceneGetsNoSpuriousCeiling) {
  const SceneSpec scene = testing::with_static_sensor(testing::floor_boxes_scene(64, 1024, 0.02),
                                                      {5.0, -3.0, 1.5});
  const RenderedScan r = render_scan(scene, 0.0);
  const OrganizedScan world = undistort(r.scan, sensor_trajectory(scene));
  std::vector<SupportPlane> planes;
  segment_ground(world, Vec3(5.0, -3.0, 1.5), GroundParams{}, 17, &planes);
  ASSERT_EQ(planes.size(), 1U);
  EXPECT_FALSE(planes[0].ceiling);
}

}  // namespace
}  // namespace dynlabel
