#include <doctest.h>

#include "bevreproj/geometry.hpp"
#include "oracles.hpp"

using namespace bevreproj;

namespace {

CameraIntrinsics test_intrinsics(double f = 400, int w = 512, int h = 288) {
  return CameraIntrinsics::create(f, f, 0.5 * w, 0.5 * h, w, h);
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("nadir principal ray hits below the camera") {
  const auto intr = test_intrinsics();
  const auto pose =
      CameraPose::from_yaw_pitch(0.0, M_PI / 2.0, {3.0, -1.5, 2.0});
  const auto hit =
      pixel_ray_ground_intersection(intr.cx, intr.cy, intr, pose);
  REQUIRE(hit.has_value());
  CHECK(hit->x == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(hit->y == doctest::Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("rays at or above the horizon are invalid") {
  const auto intr = test_intrinsics();
  const auto pose = CameraPose::from_yaw_pitch(0.0, 0.0, {0.0, 0.0, 1.5});
  // Level camera: the principal ray is parallel to the ground.
  CHECK_FALSE(pixel_ray_ground_intersection(intr.cx, intr.cy, intr, pose));
  // Sky pixel (above the principal point).
  CHECK_FALSE(pixel_ray_ground_intersection(intr.cx, 10.0, intr, pose));
  // Just below the horizon is valid.
  CHECK(pixel_ray_ground_intersection(intr.cx, intr.cy + 1.0, intr, pose));
}

TEST_CASE("similar-triangles ground distance for a forward camera") {
  const auto intr = test_intrinsics(400, 512, 288);
  const auto pose = CameraPose::from_yaw_pitch(0.0, 0.0, {0.0, 0.0, 1.5});
  const auto hit =
      pixel_ray_ground_intersection(intr.cx, intr.cy + 10.0, intr, pose);
  REQUIRE(hit.has_value());
  CHECK(hit->x == doctest::Approx(1.5 * 400.0 / 10.0).epsilon(1e-12));
  CHECK(hit->y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ground_to_grid places cell centers and rejects outside points") {
  const auto extent = GroundExtent::create(-15, 15, -30, 30, 150, 150);
  CHECK(extent.cell_dx() == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(extent.cell_dy() == doctest::Approx(0.4).epsilon(1e-14));

  const auto first = ground_to_grid(extent.x_min + 0.5 * extent.cell_dx(),
                                    extent.y_min + 0.5 * extent.cell_dy(),
                                    extent);
  REQUIRE(first.has_value());
  CHECK(first->r == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(first->s == doctest::Approx(0.0).epsilon(1e-9));

  CHECK_FALSE(ground_to_grid(extent.x_max + 1e-9, 0.0, extent));
  CHECK(ground_to_grid(extent.x_max, 0.0, extent));
}

TEST_CASE("projection of on-axis points and the matrix oracle") {
  const auto intr = test_intrinsics();
  const auto pose = CameraPose::from_yaw_pitch(0.3, 0.2, {1.0, 2.0, 1.7});
  // Point on the optical axis at depth d.
  const double d = 7.0;
  const Eigen::Vector3d axis_point =
      pose.translation + d * pose.rotation.col(2);
  const auto proj = project_vehicle_point(axis_point, intr, pose);
  REQUIRE(proj.has_value());
  CHECK(proj->u == doctest::Approx(intr.cx).epsilon(1e-10));
  CHECK(proj->v == doctest::Approx(intr.cy).epsilon(1e-10));
  CHECK(proj->depth == doctest::Approx(d).epsilon(1e-10));

  Rng rng(7);
  for (int k = 0; k < 2000; ++k) {
    const Eigen::Vector3d p(rng.uniform(-40, 40), rng.uniform(-40, 40),
                            rng.uniform(-2, 5));
    const auto got = project_vehicle_point(p, intr, pose);
    const auto want = oracles::project_matrix(p, intr, pose);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(std::abs(got->u - want->u) <= 1e-9);
      CHECK(std::abs(got->v - want->v) <= 1e-9);
      CHECK(std::abs(got->depth - want->depth) <= 1e-9);
    }
  }
}

TEST_CASE("project after intersect is the identity on valid pixels") {
  Rng rng(11);
  int checked = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto intr = test_intrinsics(rng.uniform(200, 600), 512, 288);
    const auto pose = CameraPose::from_yaw_pitch(
        rng.uniform(-M_PI, M_PI), rng.uniform(0.0, 0.5),
        {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1.0, 2.5)});
    const double u = rng.uniform(0, intr.width);
    const double v = rng.uniform(0, intr.height);
    const auto hit = pixel_ray_ground_intersection(u, v, intr, pose);
    if (!hit) continue;
    const auto back =
        project_vehicle_point({hit->x, hit->y, 0.0}, intr, pose);
    REQUIRE(back.has_value());
    CHECK(std::abs(back->u - u) <= 1e-6);
    CHECK(std::abs(back->v - v) <= 1e-6);
    ++checked;
  }
  CHECK(checked > 2000);
}

TEST_CASE("ground distance grows toward the horizon for a tilted camera") {
  const auto intr = test_intrinsics();
  const auto pose = CameraPose::from_yaw_pitch(0.0, 0.15, {0.0, 0.0, 1.6});
  double prev = -1.0;
  bool any = false;
  // March upward from the bottom row; distance must strictly increase.
  for (int v = intr.height - 1; v >= 0; --v) {
    const auto hit =
        pixel_ray_ground_intersection(intr.cx, v + 0.5, intr, pose);
    if (!hit) break;
    const double dist = std::hypot(hit->x, hit->y);
    if (any) CHECK(dist > prev);
    prev = dist;
    any = true;
  }
  CHECK(any);
}

TEST_CASE("pose validation rejects broken rotations and underground cameras") {
  Eigen::Matrix3d skewed = Eigen::Matrix3d::Identity();
  skewed(0, 1) = 1e-6;
  CHECK_THROWS_AS(CameraPose::create(skewed, {0, 0, 1.5}), InvalidSpecError);

  Eigen::Matrix3d reflection = Eigen::Matrix3d::Identity();
  reflection(2, 2) = -1.0;
  CHECK_THROWS_AS(CameraPose::create(reflection, {0, 0, 1.5}),
                  InvalidSpecError);

  CHECK_THROWS_AS(
      CameraPose::create(Eigen::Matrix3d::Identity(), {0, 0, -0.1}),
      InvalidSpecError);
}

TEST_CASE("extent and intrinsics validation") {
  CHECK_THROWS_AS(GroundExtent::create(1, 1, -5, 5, 10, 10), InvalidSpecError);
  CHECK_THROWS_AS(GroundExtent::create(-5, 5, -5, 5, 1, 10), InvalidSpecError);
  CHECK_THROWS_AS(CameraIntrinsics::create(-1, 400, 10, 10, 64, 64),
                  InvalidSpecError);
  CHECK_THROWS_AS(CameraIntrinsics::create(400, 400, 64, 10, 64, 64),
                  InvalidSpecError);
}

}  // TEST_SUITE
