#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "bevreproj/common.hpp"

namespace bevreproj {

// Vehicle frame: x forward, y left, z up; the ground plane is z = 0.
// BEV grids index rows along x and columns along y; cell (i, j) is centered
// at (x_min + (i+0.5)*dx, y_min + (j+0.5)*dy).
struct GroundExtent {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  int rows = 0, cols = 0;

  static GroundExtent create(double x_min, double x_max, double y_min,
                             double y_max, int rows, int cols);

  double cell_dx() const { return (x_max - x_min) / rows; }
  double cell_dy() const { return (y_max - y_min) / cols; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  double cell_center_x(int i) const { return x_min + (i + 0.5) * cell_dx(); }
  double cell_center_y(int j) const { return y_min + (j + 0.5) * cell_dy(); }

  bool operator==(const GroundExtent&) const = default;
};

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  static CameraIntrinsics create(double fx, double fy, double cx, double cy,
                                 int width, int height);
};

// rotation maps camera-frame vectors into the vehicle frame; translation is
// the camera origin in the vehicle frame. Camera frame is the usual optical
// convention: +z along the view direction, +x right in the image, +y down.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static CameraPose create(const Eigen::Matrix3d& rotation,
                           const Eigen::Vector3d& translation);
  // Level mount with yaw about +z (0 = facing +x) and pitch > 0 tilting the
  // view downward; roll is always zero.
  static CameraPose from_yaw_pitch(double yaw, double pitch,
                                   const Eigen::Vector3d& position);
};

struct Camera {
  std::string name;
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

struct CameraRig {
  std::vector<Camera> cameras;
};

// Planar ego displacement between consecutive frames: (dx, dy) is the ego
// translation expressed in the earlier frame's axes, dphi the heading change.
struct EgoMotion2D {
  double dx = 0, dy = 0, dphi = 0;
};

struct GroundHit {
  double x = 0, y = 0;
};

struct GridCoord {
  double r = 0, s = 0;
};

struct PixelProjection {
  double u = 0, v = 0, depth = 0;
};

// Back-projects the pixel ray and intersects it with z = 0. Empty when the
// ray is parallel to or above the horizon or the hit lies behind the camera.
std::optional<GroundHit> pixel_ray_ground_intersection(
    double u, double v, const CameraIntrinsics& intrinsics,
    const CameraPose& pose);

// Metric ground point to continuous grid coordinates; empty outside the
// extent. Bounds are inclusive on both ends.
std::optional<GridCoord> ground_to_grid(double x, double y,
                                        const GroundExtent& extent);

// Pinhole projection of a vehicle-frame point; depth is the camera-frame z.
// Empty when depth <= 0.
std::optional<PixelProjection> project_vehicle_point(
    const Eigen::Vector3d& point, const CameraIntrinsics& intrinsics,
    const CameraPose& pose);

// Six-camera surround rig used by the default configs: front/back pairs plus
// four corner cameras, level mount at 1.5 m, ~64 deg horizontal FOV.
CameraRig default_surround_rig(int image_width, int image_height);

}  // namespace bevreproj
