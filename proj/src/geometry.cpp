#include "bevreproj/geometry.hpp"

#include <cmath>
#include <sstream>

namespace bevreproj {

GroundExtent GroundExtent::create(double x_min, double x_max, double y_min,
                                  double y_max, int rows, int cols) {
  if (!(x_min < x_max) || !(y_min < y_max))
    throw InvalidSpecError("ground extent ranges must be nonempty");
  if (rows < 2 || cols < 2)
    throw InvalidSpecError("ground extent needs at least 2x2 cells");
  GroundExtent e{x_min, x_max, y_min, y_max, rows, cols};
  if (!(e.cell_dx() > 0) || !(e.cell_dy() > 0))
    throw InvalidSpecError("ground extent cell size must be positive");
  return e;
}

CameraIntrinsics CameraIntrinsics::create(double fx, double fy, double cx,
                                          double cy, int width, int height) {
  if (!(fx > 0) || !(fy > 0))
    throw InvalidSpecError("focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw InvalidSpecError("image dimensions must be positive");
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
    throw InvalidSpecError("principal point must lie inside the image");
  return CameraIntrinsics{fx, fy, cx, cy, width, height};
}

CameraPose CameraPose::create(const Eigen::Matrix3d& rotation,
                              const Eigen::Vector3d& translation) {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  const double ortho_err =
      (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-9) {
    std::ostringstream msg;
    msg << "camera rotation is not orthonormal (max error " << ortho_err << ")";
    throw InvalidSpecError(msg.str());
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw InvalidSpecError("camera rotation must be proper (det = +1)");
  if (!(translation.z() > 0))
    throw InvalidSpecError("camera height above ground must be positive");
  return CameraPose{rotation, translation};
}

CameraPose CameraPose::from_yaw_pitch(double yaw, double pitch,
                                      const Eigen::Vector3d& position) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const Eigen::Vector3d view(cp * cy, cp * sy, -sp);
  const Eigen::Vector3d right(sy, -cy, 0.0);
  const Eigen::Vector3d down = view.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = view;
  return CameraPose::create(r, position);
}

std::optional<GroundHit> pixel_ray_ground_intersection(
    double u, double v, const CameraIntrinsics& intrinsics,
    const CameraPose& pose) {
  const Eigen::Vector3d dir_cam((u - intrinsics.cx) / intrinsics.fx,
                                (v - intrinsics.cy) / intrinsics.fy, 1.0);
  const Eigen::Vector3d dir = pose.rotation * dir_cam;
  if (!(dir.z() < 0.0)) return std::nullopt;
  const double t = -pose.translation.z() / dir.z();
  if (!(t > 0.0)) return std::nullopt;
  return GroundHit{pose.translation.x() + t * dir.x(),
                   pose.translation.y() + t * dir.y()};
}

std::optional<GridCoord> ground_to_grid(double x, double y,
                                        const GroundExtent& extent) {
  if (x < extent.x_min || x > extent.x_max || y < extent.y_min ||
      y > extent.y_max)
    return std::nullopt;
  return GridCoord{(x - extent.x_min) / extent.cell_dx() - 0.5,
                   (y - extent.y_min) / extent.cell_dy() - 0.5};
}

std::optional<PixelProjection> project_vehicle_point(
    const Eigen::Vector3d& point, const CameraIntrinsics& intrinsics,
    const CameraPose& pose) {
  const Eigen::Vector3d p_cam =
      pose.rotation.transpose() * (point - pose.translation);
  if (!(p_cam.z() > 0.0)) return std::nullopt;
  return PixelProjection{
      intrinsics.fx * p_cam.x() / p_cam.z() + intrinsics.cx,
      intrinsics.fy * p_cam.y() / p_cam.z() + intrinsics.cy, p_cam.z()};
}

CameraRig default_surround_rig(int image_width, int image_height) {
  const double fx = 0.8 * image_width;
  const auto intr = CameraIntrinsics::create(
      fx, fx, 0.5 * image_width, 0.5 * image_height, image_width, image_height);
  const double h = 1.5;
  const double deg = M_PI / 180.0;
  CameraRig rig;
  auto add = [&](const std::string& name, double yaw_deg, double x, double y) {
    rig.cameras.push_back(
        {name, intr,
         CameraPose::from_yaw_pitch(yaw_deg * deg, 0.0, {x, y, h})});
  };
  add("front", 0.0, 0.4, 0.0);
  add("front_left", 55.0, 0.3, 0.4);
  add("front_right", -55.0, 0.3, -0.4);
  add("back", 180.0, -0.4, 0.0);
  add("back_left", 125.0, -0.3, 0.4);
  add("back_right", -125.0, -0.3, -0.4);
  return rig;
}

}  // namespace bevreproj
