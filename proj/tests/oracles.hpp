#pragma once

// Independent reference implementations used by the tests. These stay
// deliberately naive and separate from the library code paths they check.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "bevreproj/grid.hpp"
#include "bevreproj/renderer.hpp"

namespace oracles {

using namespace bevreproj;

// Pinhole projection via an explicit 3x4 homogeneous matrix.
inline std::optional<PixelProjection> project_matrix(
    const Eigen::Vector3d& point, const CameraIntrinsics& intr,
    const CameraPose& pose) {
  Eigen::Matrix3d k;
  k << intr.fx, 0, intr.cx, 0, intr.fy, intr.cy, 0, 0, 1;
  Eigen::Matrix<double, 3, 4> ext;
  ext.leftCols<3>() = pose.rotation.transpose();
  ext.col(3) = -pose.rotation.transpose() * pose.translation;
  const Eigen::Vector3d h = k * (ext * point.homogeneous());
  if (!(h.z() > 0)) return std::nullopt;
  return PixelProjection{h.x() / h.z(), h.y() / h.z(), h.z()};
}

// Pixel-to-ground correspondence through the inverse plane homography.
inline std::optional<GroundHit> homography_ground(double u, double v,
                                                  const CameraIntrinsics& intr,
                                                  const CameraPose& pose) {
  Eigen::Matrix3d k;
  k << intr.fx, 0, intr.cx, 0, intr.fy, intr.cy, 0, 0, 1;
  const Eigen::Matrix3d rt = pose.rotation.transpose();
  Eigen::Matrix3d h;  // [x, y, 1] on the ground -> image homogeneous
  h.col(0) = rt.col(0);
  h.col(1) = rt.col(1);
  h.col(2) = -rt * pose.translation;
  h = k * h;
  const Eigen::Vector3d g = h.inverse() * Eigen::Vector3d(u, v, 1.0);
  if (std::abs(g.z()) < 1e-15) return std::nullopt;
  const double x = g.x() / g.z(), y = g.y() / g.z();
  // Forward-of-camera check through the depth of the recovered point.
  const Eigen::Vector3d p_cam = rt * (Eigen::Vector3d(x, y, 0) - pose.translation);
  if (!(p_cam.z() > 0)) return std::nullopt;
  return GroundHit{x, y};
}

// Zero-padded bilinear lookup over a (rows, cols, channels) field.
inline double bilinear_zero_pad(const std::vector<double>& data, int rows,
                                int cols, int channels, double r, double s,
                                int ch) {
  double acc = 0.0;
  const int i0 = static_cast<int>(std::floor(r));
  const int j0 = static_cast<int>(std::floor(s));
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const int ii = i0 + a, jj = j0 + b;
      if (ii < 0 || ii >= rows || jj < 0 || jj >= cols) continue;
      const double w = (a == 0 ? 1.0 - (r - i0) : r - i0) *
                       (b == 0 ? 1.0 - (s - j0) : s - j0);
      acc += w *
             data[(static_cast<std::size_t>(ii) * cols + jj) * channels + ch];
    }
  }
  return acc;
}

// Per-cell loop reference for the ego-motion warp.
inline BevGrid warp_loop(const BevGrid& grid, const EgoMotion2D& motion) {
  BevGrid out = BevGrid::zeros(grid.extent, grid.channels, grid.semantics);
  const auto& e = grid.extent;
  const double cx = 0.5 * (e.x_min + e.x_max);
  const double cy = 0.5 * (e.y_min + e.y_max);
  const double ca = std::cos(-motion.dphi), sa = std::sin(-motion.dphi);
  for (int i = 0; i < e.rows; ++i) {
    for (int j = 0; j < e.cols; ++j) {
      const double px = e.x_min + (i + 0.5) * e.cell_dx() - cx - motion.dx;
      const double py = e.y_min + (j + 0.5) * e.cell_dy() - cy - motion.dy;
      const double qx = ca * px - sa * py + cx;
      const double qy = sa * px + ca * py + cy;
      const double r = (qx - e.x_min) / e.cell_dx() - 0.5;
      const double s = (qy - e.y_min) / e.cell_dy() - 0.5;
      for (int ch = 0; ch < grid.channels; ++ch)
        out.at(i, j, ch) = bilinear_zero_pad(grid.data, e.rows, e.cols,
                                             grid.channels, r, s, ch);
    }
  }
  return out;
}

// Per-pixel loop reference for the renderer.
inline CameraImageStack render_loop(const BevGrid& bev,
                                    const SamplingMap& map) {
  CameraImageStack out = CameraImageStack::zeros(
      map.n_cameras, map.height, map.width, bev.channels, bev.semantics);
  for (int cam = 0; cam < map.n_cameras; ++cam) {
    for (int v = 0; v < map.height; ++v) {
      for (int u = 0; u < map.width; ++u) {
        const auto& smp = map.at(cam, v, u);
        if (!smp.valid) continue;
        out.valid[out.pixel_index(cam, v, u)] = 1;
        for (int ch = 0; ch < bev.channels; ++ch)
          out.at(cam, v, u, ch) =
              bilinear_zero_pad(bev.data, bev.extent.rows, bev.extent.cols,
                                bev.channels, smp.r, smp.s, ch);
      }
    }
  }
  return out;
}

// Extended-precision cross-entropy reference.
struct CeOracle {
  long double value = 0;
  std::vector<double> grad;
};

inline CeOracle ce_loop(const std::vector<double>& pred,
                        const std::vector<double>& gt,
                        const std::vector<std::uint8_t>& select,
                        std::size_t n_items, int channels) {
  long n_eff = 0;
  for (std::size_t i = 0; i < n_items; ++i)
    if (select.empty() || select[i]) ++n_eff;
  CeOracle out;
  out.grad.assign(pred.size(), 0.0);
  for (std::size_t item = 0; item < n_items; ++item) {
    if (!select.empty() && !select[item]) continue;
    const double* x = pred.data() + item * channels;
    const double* g = gt.data() + item * channels;
    long double z = 0;
    for (int c = 0; c < channels; ++c) z += expl(static_cast<long double>(x[c]));
    const long double log_z = logl(z);
    for (int c = 0; c < channels; ++c) {
      const long double log_p = static_cast<long double>(x[c]) - log_z;
      out.value -= static_cast<long double>(g[c]) * log_p;
      out.grad[item * channels + c] = static_cast<double>(
          (expl(log_p) - static_cast<long double>(g[c])) / n_eff);
    }
  }
  out.value /= n_eff;
  return out;
}

// Central finite differences of f at x (h per coordinate).
template <typename F>
std::vector<double> finite_difference(std::vector<double>& x, double h, F f) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f();
    x[i] = keep - h;
    const double fm = f();
    x[i] = keep;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_error(const std::vector<double>& a,
                            const std::vector<double>& b,
                            double floor = 1e-6) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, rel_error(a[i], b[i], floor));
  return m;
}

// Ray-box crossing via explicit face-quad intersections (independent of the
// slab test in the library).
inline bool segment_hits_box_faces(const Eigen::Vector3d& o,
                                   const Eigen::Vector3d& target,
                                   double length, double width, double height,
                                   double px, double py, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  auto to_box = [&](const Eigen::Vector3d& p) {
    const double rx = p.x() - px, ry = p.y() - py;
    return Eigen::Vector3d(c * rx + s * ry, -s * rx + c * ry, p.z());
  };
  const Eigen::Vector3d a = to_box(o);
  const Eigen::Vector3d b = to_box(target);
  const Eigen::Vector3d d = b - a;
  const double lo[3] = {-0.5 * length, -0.5 * width, 0.0};
  const double hi[3] = {0.5 * length, 0.5 * width, height};

  auto inside = [&](const Eigen::Vector3d& p) {
    return p.x() >= lo[0] && p.x() <= hi[0] && p.y() >= lo[1] &&
           p.y() <= hi[1] && p.z() >= lo[2] && p.z() <= hi[2];
  };
  if (inside(a) || inside(b)) return true;

  // Each axis-aligned face: solve for the plane crossing, check the other
  // two coordinates and the segment parameter.
  for (int axis = 0; axis < 3; ++axis) {
    for (const double plane : {lo[axis], hi[axis]}) {
      if (std::abs(d[axis]) < 1e-15) continue;
      const double t = (plane - a[axis]) / d[axis];
      if (t <= 0.0 || t >= 1.0) continue;
      const Eigen::Vector3d p = a + t * d;
      const int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
      if (p[u_axis] >= lo[u_axis] && p[u_axis] <= hi[u_axis] &&
          p[v_axis] >= lo[v_axis] && p[v_axis] <= hi[v_axis])
        return true;
    }
  }
  return false;
}

}  // namespace oracles
