#include "bevreproj/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace bevreproj {

CameraImageStack CameraImageStack::zeros(int n_cameras, int height, int width,
                                         int channels,
                                         GridSemantics semantics) {
  CameraImageStack s;
  s.n_cameras = n_cameras;
  s.height = height;
  s.width = width;
  s.channels = channels;
  s.semantics = semantics;
  s.data.assign(
      static_cast<std::size_t>(n_cameras) * height * width * channels, 0.0);
  s.valid.assign(static_cast<std::size_t>(n_cameras) * height * width, 0);
  return s;
}

SamplingMap build_sampling_map(const CameraRig& rig,
                               const GroundExtent& extent) {
  if (rig.cameras.empty()) throw InvalidSpecError("camera rig is empty");
  const int h = rig.cameras.front().intrinsics.height;
  const int w = rig.cameras.front().intrinsics.width;
  for (const auto& cam : rig.cameras)
    if (cam.intrinsics.height != h || cam.intrinsics.width != w)
      throw InvalidSpecError("all rig cameras must share the image size");

  SamplingMap map;
  map.extent = extent;
  map.n_cameras = static_cast<int>(rig.cameras.size());
  map.height = h;
  map.width = w;
  map.samples.resize(static_cast<std::size_t>(map.n_cameras) * h * w);

  for (int c = 0; c < map.n_cameras; ++c) {
    const auto& cam = rig.cameras[c];
    parallel_chunks(h, [&](int vb, int ve) {
      for (int v = vb; v < ve; ++v) {
        for (int u = 0; u < w; ++u) {
          SamplingMap::Sample out;
          const auto hit = pixel_ray_ground_intersection(
              u + 0.5, v + 0.5, cam.intrinsics, cam.pose);
          if (hit) {
            const auto gc = ground_to_grid(hit->x, hit->y, extent);
            if (gc) {
              // Clamp the half-cell rim so every valid pixel has full
              // four-tap support.
              out.r = std::clamp(gc->r, 0.0, static_cast<double>(extent.rows - 1));
              out.s = std::clamp(gc->s, 0.0, static_cast<double>(extent.cols - 1));
              out.distance = std::hypot(hit->x, hit->y);
              out.valid = true;
            }
          }
          map.samples[map.index(c, v, u)] = out;
        }
      }
    });
  }
  return map;
}

namespace {

struct Taps {
  std::size_t cell[4];
  double w[4];
  int count = 0;
};

Taps grid_taps(double r, double s, int rows, int cols) {
  Taps t;
  const double fi = std::floor(r), fj = std::floor(s);
  const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
  const double fr = r - fi, fs = s - fj;
  const double wr[2] = {1.0 - fr, fr};
  const double ws[2] = {1.0 - fs, fs};
  for (int a = 0; a < 2; ++a) {
    const int ii = i0 + a;
    if (ii < 0 || ii >= rows || wr[a] == 0.0) continue;
    for (int b = 0; b < 2; ++b) {
      const int jj = j0 + b;
      if (jj < 0 || jj >= cols || ws[b] == 0.0) continue;
      t.cell[t.count] = static_cast<std::size_t>(ii) * cols + jj;
      t.w[t.count] = wr[a] * ws[b];
      ++t.count;
    }
  }
  return t;
}

}  // namespace

CameraImageStack render(const BevGrid& bev, const SamplingMap& map) {
  require_shape(bev.extent == map.extent,
                "BEV grid extent does not match the sampling map");
  require_shape(bev.data.size() ==
                    static_cast<std::size_t>(bev.extent.rows) *
                        bev.extent.cols * bev.channels,
                "BEV grid data size mismatch");
  const int rows = bev.extent.rows, cols = bev.extent.cols;
  const int c = bev.channels;
  CameraImageStack out = CameraImageStack::zeros(
      map.n_cameras, map.height, map.width, c, bev.semantics);
  const double* grid = bev.data.data();

  const int total_rows = map.n_cameras * map.height;
  parallel_chunks(total_rows, [&](int rb, int re) {
    for (int row = rb; row < re; ++row) {
      const int cam = row / map.height;
      const int v = row % map.height;
      for (int u = 0; u < map.width; ++u) {
        const auto& smp = map.at(cam, v, u);
        if (!smp.valid) continue;
        out.valid[out.pixel_index(cam, v, u)] = 1;
        double* dst = out.data.data() + out.index(cam, v, u, 0);
        const auto taps = grid_taps(smp.r, smp.s, rows, cols);
        for (int k = 0; k < taps.count; ++k) {
          const double* src = grid + taps.cell[k] * c;
          const double w = taps.w[k];
          for (int ch = 0; ch < c; ++ch) dst[ch] += w * src[ch];
        }
      }
    }
  });
  return out;
}

BevGrid render_vjp(const CameraImageStack& cotangent, const SamplingMap& map) {
  require_shape(cotangent.n_cameras == map.n_cameras &&
                    cotangent.height == map.height &&
                    cotangent.width == map.width,
                "cotangent shape does not match the sampling map");
  const int rows = map.extent.rows, cols = map.extent.cols;
  const int c = cotangent.channels;
  const std::size_t grid_size = static_cast<std::size_t>(rows) * cols * c;

  // One buffer per camera; scatter is sequential within a camera and the
  // buffers are reduced in camera order, so the result does not depend on
  // the thread schedule.
  std::vector<std::vector<double>> partial(map.n_cameras);
  parallel_chunks(map.n_cameras, [&](int cb, int ce) {
    for (int cam = cb; cam < ce; ++cam) {
      auto& buf = partial[cam];
      buf.assign(grid_size, 0.0);
      for (int v = 0; v < map.height; ++v) {
        for (int u = 0; u < map.width; ++u) {
          const auto& smp = map.at(cam, v, u);
          if (!smp.valid) continue;
          const double* src =
              cotangent.data.data() + cotangent.index(cam, v, u, 0);
          const auto taps = grid_taps(smp.r, smp.s, rows, cols);
          for (int k = 0; k < taps.count; ++k) {
            double* dst = buf.data() + taps.cell[k] * c;
            const double w = taps.w[k];
            for (int ch = 0; ch < c; ++ch) dst[ch] += w * src[ch];
          }
        }
      }
    }
  });

  BevGrid grad = BevGrid::zeros(map.extent, c, GridSemantics::logits);
  for (int cam = 0; cam < map.n_cameras; ++cam) {
    const auto& buf = partial[cam];
    for (std::size_t i = 0; i < grid_size; ++i) grad.data[i] += buf[i];
  }
  return grad;
}

std::vector<CameraImageStack> render_rig_batch(std::span<const BevGrid> bevs,
                                               const SamplingMap& map) {
  std::vector<CameraImageStack> out;
  out.reserve(bevs.size());
  for (const auto& bev : bevs) out.push_back(render(bev, map));
  return out;
}

}  // namespace bevreproj
