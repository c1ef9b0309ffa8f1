#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bevreproj/grid.hpp"

namespace bevreproj {

// Precomputed image-to-grid correspondence: for every pixel center, the
// continuous BEV grid coordinates of its ground-plane hit plus the ground
// distance from the ego origin. Deterministic function of (rig, extent).
struct SamplingMap {
  struct Sample {
    double r = 0, s = 0;
    double distance = 0;
    bool valid = false;
  };

  GroundExtent extent;
  int n_cameras = 0, height = 0, width = 0;
  std::vector<Sample> samples;  // (camera, row, col) row-major

  std::size_t index(int cam, int v, int u) const {
    return (static_cast<std::size_t>(cam) * height + v) * width + u;
  }
  const Sample& at(int cam, int v, int u) const {
    return samples[index(cam, v, u)];
  }
  std::size_t pixels_per_camera() const {
    return static_cast<std::size_t>(height) * width;
  }
};

// N-view multichannel class images with per-pixel validity. Layout is
// (camera, row, col, channel) row-major; invalid pixels are all-zero.
struct CameraImageStack {
  int n_cameras = 0, height = 0, width = 0, channels = 0;
  GridSemantics semantics = GridSemantics::logits;
  std::vector<double> data;
  std::vector<std::uint8_t> valid;

  static CameraImageStack zeros(int n_cameras, int height, int width,
                                int channels, GridSemantics semantics);

  std::size_t pixel_index(int cam, int v, int u) const {
    return (static_cast<std::size_t>(cam) * height + v) * width + u;
  }
  std::size_t index(int cam, int v, int u, int ch) const {
    return pixel_index(cam, v, u) * channels + ch;
  }
  double& at(int cam, int v, int u, int ch) {
    return data[index(cam, v, u, ch)];
  }
  double at(int cam, int v, int u, int ch) const {
    return data[index(cam, v, u, ch)];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(n_cameras) * height * width;
  }
  bool same_shape(const CameraImageStack& o) const {
    return n_cameras == o.n_cameras && height == o.height && width == o.width &&
           channels == o.channels;
  }
};

// Casts a ray through every pixel center (u+0.5, v+0.5), intersects the
// ground plane and converts to grid coordinates; a pixel is valid iff both
// steps succeed.
SamplingMap build_sampling_map(const CameraRig& rig, const GroundExtent& extent);

// Renders the BEV grid into every camera: each valid pixel is the bilinear
// sample of the grid at its precomputed coordinates, channel-wise; invalid
// pixels stay zero. Linear in the grid values and bit-deterministic for any
// thread count.
CameraImageStack render(const BevGrid& bev, const SamplingMap& map);

// Adjoint of render: scatters pixel cotangents back into a BEV-shaped
// gradient through the same bilinear weights. Accumulates per camera and
// reduces in fixed camera order.
BevGrid render_vjp(const CameraImageStack& cotangent, const SamplingMap& map);

// Element-wise render of a batch; bit-identical to individual calls.
std::vector<CameraImageStack> render_rig_batch(std::span<const BevGrid> bevs,
                                               const SamplingMap& map);

}  // namespace bevreproj
