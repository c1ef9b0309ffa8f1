#pragma once

#include <cstdint>
#include <vector>

#include "bevreproj/geometry.hpp"

namespace bevreproj {

enum class GridSemantics : std::uint32_t {
  logits = 0,
  probabilities = 1,
  onehot = 2,
  labels = 3,  // file-format tag for LabelGrid payloads
};

// Multichannel class grid over a metric ground extent. Layout is row-major
// (row, col, channel).
struct BevGrid {
  GroundExtent extent;
  int channels = 0;
  GridSemantics semantics = GridSemantics::logits;
  std::vector<double> data;

  static BevGrid zeros(const GroundExtent& extent, int channels,
                       GridSemantics semantics);

  std::size_t index(int i, int j, int ch) const {
    return (static_cast<std::size_t>(i) * extent.cols + j) * channels + ch;
  }
  double& at(int i, int j, int ch) { return data[index(i, j, ch)]; }
  double at(int i, int j, int ch) const { return data[index(i, j, ch)]; }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(extent.rows) * extent.cols;
  }
};

// Feature grid in BEV space; same layout as BevGrid without class semantics.
struct LatentBev {
  GroundExtent extent;
  int channels = 0;
  std::vector<double> data;

  static LatentBev zeros(const GroundExtent& extent, int channels);

  std::size_t index(int i, int j, int ch) const {
    return (static_cast<std::size_t>(i) * extent.cols + j) * channels + ch;
  }
  double& at(int i, int j, int ch) { return data[index(i, j, ch)]; }
  double at(int i, int j, int ch) const { return data[index(i, j, ch)]; }
};

struct LabelGrid {
  GroundExtent extent;
  std::vector<std::int32_t> labels;

  static LabelGrid zeros(const GroundExtent& extent);

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * extent.cols + j;
  }
  std::int32_t& at(int i, int j) { return labels[index(i, j)]; }
  std::int32_t at(int i, int j) const { return labels[index(i, j)]; }
};

// Resamples the grid under a planar ego displacement: the field is rotated
// by motion.dphi about the extent center and then translated by
// (motion.dx, motion.dy). Bilinear interpolation, zero fill outside the
// extent, channel-wise independent. Zero motion reproduces the input
// bit-exactly.
BevGrid warp_ego_motion(const BevGrid& grid, const EgoMotion2D& motion);
LatentBev warp_ego_motion(const LatentBev& grid, const EgoMotion2D& motion);

// Adjoint of warp_ego_motion with respect to the grid values: scatters the
// cotangent back through the transposed bilinear weights.
BevGrid warp_ego_motion_vjp(const BevGrid& cotangent, const EgoMotion2D& motion);
LatentBev warp_ego_motion_vjp(const LatentBev& cotangent,
                              const EgoMotion2D& motion);

// Numerically stable channel-wise log-softmax (max subtraction).
BevGrid log_softmax_channels(const BevGrid& grid);

// VJP of log_softmax_channels: grad = u - softmax * sum(u) per cell, where
// log_out is the forward output.
BevGrid log_softmax_channels_vjp(const BevGrid& log_out,
                                 const BevGrid& cotangent);

// Per-cell argmax over channels; ties break toward the lowest class id.
LabelGrid argmax_labels(const BevGrid& grid);

}  // namespace bevreproj
