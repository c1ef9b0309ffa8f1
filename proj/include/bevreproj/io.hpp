#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bevreproj/renderer.hpp"

namespace bevreproj {

// Binary grid container, little-endian:
//   magic "BVRG" | u32 version | u32 rows | u32 cols | u32 channels |
//   u32 semantics | f64 x_min,x_max,y_min,y_max | payload
// Payload is rows*cols*channels f64 row-major (row, col, channel); the
// labels semantics tag stores rows*cols i64 class ids instead.
void write_grid(const std::filesystem::path& path, const BevGrid& grid);
BevGrid read_grid(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const LabelGrid& labels);
LabelGrid read_labels(const std::filesystem::path& path);

// Camera rig JSON: {"extent": {x_min, x_max, y_min, y_max, rows, cols},
// "cameras": [{name, width, height, fx, fy, cx, cy,
//              rotation: [9, row-major, camera->vehicle],
//              translation: [3]}]}.
// The loader validates intrinsics/pose invariants and requires the image
// width to be divisible by 32.
void write_rig(const std::filesystem::path& path, const CameraRig& rig,
               const GroundExtent& extent);
std::pair<CameraRig, GroundExtent> read_rig(const std::filesystem::path& path);

// Checkpoint container, little-endian:
//   magic "BVCK" | u32 version | u64 step | u64 config_hash | u32 n_blobs |
//   per blob: u32 name_len | name | u64 count | f64 data
struct Checkpoint {
  std::uint64_t step = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::pair<std::string, std::vector<double>>> blobs;

  const std::vector<double>* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Fixed class palette (background dark, boundary green, lane blue,
// crosswalk red); extra classes get hashed colors.
std::array<std::uint8_t, 3> class_color(int cls);

void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& rgb);

// Argmax class map of a BEV grid as an image (rows map to image rows).
void write_grid_ppm(const std::filesystem::path& path, const BevGrid& grid);
void write_labels_ppm(const std::filesystem::path& path,
                      const LabelGrid& labels);

// Per-camera argmax class maps; invalid pixels render black.
void write_stack_ppm(const std::filesystem::path& dir,
                     const std::string& stem, const CameraImageStack& stack,
                     const std::vector<std::string>& camera_names = {});

// Horizontal bar chart of fractions in [0, 1].
void write_bar_chart_ppm(const std::filesystem::path& path,
                         const std::vector<double>& fractions);

}  // namespace bevreproj
