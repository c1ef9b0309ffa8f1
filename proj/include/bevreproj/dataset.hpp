#pragma once

#include <filesystem>

#include "bevreproj/synth.hpp"

namespace bevreproj {

// Generation parameters for one dataset. Per-sequence randomness derives
// from seed via independent streams, so generation may run in parallel per
// sequence and is reproducible across runs and platforms.
struct DatasetConfig {
  std::uint64_t seed = 1;
  int n_sequences = 64;
  int n_frames = 12;
  int image_width = 256;
  int image_height = 144;
  GroundExtent extent;
  SceneSpec scene;  // seed and extent fields are filled per sequence
  TrajectoryParams trajectory;
  OccluderParams occluders;

  static DatasetConfig desk_default();
  void validate() const;
};

struct ClassShareCard {
  std::vector<double> cell_share;  // fraction of GT cells per class
};

// In-memory dataset handle: compact per-sequence raw data (GT label grids,
// trajectories, occluder tracks) plus the rig. Frames are materialized per
// sequence on demand.
struct Dataset {
  DatasetConfig config;
  CameraRig rig;
  SamplingMap map;
  std::vector<SequenceRaw> sequences;

  std::vector<FrameRecord> materialize(int sequence_index) const;
};

SequenceRaw generate_sequence(const DatasetConfig& config, int index);

// Generates all sequences in memory (parallel per sequence).
Dataset generate_dataset(const DatasetConfig& config);

ClassShareCard class_share_card(const Dataset& dataset);

// Disk layout:
//   <dir>/dataset.json            config, class names, class-share card
//   <dir>/rig.json                camera rig + extent
//   <dir>/seq_XXX/manifest.json   seeds, trajectory, occluder tracks
//   <dir>/seq_XXX/frame_XXX.bvg   ego-centered GT label grids
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace bevreproj
