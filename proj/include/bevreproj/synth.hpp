#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "bevreproj/loss.hpp"
#include "bevreproj/renderer.hpp"

namespace bevreproj {

// Class layout used by all synthetic scenes.
inline constexpr int kNumClasses = 4;
inline constexpr int kBackground = 0;
inline constexpr int kBoundary = 1;
inline constexpr int kLaneDivider = 2;
inline constexpr int kCrosswalk = 3;

const std::vector<std::string>& class_names();

struct Pose2D {
  double x = 0, y = 0, yaw = 0;
};

// Parameters of a synthetic road world. The ego guide path, the road layout
// and all placement randomness derive deterministically from the seed.
struct SceneSpec {
  std::uint64_t seed = 1;
  GroundExtent extent;  // ego-centered evaluation extent (grid shape source)
  int lane_count = 2;
  double lane_width = 3.5;          // meters
  double marking_width = 0.7;       // meters, >= 1 BEV cell
  double crosswalk_probability = 0.02;  // per meter of road
  double curvature = 0.008;         // max |d(heading)/ds|, rad per meter
  double label_flip_prob = 0.0;     // symmetric pseudo-label noise
  double path_length = 160.0;       // meters of generated road

  void validate() const;
};

// World-frame static map: labels on a fine grid plus the guide path the road
// was laid along (ego trajectories follow the same path).
struct WorldMap {
  LabelGrid grid;
  std::vector<Pose2D> path;  // dense samples, fixed 0.5 m arc-length step
};

// Deterministic road world: lanes along a smooth seed-derived path, lane
// dividers between adjacent lanes, boundaries at both road edges, crosswalks
// as filled stripes across the road. Contains at least one instance of every
// marking class.
WorldMap generate_scene(const SceneSpec& spec);

struct TrajectoryParams {
  double speed_min_kmh = 31.0;
  double speed_max_kmh = 49.0;
  double frame_dt = 0.5;      // 2 Hz
  double curvature = 0.008;   // must match the scene for consistent pairs
  double path_length = 160.0;
};

struct TrajectoryFrame {
  Pose2D pose;          // world frame
  EgoMotion2D motion;   // from the previous frame; zeros for frame 0
};

// Smooth ego trajectory along the seed-derived guide path. With the default
// speed range the per-frame displacement stays within [4.2, 6.9] m.
std::vector<TrajectoryFrame> generate_trajectory(std::uint64_t seed,
                                                 int n_frames,
                                                 const TrajectoryParams& params);

struct OccluderBox {
  double length = 4.5, width = 1.9, height = 1.4;  // meters
};

// One dynamic object with a pose per frame (parked objects repeat theirs).
struct OccluderTrack {
  OccluderBox box;
  std::vector<Pose2D> world_pose;  // one entry per frame
};

struct OccluderParams {
  int min_count = 2;
  int max_count = 4;
  double moving_fraction = 0.4;
};

std::vector<OccluderTrack> generate_occluders(
    std::uint64_t seed, const std::vector<TrajectoryFrame>& trajectory,
    const SceneSpec& scene, const OccluderParams& params);

// Occluder footprint in the ego frame of one frame.
struct OccluderEgo {
  OccluderBox box;
  Pose2D pose;
};

// True when the segment from `origin` to the ground point `hit` (z = 0)
// passes through the box.
bool segment_hits_box(const Eigen::Vector3d& origin, const GroundHit& hit,
                      const OccluderBox& box, const Pose2D& ego_pose);

// Counts reads of BEV ground truth while a guard is active; accesses inside
// an active guard throw LabelIsolationError. The pretraining loop runs under
// a guard, which is what makes its label isolation checkable.
class GtAccessGuard {
 public:
  GtAccessGuard();
  ~GtAccessGuard();
  GtAccessGuard(const GtAccessGuard&) = delete;
  GtAccessGuard& operator=(const GtAccessGuard&) = delete;

  static bool active();
  static long violation_count();
  static void reset_violations();
  static void note_access();
};

// One frame of a synthetic sequence. Camera-perspective ground truth, the
// supervision mask and the motion are freely accessible; the BEV ground
// truth sits behind the guarded accessors.
class FrameRecord {
 public:
  int index = 0;
  EgoMotion2D motion;  // from previous frame
  Pose2D world_pose;
  CameraImageStack gt_cp;  // onehot; occluded pixels zeroed
  SupervisionMask mask;    // valid and not occluded
  std::vector<OccluderEgo> occluders;

  const BevGrid& bev_gt() const;
  const LabelGrid& bev_gt_labels() const;

  void set_bev_gt(BevGrid onehot, LabelGrid labels);

 private:
  BevGrid gt_bev_;
  LabelGrid gt_labels_;
};

// Everything needed to materialize frames, as stored on disk: cropped GT
// grids plus trajectory and occluder descriptors.
struct SequenceRaw {
  std::uint64_t seed = 0;
  std::uint64_t noise_seed = 0;
  double label_flip_prob = 0.0;
  std::vector<TrajectoryFrame> trajectory;
  std::vector<LabelGrid> gt_labels;  // ego-centered, one per frame
  std::vector<OccluderTrack> occluders;
};

// Ego-centered crop of the world map: bilinear-argmax resampling of the
// one-hot label field; exact for axis-aligned poses. Cells outside the world
// map read background.
LabelGrid crop_world_labels(const WorldMap& world, const Pose2D& ego,
                            const GroundExtent& extent);

// Renders GT grids into the cameras, applies pseudo-label noise, projects
// occluders into image space and assembles the per-frame records.
std::vector<FrameRecord> materialize_frames(const SequenceRaw& raw,
                                            const CameraRig& rig,
                                            const SamplingMap& map);

// Full per-frame record pipeline from a world map and trajectory.
std::vector<FrameRecord> build_frames(const WorldMap& world,
                                      const std::vector<TrajectoryFrame>& traj,
                                      const CameraRig& rig,
                                      const SamplingMap& map,
                                      const std::vector<OccluderTrack>& occ,
                                      const GroundExtent& extent,
                                      std::uint64_t noise_seed,
                                      double label_flip_prob);

}  // namespace bevreproj
