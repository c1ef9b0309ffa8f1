#include "bevreproj/synth.hpp"

#include <algorithm>
#include <cmath>

namespace bevreproj {

const std::vector<std::string>& class_names() {
  static const std::vector<std::string> names = {"background", "boundary",
                                                 "lane", "crosswalk"};
  return names;
}

void SceneSpec::validate() const {
  if (extent.rows < 2 || extent.cols < 2)
    throw InvalidSpecError("scene extent is not initialized");
  if (lane_count < 1) throw InvalidSpecError("lane_count must be >= 1");
  if (!(lane_width > 0.5)) throw InvalidSpecError("lane_width too small");
  const double cell = std::max(extent.cell_dx(), extent.cell_dy());
  if (!(marking_width >= cell))
    throw InvalidSpecError("marking_width must cover at least one BEV cell");
  if (crosswalk_probability < 0 || crosswalk_probability > 1)
    throw InvalidSpecError("crosswalk_probability must be in [0, 1]");
  if (curvature < 0) throw InvalidSpecError("curvature must be >= 0");
  if (label_flip_prob < 0 || label_flip_prob >= 1)
    throw InvalidSpecError("label_flip_prob must be in [0, 1)");
  if (!(path_length >= 40.0))
    throw InvalidSpecError("path_length must be at least 40 m");
}

namespace {

constexpr double kPathStep = 0.5;  // meters between guide-path samples

// Shared guide path: heading curvature is resampled every 20 m and linearly
// interpolated, so the same seed yields the same road for the scene and the
// same stations for the trajectory.
std::vector<Pose2D> center_path(std::uint64_t seed, double length,
                                double curvature) {
  Rng rng(mix_seed(seed, fnv1a64("guide_path")));
  const int n = static_cast<int>(std::ceil(length / kPathStep)) + 1;
  const double resample_every = 20.0;
  std::vector<Pose2D> path;
  path.reserve(n);
  double kappa_from = rng.uniform(-curvature, curvature);
  double kappa_to = rng.uniform(-curvature, curvature);
  double next_resample = resample_every;
  Pose2D p{0.0, 0.0, 0.0};
  path.push_back(p);
  for (int k = 1; k < n; ++k) {
    const double s = k * kPathStep;
    if (s >= next_resample) {
      kappa_from = kappa_to;
      kappa_to = rng.uniform(-curvature, curvature);
      next_resample += resample_every;
    }
    const double t = 1.0 - (next_resample - s) / resample_every;
    const double kappa = kappa_from + (kappa_to - kappa_from) * t;
    p.yaw += kappa * kPathStep;
    p.x += kPathStep * std::cos(p.yaw);
    p.y += kPathStep * std::sin(p.yaw);
    path.push_back(p);
  }
  return path;
}

Pose2D path_at(const std::vector<Pose2D>& path, double s) {
  const double idx = s / kPathStep;
  const int i0 = std::clamp(static_cast<int>(std::floor(idx)), 0,
                            static_cast<int>(path.size()) - 2);
  const double f = idx - i0;
  const Pose2D& a = path[i0];
  const Pose2D& b = path[i0 + 1];
  return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y),
          a.yaw + f * (b.yaw - a.yaw)};
}

Pose2D offset_left(const Pose2D& p, double offset) {
  return {p.x - offset * std::sin(p.yaw), p.y + offset * std::cos(p.yaw),
          p.yaw};
}

struct RoadLayout {
  double right_edge;             // lateral offset of the right boundary
  double left_edge;              // lateral offset of the left boundary
  std::vector<double> dividers;  // lateral offsets of lane dividers
};

// The guide path runs along the center of the rightmost lane.
RoadLayout road_layout(const SceneSpec& spec) {
  RoadLayout l;
  l.right_edge = -0.5 * spec.lane_width;
  l.left_edge = (spec.lane_count - 0.5) * spec.lane_width;
  for (int k = 1; k < spec.lane_count; ++k)
    l.dividers.push_back((k - 0.5) * spec.lane_width);
  return l;
}

class WorldPainter {
 public:
  explicit WorldPainter(LabelGrid& grid) : grid_(grid) {}

  void disc(double x, double y, double radius, std::int32_t cls) {
    const auto& e = grid_.extent;
    const int i_lo = cell_floor_x(x - radius), i_hi = cell_ceil_x(x + radius);
    const int j_lo = cell_floor_y(y - radius), j_hi = cell_ceil_y(y + radius);
    const double r2 = radius * radius;
    for (int i = std::max(0, i_lo); i <= std::min(e.rows - 1, i_hi); ++i) {
      const double dx = e.cell_center_x(i) - x;
      for (int j = std::max(0, j_lo); j <= std::min(e.cols - 1, j_hi); ++j) {
        const double dy = e.cell_center_y(j) - y;
        if (dx * dx + dy * dy <= r2) grid_.at(i, j) = cls;
      }
    }
  }

  void point(double x, double y, std::int32_t cls) {
    const auto& e = grid_.extent;
    const int i = nearest_x(x);
    const int j = nearest_y(y);
    if (i >= 0 && i < e.rows && j >= 0 && j < e.cols) grid_.at(i, j) = cls;
  }

 private:
  int cell_floor_x(double x) const {
    return static_cast<int>(
        std::floor((x - grid_.extent.x_min) / grid_.extent.cell_dx() - 0.5));
  }
  int cell_ceil_x(double x) const {
    return static_cast<int>(
        std::ceil((x - grid_.extent.x_min) / grid_.extent.cell_dx() - 0.5));
  }
  int cell_floor_y(double y) const {
    return static_cast<int>(
        std::floor((y - grid_.extent.y_min) / grid_.extent.cell_dy() - 0.5));
  }
  int cell_ceil_y(double y) const {
    return static_cast<int>(
        std::ceil((y - grid_.extent.y_min) / grid_.extent.cell_dy() - 0.5));
  }
  int nearest_x(double x) const {
    return static_cast<int>(
        std::floor((x - grid_.extent.x_min) / grid_.extent.cell_dx()));
  }
  int nearest_y(double y) const {
    return static_cast<int>(
        std::floor((y - grid_.extent.y_min) / grid_.extent.cell_dy()));
  }

  LabelGrid& grid_;
};

void paint_line(WorldPainter& painter, const std::vector<Pose2D>& path,
                double length, double lateral_offset, double width,
                std::int32_t cls, double step) {
  for (double s = 0.0; s <= length; s += step) {
    const Pose2D p = offset_left(path_at(path, s), lateral_offset);
    painter.disc(p.x, p.y, 0.5 * width, cls);
  }
}

struct CrosswalkSpan {
  double s_begin, s_end;
};

std::vector<CrosswalkSpan> sample_crosswalks(std::uint64_t seed,
                                             const SceneSpec& spec) {
  Rng rng(mix_seed(seed, fnv1a64("crosswalks")));
  std::vector<CrosswalkSpan> spans;
  const double cw_len = 3.0;
  const double min_gap = 15.0;
  double last = -min_gap;
  for (double s = 12.0; s + cw_len < spec.path_length - 12.0; s += 1.0) {
    if (rng.uniform() < spec.crosswalk_probability && s - last >= min_gap) {
      spans.push_back({s, s + cw_len});
      last = s;
    }
  }
  if (spans.empty()) {
    const double mid = 0.5 * spec.path_length;
    spans.push_back({mid, mid + cw_len});
  }
  return spans;
}

}  // namespace

WorldMap generate_scene(const SceneSpec& spec) {
  spec.validate();
  WorldMap world;
  world.path = center_path(spec.seed, spec.path_length, spec.curvature);

  const RoadLayout layout = road_layout(spec);
  double x_lo = 1e18, x_hi = -1e18, y_lo = 1e18, y_hi = -1e18;
  for (const auto& p : world.path) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  // Margin covers the far corner of the ego extent from any path station.
  const double margin =
      0.5 * std::hypot(spec.extent.x_max - spec.extent.x_min,
                       spec.extent.y_max - spec.extent.y_min) +
      layout.left_edge + 5.0;
  const double world_cell = std::min(
      0.25, 0.5 * std::min(spec.extent.cell_dx(), spec.extent.cell_dy()));
  const int rows =
      static_cast<int>(std::ceil((x_hi - x_lo + 2 * margin) / world_cell));
  const int cols =
      static_cast<int>(std::ceil((y_hi - y_lo + 2 * margin) / world_cell));
  world.grid = LabelGrid::zeros(GroundExtent::create(
      x_lo - margin, x_lo - margin + rows * world_cell, y_lo - margin,
      y_lo - margin + cols * world_cell, rows, cols));

  WorldPainter painter(world.grid);
  const double step = 0.5 * world_cell;

  for (const double offset : layout.dividers)
    paint_line(painter, world.path, spec.path_length, offset,
               spec.marking_width, kLaneDivider, step);

  for (const auto& span : sample_crosswalks(spec.seed, spec)) {
    for (double s = span.s_begin; s <= span.s_end; s += step) {
      for (double o = layout.right_edge; o <= layout.left_edge; o += step) {
        const Pose2D p = offset_left(path_at(world.path, s), o);
        painter.point(p.x, p.y, kCrosswalk);
      }
    }
  }

  paint_line(painter, world.path, spec.path_length, layout.right_edge,
             spec.marking_width, kBoundary, step);
  paint_line(painter, world.path, spec.path_length, layout.left_edge,
             spec.marking_width, kBoundary, step);

  return world;
}

std::vector<TrajectoryFrame> generate_trajectory(
    std::uint64_t seed, int n_frames, const TrajectoryParams& params) {
  if (n_frames < 2) throw InvalidSpecError("trajectory needs >= 2 frames");
  if (!(params.speed_min_kmh > 0) ||
      !(params.speed_max_kmh >= params.speed_min_kmh))
    throw InvalidSpecError("invalid speed range");

  const auto path = center_path(seed, params.path_length, params.curvature);
  Rng rng(mix_seed(seed, fnv1a64("trajectory")));

  // Speed target resampled every few frames and approached smoothly.
  double speed_kmh = rng.uniform(params.speed_min_kmh, params.speed_max_kmh);
  double target_kmh = rng.uniform(params.speed_min_kmh, params.speed_max_kmh);
  int until_resample = 4;

  std::vector<TrajectoryFrame> frames(n_frames);
  double s = 8.0;
  for (int t = 0; t < n_frames; ++t) {
    frames[t].pose = path_at(path, s);
    if (t + 1 < n_frames) {
      if (--until_resample == 0) {
        target_kmh = rng.uniform(params.speed_min_kmh, params.speed_max_kmh);
        until_resample = 4;
      }
      speed_kmh += 0.3 * (target_kmh - speed_kmh);
      s += (speed_kmh / 3.6) * params.frame_dt;
      if (s > params.path_length - 2.0)
        throw InvalidSpecError("trajectory exceeds the generated path length");
    }
  }
  for (int t = 1; t < n_frames; ++t) {
    const Pose2D& a = frames[t - 1].pose;
    const Pose2D& b = frames[t].pose;
    const double dxw = b.x - a.x, dyw = b.y - a.y;
    frames[t].motion.dx = std::cos(a.yaw) * dxw + std::sin(a.yaw) * dyw;
    frames[t].motion.dy = -std::sin(a.yaw) * dxw + std::cos(a.yaw) * dyw;
    frames[t].motion.dphi = b.yaw - a.yaw;
  }
  return frames;
}

std::vector<OccluderTrack> generate_occluders(
    std::uint64_t seed, const std::vector<TrajectoryFrame>& trajectory,
    const SceneSpec& scene, const OccluderParams& params) {
  Rng rng(mix_seed(seed, fnv1a64("occluders")));
  const auto path = center_path(scene.seed, scene.path_length, scene.curvature);
  const RoadLayout layout = road_layout(scene);
  const int n_frames = static_cast<int>(trajectory.size());

  // Stations the ego covers; the trajectory starts at 8 m and advances by
  // the per-frame displacement.
  double s_hi = 8.0;
  for (int t = 1; t < n_frames; ++t)
    s_hi += std::hypot(trajectory[t].motion.dx, trajectory[t].motion.dy);

  const int count =
      static_cast<int>(rng.uniform_int(params.min_count, params.max_count));
  std::vector<OccluderTrack> tracks;
  tracks.reserve(count);
  for (int k = 0; k < count; ++k) {
    OccluderTrack track;
    track.box.length = rng.uniform(4.0, 5.0);
    track.box.width = rng.uniform(1.7, 2.0);
    track.box.height = rng.uniform(1.2, 1.6);
    const bool moving = rng.uniform() < params.moving_fraction;
    const double s0 = rng.uniform(12.0, s_hi + 18.0);
    double lateral;
    double speed_mps = 0.0;
    if (moving && scene.lane_count > 1) {
      // Adjacent lane, same direction.
      lateral = scene.lane_width;
      speed_mps = rng.uniform(20.0, 40.0) / 3.6;
    } else {
      // Parked just off the road, either side.
      const bool right = rng.uniform() < 0.5;
      const double gap = rng.uniform(0.8, 1.6);
      lateral = right ? layout.right_edge - gap - 0.5 * track.box.width
                      : layout.left_edge + gap + 0.5 * track.box.width;
    }
    track.world_pose.resize(n_frames);
    for (int t = 0; t < n_frames; ++t) {
      const double s =
          std::clamp(s0 + speed_mps * 0.5 * t, 0.0, scene.path_length - 1.0);
      track.world_pose[t] = offset_left(path_at(path, s), lateral);
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

bool segment_hits_box(const Eigen::Vector3d& origin, const GroundHit& hit,
                      const OccluderBox& box, const Pose2D& ego_pose) {
  const double c = std::cos(ego_pose.yaw), s = std::sin(ego_pose.yaw);
  // Segment endpoints in the box frame.
  const double ox_w = origin.x() - ego_pose.x, oy_w = origin.y() - ego_pose.y;
  const double hx_w = hit.x - ego_pose.x, hy_w = hit.y - ego_pose.y;
  const double ox = c * ox_w + s * oy_w, oy = -s * ox_w + c * oy_w;
  const double hx = c * hx_w + s * hy_w, hy = -s * hx_w + c * hy_w;
  const double oz = origin.z();

  const double d[3] = {hx - ox, hy - oy, -oz};
  const double o[3] = {ox, oy, oz};
  const double lo[3] = {-0.5 * box.length, -0.5 * box.width, 0.0};
  const double hi[3] = {0.5 * box.length, 0.5 * box.width, box.height};

  double t_min = 0.0, t_max = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_min = std::max(t_min, t1);
    t_max = std::min(t_max, t2);
    if (t_min >= t_max) return false;
  }
  return true;
}

namespace {

std::atomic<int> g_guard_depth{0};
std::atomic<long> g_guard_violations{0};

}  // namespace

GtAccessGuard::GtAccessGuard() { ++g_guard_depth; }
GtAccessGuard::~GtAccessGuard() { --g_guard_depth; }

bool GtAccessGuard::active() { return g_guard_depth.load() > 0; }
long GtAccessGuard::violation_count() { return g_guard_violations.load(); }
void GtAccessGuard::reset_violations() { g_guard_violations.store(0); }

void GtAccessGuard::note_access() {
  if (active()) {
    ++g_guard_violations;
    throw LabelIsolationError(
        "BEV ground truth accessed during label-isolated training");
  }
}

const BevGrid& FrameRecord::bev_gt() const {
  GtAccessGuard::note_access();
  return gt_bev_;
}

const LabelGrid& FrameRecord::bev_gt_labels() const {
  GtAccessGuard::note_access();
  return gt_labels_;
}

void FrameRecord::set_bev_gt(BevGrid onehot, LabelGrid labels) {
  gt_bev_ = std::move(onehot);
  gt_labels_ = std::move(labels);
}

LabelGrid crop_world_labels(const WorldMap& world, const Pose2D& ego,
                            const GroundExtent& extent) {
  LabelGrid out = LabelGrid::zeros(extent);
  const double c = std::cos(ego.yaw), s = std::sin(ego.yaw);
  const auto& wg = world.grid;
  const int wrows = wg.extent.rows, wcols = wg.extent.cols;
  for (int i = 0; i < extent.rows; ++i) {
    const double mx = extent.cell_center_x(i);
    for (int j = 0; j < extent.cols; ++j) {
      const double my = extent.cell_center_y(j);
      const double wx = ego.x + c * mx - s * my;
      const double wy = ego.y + s * mx + c * my;
      const auto gc = ground_to_grid(wx, wy, wg.extent);
      if (!gc) continue;  // background outside the world map
      // Bilinear-argmax over the one-hot label field.
      const double fi = std::floor(gc->r), fj = std::floor(gc->s);
      const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
      const double fr = gc->r - fi, fs = gc->s - fj;
      double weight[kNumClasses] = {0, 0, 0, 0};
      const double wr[2] = {1.0 - fr, fr};
      const double ws[2] = {1.0 - fs, fs};
      for (int a = 0; a < 2; ++a) {
        const int ii = i0 + a;
        if (ii < 0 || ii >= wrows || wr[a] == 0.0) continue;
        for (int b = 0; b < 2; ++b) {
          const int jj = j0 + b;
          if (jj < 0 || jj >= wcols || ws[b] == 0.0) continue;
          weight[wg.at(ii, jj)] += wr[a] * ws[b];
        }
      }
      int best = 0;
      for (int cls = 1; cls < kNumClasses; ++cls)
        if (weight[cls] > weight[best]) best = cls;
      out.at(i, j) = best;
    }
  }
  return out;
}

namespace {

BevGrid labels_to_onehot(const LabelGrid& labels, int n_classes) {
  BevGrid out = BevGrid::zeros(labels.extent, n_classes, GridSemantics::onehot);
  for (std::size_t cell = 0; cell < labels.labels.size(); ++cell)
    out.data[cell * n_classes + labels.labels[cell]] = 1.0;
  return out;
}

}  // namespace

std::vector<FrameRecord> materialize_frames(const SequenceRaw& raw,
                                            const CameraRig& rig,
                                            const SamplingMap& map) {
  const int n_frames = static_cast<int>(raw.trajectory.size());
  require_shape(static_cast<int>(raw.gt_labels.size()) == n_frames,
                "sequence frame count mismatch");
  for (const auto& occ : raw.occluders)
    require_shape(static_cast<int>(occ.world_pose.size()) == n_frames,
                  "occluder track length mismatch");

  std::vector<FrameRecord> frames(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    FrameRecord& rec = frames[t];
    rec.index = t;
    rec.motion = raw.trajectory[t].motion;
    rec.world_pose = raw.trajectory[t].pose;

    const BevGrid gt_onehot = labels_to_onehot(raw.gt_labels[t], kNumClasses);

    // Camera-perspective ground truth: rendered GT, argmaxed to one-hot.
    const CameraImageStack rendered = render(gt_onehot, map);
    CameraImageStack gt_cp = CameraImageStack::zeros(
        rendered.n_cameras, rendered.height, rendered.width, kNumClasses,
        GridSemantics::onehot);
    gt_cp.valid = rendered.valid;

    Rng noise(mix_seed(raw.noise_seed, static_cast<std::uint64_t>(t)));
    const bool with_noise = raw.label_flip_prob > 0.0;

    // Occluders in this frame's ego coordinates.
    const Pose2D& ego = raw.trajectory[t].pose;
    const double ce = std::cos(ego.yaw), se = std::sin(ego.yaw);
    for (const auto& track : raw.occluders) {
      const Pose2D& wp = track.world_pose[t];
      const double rx = wp.x - ego.x, ry = wp.y - ego.y;
      rec.occluders.push_back(
          {track.box,
           {ce * rx + se * ry, -se * rx + ce * ry, wp.yaw - ego.yaw}});
    }

    rec.mask = SupervisionMask::none(rendered.n_cameras, rendered.height,
                                     rendered.width);
    for (int cam = 0; cam < rendered.n_cameras; ++cam) {
      const Eigen::Vector3d origin = rig.cameras[cam].pose.translation;
      for (int v = 0; v < rendered.height; ++v) {
        for (int u = 0; u < rendered.width; ++u) {
          const std::size_t pix = rendered.pixel_index(cam, v, u);
          if (!rendered.valid[pix]) continue;
          const auto& smp = map.at(cam, v, u);
          const GroundHit hit{
              map.extent.x_min + (smp.r + 0.5) * map.extent.cell_dx(),
              map.extent.y_min + (smp.s + 0.5) * map.extent.cell_dy()};

          bool occluded = false;
          for (const auto& occ : rec.occluders) {
            if (segment_hits_box(origin, hit, occ.box, occ.pose)) {
              occluded = true;
              break;
            }
          }

          int cls = 0;
          {
            const double* p = rendered.data.data() + pix * kNumClasses;
            for (int ch = 1; ch < kNumClasses; ++ch)
              if (p[ch] > p[cls]) cls = ch;
          }
          if (with_noise && noise.uniform() < raw.label_flip_prob) {
            cls = static_cast<int>(
                (cls + 1 + noise.uniform_int(0, kNumClasses - 2)) % kNumClasses);
          }
          if (!occluded) {
            gt_cp.data[pix * kNumClasses + cls] = 1.0;
            rec.mask.mask[pix] = 1;
          }
          // Occluded pixels stay all-zero: the marking behind the object is
          // not observable, so neither supervision nor model input sees it.
        }
      }
    }
    rec.gt_cp = std::move(gt_cp);
    rec.set_bev_gt(gt_onehot, raw.gt_labels[t]);
  }
  return frames;
}

std::vector<FrameRecord> build_frames(const WorldMap& world,
                                      const std::vector<TrajectoryFrame>& traj,
                                      const CameraRig& rig,
                                      const SamplingMap& map,
                                      const std::vector<OccluderTrack>& occ,
                                      const GroundExtent& extent,
                                      std::uint64_t noise_seed,
                                      double label_flip_prob) {
  SequenceRaw raw;
  raw.noise_seed = noise_seed;
  raw.label_flip_prob = label_flip_prob;
  raw.trajectory = traj;
  raw.occluders = occ;
  raw.gt_labels.reserve(traj.size());
  for (const auto& frame : traj)
    raw.gt_labels.push_back(crop_world_labels(world, frame.pose, extent));
  return materialize_frames(raw, rig, map);
}

}  // namespace bevreproj
