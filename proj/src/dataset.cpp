#include "bevreproj/dataset.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "bevreproj/io.hpp"

namespace bevreproj {

namespace {

using nlohmann::json;

std::string seq_dir_name(int index) {
  std::ostringstream os;
  os << "seq_" << std::setw(3) << std::setfill('0') << index;
  return os.str();
}

std::string frame_file_name(int index) {
  std::ostringstream os;
  os << "frame_" << std::setw(3) << std::setfill('0') << index << ".bvg";
  return os.str();
}

json pose_to_json(const Pose2D& p) { return json{p.x, p.y, p.yaw}; }

Pose2D pose_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

DatasetConfig DatasetConfig::desk_default() {
  DatasetConfig cfg;
  cfg.seed = 1;
  cfg.n_sequences = 64;
  cfg.n_frames = 12;
  cfg.image_width = 256;
  cfg.image_height = 144;
  cfg.extent = GroundExtent::create(-30.0, 30.0, -15.0, 15.0, 96, 96);
  cfg.scene.extent = cfg.extent;
  cfg.scene.marking_width = 0.7;
  cfg.trajectory.curvature = cfg.scene.curvature;
  cfg.trajectory.path_length = cfg.scene.path_length;
  return cfg;
}

void DatasetConfig::validate() const {
  if (n_sequences < 1) throw InvalidSpecError("n_sequences must be >= 1");
  if (n_frames < 2) throw InvalidSpecError("n_frames must be >= 2");
  if (image_width < 8 || image_height < 8)
    throw InvalidSpecError("image size too small");
  SceneSpec s = scene;
  s.extent = extent;
  s.seed = seed;
  s.validate();
  if (trajectory.curvature != scene.curvature ||
      trajectory.path_length != scene.path_length)
    throw InvalidSpecError(
        "trajectory curvature/path_length must match the scene so that both "
        "follow the same guide path");
}

SequenceRaw generate_sequence(const DatasetConfig& config, int index) {
  const std::uint64_t seq_seed = mix_seed(config.seed, index);
  SceneSpec spec = config.scene;
  spec.seed = seq_seed;
  spec.extent = config.extent;

  const WorldMap world = generate_scene(spec);
  const auto trajectory =
      generate_trajectory(seq_seed, config.n_frames, config.trajectory);
  const auto occluders = generate_occluders(mix_seed(seq_seed, fnv1a64("occ")),
                                            trajectory, spec, config.occluders);

  SequenceRaw raw;
  raw.seed = seq_seed;
  raw.noise_seed = mix_seed(seq_seed, fnv1a64("noise"));
  raw.label_flip_prob = spec.label_flip_prob;
  raw.trajectory = trajectory;
  raw.occluders = occluders;
  raw.gt_labels.reserve(trajectory.size());
  for (const auto& frame : trajectory)
    raw.gt_labels.push_back(
        crop_world_labels(world, frame.pose, config.extent));
  return raw;
}

std::vector<FrameRecord> Dataset::materialize(int sequence_index) const {
  return materialize_frames(sequences.at(sequence_index), rig, map);
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.rig = default_surround_rig(config.image_width, config.image_height);
  ds.map = build_sampling_map(ds.rig, config.extent);
  ds.sequences.resize(config.n_sequences);
  parallel_chunks(config.n_sequences, [&](int b, int e) {
    for (int i = b; i < e; ++i) ds.sequences[i] = generate_sequence(config, i);
  });
  return ds;
}

ClassShareCard class_share_card(const Dataset& dataset) {
  std::vector<long long> counts(kNumClasses, 0);
  long long total = 0;
  for (const auto& seq : dataset.sequences) {
    for (const auto& grid : seq.gt_labels) {
      for (const auto id : grid.labels) ++counts.at(id);
      total += static_cast<long long>(grid.labels.size());
    }
  }
  ClassShareCard card;
  for (int c = 0; c < kNumClasses; ++c)
    card.cell_share.push_back(total > 0 ? static_cast<double>(counts[c]) /
                                              static_cast<double>(total)
                                        : 0.0);
  return card;
}

namespace {

json config_to_json(const DatasetConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["n_sequences"] = c.n_sequences;
  j["n_frames"] = c.n_frames;
  j["image_width"] = c.image_width;
  j["image_height"] = c.image_height;
  j["extent"] = {{"x_min", c.extent.x_min}, {"x_max", c.extent.x_max},
                 {"y_min", c.extent.y_min}, {"y_max", c.extent.y_max},
                 {"rows", c.extent.rows},   {"cols", c.extent.cols}};
  j["scene"] = {{"lane_count", c.scene.lane_count},
                {"lane_width", c.scene.lane_width},
                {"marking_width", c.scene.marking_width},
                {"crosswalk_probability", c.scene.crosswalk_probability},
                {"curvature", c.scene.curvature},
                {"label_flip_prob", c.scene.label_flip_prob},
                {"path_length", c.scene.path_length}};
  j["trajectory"] = {{"speed_min_kmh", c.trajectory.speed_min_kmh},
                     {"speed_max_kmh", c.trajectory.speed_max_kmh},
                     {"frame_dt", c.trajectory.frame_dt}};
  j["occluders"] = {{"min_count", c.occluders.min_count},
                    {"max_count", c.occluders.max_count},
                    {"moving_fraction", c.occluders.moving_fraction}};
  return j;
}

DatasetConfig config_from_json(const json& j) {
  DatasetConfig c = DatasetConfig::desk_default();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.n_sequences = j.at("n_sequences").get<int>();
  c.n_frames = j.at("n_frames").get<int>();
  c.image_width = j.at("image_width").get<int>();
  c.image_height = j.at("image_height").get<int>();
  const auto& je = j.at("extent");
  c.extent = GroundExtent::create(
      je.at("x_min").get<double>(), je.at("x_max").get<double>(),
      je.at("y_min").get<double>(), je.at("y_max").get<double>(),
      je.at("rows").get<int>(), je.at("cols").get<int>());
  const auto& js = j.at("scene");
  c.scene.lane_count = js.at("lane_count").get<int>();
  c.scene.lane_width = js.at("lane_width").get<double>();
  c.scene.marking_width = js.at("marking_width").get<double>();
  c.scene.crosswalk_probability = js.at("crosswalk_probability").get<double>();
  c.scene.curvature = js.at("curvature").get<double>();
  c.scene.label_flip_prob = js.at("label_flip_prob").get<double>();
  c.scene.path_length = js.at("path_length").get<double>();
  c.scene.extent = c.extent;
  const auto& jt = j.at("trajectory");
  c.trajectory.speed_min_kmh = jt.at("speed_min_kmh").get<double>();
  c.trajectory.speed_max_kmh = jt.at("speed_max_kmh").get<double>();
  c.trajectory.frame_dt = jt.at("frame_dt").get<double>();
  c.trajectory.curvature = c.scene.curvature;
  c.trajectory.path_length = c.scene.path_length;
  const auto& jo = j.at("occluders");
  c.occluders.min_count = jo.at("min_count").get<int>();
  c.occluders.max_count = jo.at("max_count").get<int>();
  c.occluders.moving_fraction = jo.at("moving_fraction").get<double>();
  return c;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  write_rig(dir / "rig.json", dataset.rig, dataset.config.extent);

  json root;
  root["config"] = config_to_json(dataset.config);
  root["class_names"] = class_names();
  const auto card = class_share_card(dataset);
  root["class_cell_share"] = card.cell_share;
  {
    std::ofstream os(dir / "dataset.json");
    if (!os) throw IoError("cannot write dataset.json");
    os << root.dump(2) << "\n";
  }

  for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
    const auto& seq = dataset.sequences[i];
    const auto seq_dir = dir / seq_dir_name(static_cast<int>(i));
    std::filesystem::create_directories(seq_dir);

    json manifest;
    manifest["seed"] = seq.seed;
    manifest["noise_seed"] = seq.noise_seed;
    manifest["label_flip_prob"] = seq.label_flip_prob;
    for (std::size_t t = 0; t < seq.trajectory.size(); ++t) {
      const auto& fr = seq.trajectory[t];
      json jf;
      jf["file"] = frame_file_name(static_cast<int>(t));
      jf["pose"] = pose_to_json(fr.pose);
      jf["motion"] = {fr.motion.dx, fr.motion.dy, fr.motion.dphi};
      manifest["frames"].push_back(jf);
      write_labels(seq_dir / frame_file_name(static_cast<int>(t)),
                   seq.gt_labels[t]);
    }
    manifest["occluders"] = json::array();
    for (const auto& occ : seq.occluders) {
      json jo;
      jo["length"] = occ.box.length;
      jo["width"] = occ.box.width;
      jo["height"] = occ.box.height;
      for (const auto& p : occ.world_pose) jo["poses"].push_back(pose_to_json(p));
      manifest["occluders"].push_back(jo);
    }
    std::ofstream os(seq_dir / "manifest.json");
    if (!os) throw IoError("cannot write sequence manifest");
    os << manifest.dump(2) << "\n";
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "dataset.json");
  if (!is) throw IoError("cannot open dataset.json in " + dir.string());
  json root;
  try {
    is >> root;
  } catch (const json::exception& e) {
    throw IoError("invalid dataset.json: " + std::string(e.what()));
  }

  Dataset ds;
  ds.config = config_from_json(root.at("config"));
  auto [rig, extent] = read_rig(dir / "rig.json");
  ds.rig = std::move(rig);
  require_shape(extent == ds.config.extent,
                "rig extent does not match dataset config");
  ds.map = build_sampling_map(ds.rig, ds.config.extent);

  ds.sequences.resize(ds.config.n_sequences);
  for (int i = 0; i < ds.config.n_sequences; ++i) {
    const auto seq_dir = dir / seq_dir_name(i);
    std::ifstream ms(seq_dir / "manifest.json");
    if (!ms) throw IoError("missing manifest in " + seq_dir.string());
    json manifest;
    try {
      ms >> manifest;
    } catch (const json::exception& e) {
      throw IoError("invalid manifest: " + std::string(e.what()));
    }
    SequenceRaw& seq = ds.sequences[i];
    seq.seed = manifest.at("seed").get<std::uint64_t>();
    seq.noise_seed = manifest.at("noise_seed").get<std::uint64_t>();
    seq.label_flip_prob = manifest.at("label_flip_prob").get<double>();
    for (const auto& jf : manifest.at("frames")) {
      TrajectoryFrame fr;
      fr.pose = pose_from_json(jf.at("pose"));
      const auto& jm = jf.at("motion");
      fr.motion = {jm.at(0).get<double>(), jm.at(1).get<double>(),
                   jm.at(2).get<double>()};
      seq.trajectory.push_back(fr);
      seq.gt_labels.push_back(
          read_labels(seq_dir / jf.at("file").get<std::string>()));
    }
    for (const auto& jo : manifest.at("occluders")) {
      OccluderTrack track;
      track.box.length = jo.at("length").get<double>();
      track.box.width = jo.at("width").get<double>();
      track.box.height = jo.at("height").get<double>();
      for (const auto& jp : jo.at("poses"))
        track.world_pose.push_back(pose_from_json(jp));
      seq.occluders.push_back(std::move(track));
    }
  }
  return ds;
}

}  // namespace bevreproj
