#include "bevreproj/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace bevreproj {

namespace {

using nlohmann::json;

json train_config_to_json(const TrainConfig& c) {
  json j;
  j["phase"] = c.phase == Phase::pretrain ? "pretrain" : "finetune";
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lambda_temp"] = c.lambda_temp;
  j["label_fraction"] = c.label_fraction;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["snapshot_every"] = c.snapshot_every;
  j["model"] = {{"n_classes", c.model.n_classes},
                {"latent_channels", c.model.latent_channels},
                {"hidden_channels", c.model.hidden_channels},
                {"refine_layers", c.model.refine_layers}};
  j["dataset_dir"] = c.dataset_dir.string();
  j["checkpoint_in"] = c.checkpoint_in.string();
  j["checkpoint_out"] = c.checkpoint_out.string();
  j["loss_csv"] = c.loss_csv.string();
  j["snapshot_dir"] = c.snapshot_dir.string();
  return j;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr >= 0)) throw ConfigError("lr must be >= 0");
  if (!(label_fraction > 0.0) || label_fraction > 1.0)
    throw ConfigError("label_fraction must be in (0, 1]");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid config " + path.string() + ": " + e.what());
  }
  TrainConfig c;
  try {
    const auto phase = j.value("phase", std::string("pretrain"));
    if (phase == "pretrain")
      c.phase = Phase::pretrain;
    else if (phase == "finetune")
      c.phase = Phase::finetune;
    else
      throw ConfigError("unknown phase: " + phase);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.lambda_temp = j.value("lambda_temp", c.lambda_temp);
    c.label_fraction = j.value("label_fraction", c.label_fraction);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model.n_classes = m.value("n_classes", c.model.n_classes);
      c.model.latent_channels =
          m.value("latent_channels", c.model.latent_channels);
      c.model.hidden_channels =
          m.value("hidden_channels", c.model.hidden_channels);
      c.model.refine_layers = m.value("refine_layers", c.model.refine_layers);
    }
    c.dataset_dir = j.value("dataset_dir", std::string());
    c.checkpoint_in = j.value("checkpoint_in", std::string());
    c.checkpoint_out = j.value("checkpoint_out", std::string());
    c.loss_csv = j.value("loss_csv", std::string());
    c.snapshot_dir = j.value("snapshot_dir", std::string());
  } catch (const json::exception& e) {
    throw ConfigError("invalid config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

void save_train_config(const std::filesystem::path& path,
                       const TrainConfig& config) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config " + path.string());
  os << train_config_to_json(config).dump(2) << "\n";
}

std::uint64_t train_config_hash(const TrainConfig& config) {
  return fnv1a64(train_config_to_json(config).dump());
}

double TrainStats::initial_loss_t() const {
  return log.empty() ? 0.0 : log.front().loss_t;
}

double TrainStats::final_loss_t() const {
  if (log.empty()) return 0.0;
  const std::size_t tail = std::min<std::size_t>(10, log.size());
  double sum = 0.0;
  for (std::size_t i = log.size() - tail; i < log.size(); ++i)
    sum += log[i].loss_t;
  return sum / static_cast<double>(tail);
}

namespace {

// Deterministic Fisher-Yates shuffle with the project RNG.
void shuffle_ids(std::vector<int>& ids, Rng& rng) {
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(ids[i - 1], ids[j]);
  }
}

// Endless epoch-shuffled sequence id source.
class SequenceFeeder {
 public:
  SequenceFeeder(std::vector<int> ids, std::uint64_t seed)
      : ids_(std::move(ids)), rng_(mix_seed(seed, fnv1a64("feeder"))) {
    if (ids_.empty()) throw ConfigError("no sequences to train on");
    shuffle_ids(ids_, rng_);
  }

  int next() {
    if (pos_ >= ids_.size()) {
      shuffle_ids(ids_, rng_);
      pos_ = 0;
    }
    return ids_[pos_++];
  }

 private:
  std::vector<int> ids_;
  Rng rng_;
  std::size_t pos_ = 0;
};

struct Stream {
  std::vector<FrameRecord> frames;
  int frame = 0;
  LatentBev latent;
};

class LossCsvWriter {
 public:
  LossCsvWriter(const std::filesystem::path& path, int n_cameras) {
    if (path.empty()) return;
    if (path.has_parent_path())
      std::filesystem::create_directories(path.parent_path());
    os_.open(path, std::ios::app);
    if (!os_) throw IoError("cannot open loss csv " + path.string());
    if (os_.tellp() == 0) {
      os_ << "step,loss_t,loss_tm1";
      for (int c = 0; c < n_cameras; ++c) os_ << ",n_eff_cam" << c;
      os_ << "\n";
    }
  }

  void row(const LossLogRow& r) {
    if (!os_.is_open()) return;
    os_ << r.step << "," << r.loss_t << "," << r.loss_tm1;
    for (const auto n : r.n_effective_per_camera) os_ << "," << n;
    os_ << "\n";
  }

 private:
  std::ofstream os_;
};

void maybe_snapshot(const TrainConfig& cfg, long step, const BevGrid& pred) {
  if (cfg.snapshot_every <= 0 || cfg.snapshot_dir.empty()) return;
  if (step % cfg.snapshot_every != 0) return;
  std::filesystem::create_directories(cfg.snapshot_dir);
  std::ostringstream name;
  name << "pred_bev_" << step << ".ppm";
  write_grid_ppm(cfg.snapshot_dir / name.str(), pred);
}

}  // namespace

std::vector<int> finetune_sequence_subset(int n_sequences, double fraction,
                                          std::uint64_t seed) {
  std::vector<int> ids(n_sequences);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(mix_seed(seed, fnv1a64("label_subset")));
  shuffle_ids(ids, rng);
  const int keep = std::max(
      1, static_cast<int>(std::ceil(fraction * static_cast<double>(n_sequences))));
  ids.resize(std::min(keep, n_sequences));
  std::sort(ids.begin(), ids.end());
  return ids;
}

TrainStats pretrain(const TrainConfig& config, const Dataset& dataset,
                    LiftModel& model, Adam& adam) {
  config.validate();
  set_thread_count(config.threads);
  const int n_frames = dataset.config.n_frames;

  std::vector<int> all_ids(dataset.sequences.size());
  std::iota(all_ids.begin(), all_ids.end(), 0);
  SequenceFeeder feeder(all_ids, config.seed);

  std::vector<Stream> streams(config.batch_size);
  // Materialization happens outside the guard: generating the
  // camera-perspective supervision is the (synthetic) pseudo-labeler, not
  // the training loop.
  for (auto& st : streams) {
    st.frames = dataset.materialize(feeder.next());
    st.frame = 0;
  }

  TrainStats stats;
  LossCsvWriter csv(config.loss_csv, dataset.map.n_cameras);
  auto params = model.param_blobs();

  for (long step = 1; step <= config.steps; ++step) {
    // Advance exhausted streams to fresh sequences.
    for (auto& st : streams) {
      if (st.frame >= n_frames) {
        st.frames = dataset.materialize(feeder.next());
        st.frame = 0;
        st.latent = LatentBev{};
      }
    }

    ModelGrads grads = model.zero_grads();
    LossLogRow row;
    row.step = step;
    row.n_effective_per_camera.assign(dataset.map.n_cameras, 0);
    BevGrid snapshot_pred;

    {
      GtAccessGuard guard;
      for (std::size_t s = 0; s < streams.size(); ++s) {
        Stream& st = streams[s];
        if (st.frame == 0) {
          // Prime the recurrent latent on the first frame; no loss.
          const FrameRecord& f0 = st.frames[0];
          auto fwd = model.forward(f0.gt_cp, f0.mask, dataset.map, nullptr,
                                   f0.motion);
          st.latent = std::move(fwd.latent);
          st.frame = 1;
        }
        const FrameRecord& cur = st.frames[st.frame];
        const FrameRecord& prev = st.frames[st.frame - 1];
        auto fwd = model.forward(cur.gt_cp, cur.mask, dataset.map, &st.latent,
                                 cur.motion);
        auto tl = temporal_loss(fwd.latent, cur.motion, model.head(),
                                dataset.map, cur.gt_cp, prev.gt_cp, cur.mask,
                                prev.mask, config.lambda_temp);
        ModelGrads g = model.backward(fwd, tl.grad_latent);
        g.head = std::move(tl.grad_head);
        grads.add_scaled(g, 1.0);

        row.loss_t += tl.loss_t.value;
        row.loss_tm1 += tl.loss_tm1.value;
        const auto per_cam = cur.mask.count_per_camera();
        for (std::size_t c = 0; c < per_cam.size(); ++c)
          row.n_effective_per_camera[c] += per_cam[c];

        st.latent = std::move(fwd.latent);  // detached recurrence
        ++st.frame;
        if (s == 0) snapshot_pred = std::move(fwd.pred_logits);
      }
    }

    const double inv_b = 1.0 / static_cast<double>(config.batch_size);
    grads.scale(inv_b);
    row.loss_t *= inv_b;
    row.loss_tm1 *= inv_b;
    adam.step(params, model.grad_blobs(grads));

    csv.row(row);
    stats.log.push_back(row);
    maybe_snapshot(config, step, snapshot_pred);
  }
  return stats;
}

TrainStats finetune(const TrainConfig& config, const Dataset& dataset,
                    LiftModel& model, Adam& adam) {
  config.validate();
  set_thread_count(config.threads);
  const int n_frames = dataset.config.n_frames;

  const auto subset =
      finetune_sequence_subset(static_cast<int>(dataset.sequences.size()),
                               config.label_fraction, config.seed);
  SequenceFeeder feeder(subset, config.seed);

  std::vector<Stream> streams(config.batch_size);
  for (auto& st : streams) st.frames = dataset.materialize(feeder.next());

  TrainStats stats;
  LossCsvWriter csv(config.loss_csv, dataset.map.n_cameras);
  auto params = model.param_blobs();

  for (long step = 1; step <= config.steps; ++step) {
    ModelGrads grads = model.zero_grads();
    LossLogRow row;
    row.step = step;
    row.n_effective_per_camera.assign(dataset.map.n_cameras, 0);
    BevGrid snapshot_pred;

    for (std::size_t s = 0; s < streams.size(); ++s) {
      Stream& st = streams[s];
      if (st.frame >= n_frames) {
        st.frames = dataset.materialize(feeder.next());
        st.frame = 0;
        st.latent = LatentBev{};
      }
      const FrameRecord& cur = st.frames[st.frame];
      const LatentBev* prev = st.frame == 0 ? nullptr : &st.latent;
      auto fwd =
          model.forward(cur.gt_cp, cur.mask, dataset.map, prev, cur.motion);

      auto loss = grid_reconstruction_loss(fwd.pred_logits, cur.bev_gt());
      auto [grad_latent, grad_head] = model.head().vjp(fwd.latent, loss.grad);
      ModelGrads g = model.backward(fwd, grad_latent);
      g.head = std::move(grad_head);
      grads.add_scaled(g, 1.0);

      row.loss_t += loss.loss.value;
      st.latent = std::move(fwd.latent);
      ++st.frame;
      if (s == 0) snapshot_pred = std::move(fwd.pred_logits);
    }

    const double inv_b = 1.0 / static_cast<double>(config.batch_size);
    grads.scale(inv_b);
    row.loss_t *= inv_b;
    adam.step(params, model.grad_blobs(grads));

    csv.row(row);
    stats.log.push_back(row);
    maybe_snapshot(config, step, snapshot_pred);
  }
  return stats;
}

std::vector<std::uint8_t> visible_cells(const SamplingMap& map) {
  const auto cov = cell_coverage(map, {});
  std::vector<std::uint8_t> out(cov.size(), 0);
  for (std::size_t i = 0; i < cov.size(); ++i) out[i] = cov[i] > 0.0 ? 1 : 0;
  return out;
}

std::vector<std::uint8_t> occlusion_shadow_cells(
    const SamplingMap& map, const std::vector<double>& base_coverage,
    const SupervisionMask& mask) {
  const auto retained = cell_coverage(map, mask.mask);
  std::vector<std::uint8_t> out(base_coverage.size(), 0);
  for (std::size_t i = 0; i < base_coverage.size(); ++i)
    out[i] =
        (base_coverage[i] >= 0.5 && retained[i] <= 0.1 * base_coverage[i]) ? 1
                                                                           : 0;
  return out;
}

EvalResult evaluate(const Dataset& dataset, const LiftModel& model,
                    std::vector<int> sequence_ids, bool occluded_cells_report) {
  if (sequence_ids.empty()) {
    sequence_ids.resize(dataset.sequences.size());
    std::iota(sequence_ids.begin(), sequence_ids.end(), 0);
  }
  const int n_classes = model.config().n_classes;
  IoUAccumulator acc(nested_bands(dataset.config.extent), n_classes,
                     class_names());
  IoUAccumulator acc_occ(nested_bands(dataset.config.extent), n_classes,
                         class_names());
  const auto base_coverage = cell_coverage(dataset.map, {});

  EvalResult result;
  for (const int id : sequence_ids) {
    const auto frames = dataset.materialize(id);
    LatentBev latent;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const FrameRecord& cur = frames[t];
      const LatentBev* prev = t == 0 ? nullptr : &latent;
      auto fwd =
          model.forward(cur.gt_cp, cur.mask, dataset.map, prev, cur.motion);
      const LabelGrid pred = argmax_labels(fwd.pred_logits);
      acc.add(pred, cur.bev_gt_labels());
      if (occluded_cells_report) {
        const auto shadow =
            occlusion_shadow_cells(dataset.map, base_coverage, cur.mask);
        acc_occ.add_masked(pred, cur.bev_gt_labels(), shadow);
      }
      latent = std::move(fwd.latent);
      ++result.frames;
    }
  }
  result.report = acc.report();
  result.occluded_report = acc_occ.report();
  return result;
}

FreeBevResult fit_free_bev(const SamplingMap& map, const CameraImageStack& gt,
                           const SupervisionMask& mask, int steps, double lr) {
  FreeBevResult out;
  out.grid = BevGrid::zeros(map.extent, gt.channels, GridSemantics::logits);
  AdamConfig acfg;
  acfg.lr = lr;
  Adam adam(acfg);
  std::vector<std::pair<std::string, std::vector<double>*>> params = {
      {"bev", &out.grid.data}};
  for (int step = 0; step < steps; ++step) {
    const CameraImageStack pred = render(out.grid, map);
    auto recon = reconstruction_loss(pred, gt, mask);
    const BevGrid grad = render_vjp(recon.grad, map);
    out.loss_history.push_back(recon.loss.value);
    std::vector<std::pair<std::string, const std::vector<double>*>> grads = {
        {"bev", &grad.data}};
    adam.step(params, grads);
  }
  return out;
}

Checkpoint make_checkpoint(const LiftModel& model, const Adam& adam,
                           std::uint64_t step, std::uint64_t config_hash) {
  Checkpoint ck;
  ck.step = step;
  ck.config_hash = config_hash;
  model.save(ck);
  adam.save(ck);
  return ck;
}

void restore_checkpoint(const Checkpoint& ck, LiftModel& model, Adam& adam) {
  model.load(ck);
  adam.load(ck);
}

}  // namespace bevreproj
