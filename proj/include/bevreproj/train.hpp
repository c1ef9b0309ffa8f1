#pragma once

#include <filesystem>
#include <optional>

#include "bevreproj/dataset.hpp"
#include "bevreproj/metrics.hpp"
#include "bevreproj/model.hpp"
#include "bevreproj/optim.hpp"

namespace bevreproj {

enum class Phase { pretrain, finetune };

struct TrainConfig {
  Phase phase = Phase::pretrain;
  int steps = 3000;
  int batch_size = 4;
  double lr = 1e-3;
  double lambda_temp = 1.0;
  double label_fraction = 0.5;  // fine-tune sequence subsampling
  std::uint64_t seed = 1;
  int threads = 1;
  int snapshot_every = 0;
  ModelConfig model;
  std::filesystem::path dataset_dir;
  std::filesystem::path checkpoint_in;
  std::filesystem::path checkpoint_out;
  std::filesystem::path loss_csv;
  std::filesystem::path snapshot_dir;

  void validate() const;
};

TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const std::filesystem::path& path,
                       const TrainConfig& config);
std::uint64_t train_config_hash(const TrainConfig& config);

struct LossLogRow {
  long step = 0;
  double loss_t = 0;
  double loss_tm1 = 0;
  std::vector<long> n_effective_per_camera;
};

struct TrainStats {
  std::vector<LossLogRow> log;

  double initial_loss_t() const;
  double final_loss_t() const;  // mean over the last few steps
};

// Self-supervised phase: temporal reconstruction loss on camera-perspective
// pseudo ground truth. Runs entirely under a GtAccessGuard; any read of BEV
// ground truth aborts the run.
TrainStats pretrain(const TrainConfig& config, const Dataset& dataset,
                    LiftModel& model, Adam& adam);

// Supervised phase: cross-entropy against BEV ground truth on a
// deterministic, seed-subsampled fraction of the sequences.
TrainStats finetune(const TrainConfig& config, const Dataset& dataset,
                    LiftModel& model, Adam& adam);

// The sequence ids a fine-tune run with this fraction/seed trains on.
std::vector<int> finetune_sequence_subset(int n_sequences, double fraction,
                                          std::uint64_t seed);

struct EvalResult {
  IoUReport report;
  IoUReport occluded_report;  // counts restricted to occlusion-shadow cells
  long frames = 0;
};

// Runs the model over the listed sequences and aggregates exact IoU counts
// over the nested range bands; empty ids means all sequences.
EvalResult evaluate(const Dataset& dataset, const LiftModel& model,
                    std::vector<int> sequence_ids = {},
                    bool occluded_cells_report = false);

// Cells that receive any positive splat weight from valid pixels.
std::vector<std::uint8_t> visible_cells(const SamplingMap& map);

// Cells with solid camera support (coverage >= 0.5) that lose at least 90%
// of it to occluders in this frame's supervision mask.
std::vector<std::uint8_t> occlusion_shadow_cells(
    const SamplingMap& map, const std::vector<double>& base_coverage,
    const SupervisionMask& mask);

struct FreeBevResult {
  BevGrid grid;  // optimized logits
  std::vector<double> loss_history;
};

// Optimizes a free BEV logit grid directly against one frame's rendered
// supervision (no model); the basic self-supervision probe.
FreeBevResult fit_free_bev(const SamplingMap& map, const CameraImageStack& gt,
                           const SupervisionMask& mask, int steps, double lr);

Checkpoint make_checkpoint(const LiftModel& model, const Adam& adam,
                           std::uint64_t step, std::uint64_t config_hash);
void restore_checkpoint(const Checkpoint& ck, LiftModel& model, Adam& adam);

}  // namespace bevreproj
