#pragma once

#include <cstdint>
#include <vector>

#include "bevreproj/renderer.hpp"
#include "bevreproj/seg_head.hpp"

namespace bevreproj {

// Mean cross-entropy in nats per supervised pixel plus the pixel count that
// entered the denominator.
struct LossValue {
  double value = 0;
  long n_effective = 0;
};

// Selects the pixels that contribute to the reconstruction loss. Must be a
// subset of the render validity mask; construction in the synthetic data
// pipeline guarantees that.
struct SupervisionMask {
  int n_cameras = 0, height = 0, width = 0;
  std::vector<std::uint8_t> mask;

  static SupervisionMask all_valid(const CameraImageStack& stack);
  static SupervisionMask none(int n_cameras, int height, int width);

  std::size_t index(int cam, int v, int u) const {
    return (static_cast<std::size_t>(cam) * height + v) * width + u;
  }
  bool at(int cam, int v, int u) const { return mask[index(cam, v, u)] != 0; }
  void set(int cam, int v, int u, bool on) {
    mask[index(cam, v, u)] = on ? 1 : 0;
  }
  long count() const;
  std::vector<long> count_per_camera() const;
  bool same_shape(const CameraImageStack& s) const {
    return n_cameras == s.n_cameras && height == s.height && width == s.width;
  }
};

struct ReconstructionLossResult {
  LossValue loss;
  // d(loss)/d(pred logits); zero outside the supervision mask.
  CameraImageStack grad;
};

// Pixel-wise cross-entropy over masked pixels:
//   value = mean over mask of -sum_ch gt * log_softmax(pred)
//   grad  = (softmax(pred) - gt) / n_effective on masked pixels.
// Throws EmptyMaskError when the mask selects no pixel.
ReconstructionLossResult reconstruction_loss(const CameraImageStack& pred_logits,
                                             const CameraImageStack& gt_onehot,
                                             const SupervisionMask& mask);

// Same cross-entropy applied to a BEV grid pair over all cells (used by the
// supervised fine-tuning phase).
struct GridLossResult {
  LossValue loss;
  BevGrid grad;
};
GridLossResult grid_reconstruction_loss(const BevGrid& pred_logits,
                                        const BevGrid& gt_onehot);

struct TemporalLossResult {
  LossValue loss_t;
  LossValue loss_tm1;
  // Gradient of loss_t + lambda_temp * loss_tm1 through both branches.
  LatentBev grad_latent;
  SegHeadGrad grad_head;
};

// Two-branch reconstruction loss: the latent is decoded and rendered for the
// current frame, then warped by the ego motion, decoded with the SAME head
// and rendered again for the previous frame. Returns both losses and the
// combined gradient (t-1 branch weighted by lambda_temp).
TemporalLossResult temporal_loss(const LatentBev& latent,
                                 const EgoMotion2D& motion, const SegHead& head,
                                 const SamplingMap& map,
                                 const CameraImageStack& gt_t,
                                 const CameraImageStack& gt_tm1,
                                 const SupervisionMask& mask_t,
                                 const SupervisionMask& mask_tm1,
                                 double lambda_temp = 1.0);

// Pretraining objective: L_t + lambda_temp * L_tm1. lambda_temp = 0 disables
// the temporal branch.
double total_pretrain_loss(double loss_t, double loss_tm1, double lambda_temp);

}  // namespace bevreproj
