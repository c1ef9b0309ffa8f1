#include "bevreproj/loss.hpp"

#include <algorithm>
#include <cmath>

namespace bevreproj {

SupervisionMask SupervisionMask::all_valid(const CameraImageStack& stack) {
  SupervisionMask m;
  m.n_cameras = stack.n_cameras;
  m.height = stack.height;
  m.width = stack.width;
  m.mask = stack.valid;
  return m;
}

SupervisionMask SupervisionMask::none(int n_cameras, int height, int width) {
  SupervisionMask m;
  m.n_cameras = n_cameras;
  m.height = height;
  m.width = width;
  m.mask.assign(static_cast<std::size_t>(n_cameras) * height * width, 0);
  return m;
}

long SupervisionMask::count() const {
  return std::count_if(mask.begin(), mask.end(),
                       [](std::uint8_t b) { return b != 0; });
}

std::vector<long> SupervisionMask::count_per_camera() const {
  std::vector<long> out(n_cameras, 0);
  const std::size_t per_cam = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < n_cameras; ++c)
    out[c] = std::count_if(mask.begin() + c * per_cam,
                           mask.begin() + (c + 1) * per_cam,
                           [](std::uint8_t b) { return b != 0; });
  return out;
}

namespace {

// Shared cross-entropy kernel over flattened items. Writes the gradient
// (softmax - onehot) / n_effective into grad for selected items and returns
// the mean negative log-likelihood.
double cross_entropy_core(const double* pred, const double* gt,
                          const std::uint8_t* select, std::size_t n_items,
                          int channels, long n_effective, double* grad) {
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n_effective);
  for (std::size_t item = 0; item < n_items; ++item) {
    if (select && !select[item]) continue;
    const double* x = pred + item * channels;
    const double* g = gt + item * channels;
    double m = x[0];
    for (int ch = 1; ch < channels; ++ch) m = std::max(m, x[ch]);
    double z = 0.0;
    for (int ch = 0; ch < channels; ++ch) z += std::exp(x[ch] - m);
    const double log_z = std::log(z);
    double nll = 0.0;
    double* gout = grad + item * channels;
    for (int ch = 0; ch < channels; ++ch) {
      const double log_p = x[ch] - m - log_z;
      nll -= g[ch] * log_p;
      gout[ch] = (std::exp(log_p) - g[ch]) * inv_n;
    }
    total += nll;
  }
  return total * inv_n;
}

}  // namespace

ReconstructionLossResult reconstruction_loss(const CameraImageStack& pred_logits,
                                             const CameraImageStack& gt_onehot,
                                             const SupervisionMask& mask) {
  require_shape(pred_logits.same_shape(gt_onehot),
                "prediction and ground-truth stacks differ in shape");
  require_shape(mask.same_shape(pred_logits),
                "supervision mask does not match the image stack");
  const long n_eff = mask.count();
  if (n_eff == 0)
    throw EmptyMaskError("supervision mask selects no pixels");

  ReconstructionLossResult out;
  out.grad = CameraImageStack::zeros(pred_logits.n_cameras, pred_logits.height,
                                     pred_logits.width, pred_logits.channels,
                                     GridSemantics::logits);
  out.grad.valid = pred_logits.valid;
  out.loss.n_effective = n_eff;
  out.loss.value = cross_entropy_core(
      pred_logits.data.data(), gt_onehot.data.data(), mask.mask.data(),
      pred_logits.pixel_count(), pred_logits.channels, n_eff,
      out.grad.data.data());
  return out;
}

GridLossResult grid_reconstruction_loss(const BevGrid& pred_logits,
                                        const BevGrid& gt_onehot) {
  require_shape(pred_logits.extent == gt_onehot.extent &&
                    pred_logits.channels == gt_onehot.channels,
                "prediction and ground-truth grids differ in shape");
  GridLossResult out;
  out.grad = BevGrid::zeros(pred_logits.extent, pred_logits.channels,
                            GridSemantics::logits);
  const long n_eff = static_cast<long>(pred_logits.cell_count());
  out.loss.n_effective = n_eff;
  out.loss.value = cross_entropy_core(
      pred_logits.data.data(), gt_onehot.data.data(), nullptr,
      pred_logits.cell_count(), pred_logits.channels, n_eff,
      out.grad.data.data());
  return out;
}

TemporalLossResult temporal_loss(const LatentBev& latent,
                                 const EgoMotion2D& motion, const SegHead& head,
                                 const SamplingMap& map,
                                 const CameraImageStack& gt_t,
                                 const CameraImageStack& gt_tm1,
                                 const SupervisionMask& mask_t,
                                 const SupervisionMask& mask_tm1,
                                 double lambda_temp) {
  // Current branch.
  const BevGrid logits_t = head.apply(latent);
  const CameraImageStack cp_t = render(logits_t, map);
  auto recon_t = reconstruction_loss(cp_t, gt_t, mask_t);

  // Previous-frame branch from the warped latent, same head.
  const LatentBev latent_tm1 = warp_ego_motion(latent, motion);
  const BevGrid logits_tm1 = head.apply(latent_tm1);
  const CameraImageStack cp_tm1 = render(logits_tm1, map);
  auto recon_tm1 = reconstruction_loss(cp_tm1, gt_tm1, mask_tm1);

  // Backward: render -> head for both branches, warp adjoint on the second.
  const BevGrid g_logits_t = render_vjp(recon_t.grad, map);
  auto [g_latent_t, g_head_t] = head.vjp(latent, g_logits_t);

  const BevGrid g_logits_tm1 = render_vjp(recon_tm1.grad, map);
  auto [g_latent_w, g_head_tm1] = head.vjp(latent_tm1, g_logits_tm1);
  const LatentBev g_latent_tm1 = warp_ego_motion_vjp(g_latent_w, motion);

  TemporalLossResult out;
  out.loss_t = recon_t.loss;
  out.loss_tm1 = recon_tm1.loss;
  out.grad_latent = g_latent_t;
  for (std::size_t i = 0; i < out.grad_latent.data.size(); ++i)
    out.grad_latent.data[i] += lambda_temp * g_latent_tm1.data[i];
  out.grad_head = g_head_t;
  out.grad_head.add_scaled(g_head_tm1, lambda_temp);
  return out;
}

double total_pretrain_loss(double loss_t, double loss_tm1, double lambda_temp) {
  return loss_t + lambda_temp * loss_tm1;
}

}  // namespace bevreproj
