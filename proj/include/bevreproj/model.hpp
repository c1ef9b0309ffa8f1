#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bevreproj/io.hpp"
#include "bevreproj/loss.hpp"
#include "bevreproj/synth.hpp"

namespace bevreproj {

// Minimal dense (rows, cols, channels) array used inside the model.
struct Tensor {
  int rows = 0, cols = 0, channels = 0;
  std::vector<double> v;

  static Tensor zeros(int rows, int cols, int channels);

  std::size_t index(int i, int j, int ch) const {
    return (static_cast<std::size_t>(i) * cols + j) * channels + ch;
  }
  double& at(int i, int j, int ch) { return v[index(i, j, ch)]; }
  double at(int i, int j, int ch) const { return v[index(i, j, ch)]; }
};

// 3x3 same-padding convolution layer.
struct ConvLayer {
  int in_channels = 0, out_channels = 0;
  std::vector<double> weight;  // [3][3][in][out]
  std::vector<double> bias;    // [out]
};

struct ConvGrads {
  std::vector<double> weight;
  std::vector<double> bias;
};

Tensor conv3x3(const Tensor& in, const ConvLayer& layer);
// Returns d(in); accumulates parameter gradients into grads.
Tensor conv3x3_vjp(const Tensor& in, const ConvLayer& layer,
                   const Tensor& d_out, ConvGrads& grads);

// Fixed geometric lift: scatters every selected pixel's channel vector into
// the BEV through the transposed bilinear weights, normalizes by the
// accumulated weight and appends a coverage channel w/(1+w). Output has
// images.channels + 1 channels. Deterministic for any thread count.
Tensor splat_to_bev(const CameraImageStack& images,
                    const std::vector<std::uint8_t>& pixel_mask,
                    const SamplingMap& map);

// Total splat weight per cell (the coverage measure used for visibility and
// occlusion masks). pixel_mask may be empty to use the map validity alone.
std::vector<double> cell_coverage(const SamplingMap& map,
                                  const std::vector<std::uint8_t>& pixel_mask);

struct ModelConfig {
  int n_classes = kNumClasses;
  int latent_channels = 8;
  int hidden_channels = 16;
  int refine_layers = 2;  // 3x3 conv + tanh each; last layer emits the latent
};

struct ModelGrads {
  std::vector<ConvGrads> refine;
  SegHeadGrad head;

  void add_scaled(const ModelGrads& o, double scale);
  void scale(double s);
};

// Camera-to-BEV lifting model: fixed geometric splat of the camera class
// images, concatenated with the ego-motion-warped previous latent, refined
// by a small conv stack into the new latent, decoded by a shared linear
// head into class logits.
class LiftModel {
 public:
  LiftModel(const ModelConfig& config, const GroundExtent& extent,
            std::uint64_t seed);

  struct Forward {
    BevGrid pred_logits;
    LatentBev latent;
    // Saved context for the backward pass.
    Tensor input;
    std::vector<Tensor> activations;  // post-tanh outputs per layer
  };

  // prev_latent may be null (zeros). The previous latent is treated as a
  // constant input: recurrence is truncated at the frame boundary.
  Forward forward(const CameraImageStack& images, const SupervisionMask& pixels,
                  const SamplingMap& map, const LatentBev* prev_latent,
                  const EgoMotion2D& motion) const;

  // Backward of the refinement stack from a latent cotangent. Head gradients
  // come from the loss (reconstruction or temporal) and are merged by the
  // caller into ModelGrads::head.
  ModelGrads backward(const Forward& fwd, const LatentBev& grad_latent) const;

  ModelGrads zero_grads() const;

  const ModelConfig& config() const { return config_; }
  const GroundExtent& extent() const { return extent_; }
  SegHead& head() { return head_; }
  const SegHead& head() const { return head_; }
  int input_channels() const;
  std::size_t parameter_count() const;

  std::vector<std::pair<std::string, std::vector<double>*>> param_blobs();
  std::vector<std::pair<std::string, const std::vector<double>*>> grad_blobs(
      const ModelGrads& grads) const;

  void save(Checkpoint& ck) const;
  void load(const Checkpoint& ck);

 private:
  ModelConfig config_;
  GroundExtent extent_;
  std::vector<ConvLayer> refine_;
  SegHead head_;
};

}  // namespace bevreproj
