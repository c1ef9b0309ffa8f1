#include "bevreproj/model.hpp"

#include <algorithm>
#include <cmath>

namespace bevreproj {

Tensor Tensor::zeros(int rows, int cols, int channels) {
  Tensor t;
  t.rows = rows;
  t.cols = cols;
  t.channels = channels;
  t.v.assign(static_cast<std::size_t>(rows) * cols * channels, 0.0);
  return t;
}

Tensor conv3x3(const Tensor& in, const ConvLayer& layer) {
  require_shape(in.channels == layer.in_channels, "conv input channel mismatch");
  Tensor out = Tensor::zeros(in.rows, in.cols, layer.out_channels);
  const int ci = layer.in_channels, co = layer.out_channels;
  parallel_chunks(in.rows, [&](int rb, int re) {
    for (int i = rb; i < re; ++i) {
      for (int j = 0; j < in.cols; ++j) {
        double* y = out.v.data() + out.index(i, j, 0);
        for (int o = 0; o < co; ++o) y[o] = layer.bias[o];
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di;
          if (ii < 0 || ii >= in.rows) continue;
          for (int dj = -1; dj <= 1; ++dj) {
            const int jj = j + dj;
            if (jj < 0 || jj >= in.cols) continue;
            const double* x = in.v.data() + in.index(ii, jj, 0);
            const double* w =
                layer.weight.data() +
                ((static_cast<std::size_t>(di + 1) * 3 + (dj + 1)) * ci) * co;
            for (int c = 0; c < ci; ++c) {
              const double xc = x[c];
              if (xc == 0.0) continue;
              const double* wc = w + static_cast<std::size_t>(c) * co;
              for (int o = 0; o < co; ++o) y[o] += xc * wc[o];
            }
          }
        }
      }
    }
  });
  return out;
}

Tensor conv3x3_vjp(const Tensor& in, const ConvLayer& layer,
                   const Tensor& d_out, ConvGrads& grads) {
  require_shape(d_out.rows == in.rows && d_out.cols == in.cols &&
                    d_out.channels == layer.out_channels,
                "conv vjp shape mismatch");
  Tensor d_in = Tensor::zeros(in.rows, in.cols, in.channels);
  const int ci = layer.in_channels, co = layer.out_channels;
  if (grads.weight.empty()) grads.weight.assign(layer.weight.size(), 0.0);
  if (grads.bias.empty()) grads.bias.assign(layer.bias.size(), 0.0);

  for (int i = 0; i < in.rows; ++i) {
    for (int j = 0; j < in.cols; ++j) {
      const double* dy = d_out.v.data() + d_out.index(i, j, 0);
      for (int o = 0; o < co; ++o) grads.bias[o] += dy[o];
      for (int di = -1; di <= 1; ++di) {
        const int ii = i + di;
        if (ii < 0 || ii >= in.rows) continue;
        for (int dj = -1; dj <= 1; ++dj) {
          const int jj = j + dj;
          if (jj < 0 || jj >= in.cols) continue;
          const double* x = in.v.data() + in.index(ii, jj, 0);
          double* dx = d_in.v.data() + d_in.index(ii, jj, 0);
          const std::size_t w_off =
              ((static_cast<std::size_t>(di + 1) * 3 + (dj + 1)) * ci) * co;
          const double* w = layer.weight.data() + w_off;
          double* gw = grads.weight.data() + w_off;
          for (int c = 0; c < ci; ++c) {
            const double xc = x[c];
            const double* wc = w + static_cast<std::size_t>(c) * co;
            double* gwc = gw + static_cast<std::size_t>(c) * co;
            double acc = 0.0;
            for (int o = 0; o < co; ++o) {
              acc += wc[o] * dy[o];
              gwc[o] += xc * dy[o];
            }
            dx[c] += acc;
          }
        }
      }
    }
  }
  return d_in;
}

Tensor splat_to_bev(const CameraImageStack& images,
                    const std::vector<std::uint8_t>& pixel_mask,
                    const SamplingMap& map) {
  require_shape(images.n_cameras == map.n_cameras &&
                    images.height == map.height && images.width == map.width,
                "image stack does not match the sampling map");
  require_shape(pixel_mask.empty() || pixel_mask.size() == images.pixel_count(),
                "pixel mask size mismatch");
  const int rows = map.extent.rows, cols = map.extent.cols;
  const int c = images.channels;
  const std::size_t cell_stride = static_cast<std::size_t>(c) + 1;
  const std::size_t buf_size =
      static_cast<std::size_t>(rows) * cols * cell_stride;

  // Per-camera accumulation (classes + weight), reduced in camera order.
  std::vector<std::vector<double>> partial(map.n_cameras);
  parallel_chunks(map.n_cameras, [&](int cb, int ce) {
    for (int cam = cb; cam < ce; ++cam) {
      auto& buf = partial[cam];
      buf.assign(buf_size, 0.0);
      for (int v = 0; v < map.height; ++v) {
        for (int u = 0; u < map.width; ++u) {
          const std::size_t pix = images.pixel_index(cam, v, u);
          const auto& smp = map.samples[pix];
          if (!smp.valid) continue;
          if (!pixel_mask.empty() && !pixel_mask[pix]) continue;
          const double* px = images.data.data() + pix * c;
          const double fi = std::floor(smp.r), fj = std::floor(smp.s);
          const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
          const double fr = smp.r - fi, fs = smp.s - fj;
          const double wr[2] = {1.0 - fr, fr};
          const double ws[2] = {1.0 - fs, fs};
          for (int a = 0; a < 2; ++a) {
            const int ii = i0 + a;
            if (ii < 0 || ii >= rows || wr[a] == 0.0) continue;
            for (int b = 0; b < 2; ++b) {
              const int jj = j0 + b;
              if (jj < 0 || jj >= cols || ws[b] == 0.0) continue;
              const double w = wr[a] * ws[b];
              double* cell =
                  buf.data() +
                  (static_cast<std::size_t>(ii) * cols + jj) * cell_stride;
              for (int ch = 0; ch < c; ++ch) cell[ch] += w * px[ch];
              cell[c] += w;
            }
          }
        }
      }
    }
  });

  std::vector<double> acc(buf_size, 0.0);
  for (int cam = 0; cam < map.n_cameras; ++cam) {
    const auto& buf = partial[cam];
    for (std::size_t i = 0; i < buf_size; ++i) acc[i] += buf[i];
  }

  Tensor out = Tensor::zeros(rows, cols, c + 1);
  const std::size_t cells = static_cast<std::size_t>(rows) * cols;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double* a = acc.data() + cell * cell_stride;
    double* y = out.v.data() + cell * (c + 1);
    const double w = a[c];
    if (w > 0.0) {
      const double inv = 1.0 / w;
      for (int ch = 0; ch < c; ++ch) y[ch] = a[ch] * inv;
      y[c] = w / (1.0 + w);
    }
  }
  return out;
}

std::vector<double> cell_coverage(const SamplingMap& map,
                                  const std::vector<std::uint8_t>& pixel_mask) {
  const int rows = map.extent.rows, cols = map.extent.cols;
  std::vector<double> cov(static_cast<std::size_t>(rows) * cols, 0.0);
  const std::size_t n = map.samples.size();
  for (std::size_t pix = 0; pix < n; ++pix) {
    const auto& smp = map.samples[pix];
    if (!smp.valid) continue;
    if (!pixel_mask.empty() && !pixel_mask[pix]) continue;
    const double fi = std::floor(smp.r), fj = std::floor(smp.s);
    const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
    const double fr = smp.r - fi, fs = smp.s - fj;
    const double wr[2] = {1.0 - fr, fr};
    const double ws[2] = {1.0 - fs, fs};
    for (int a = 0; a < 2; ++a) {
      const int ii = i0 + a;
      if (ii < 0 || ii >= rows || wr[a] == 0.0) continue;
      for (int b = 0; b < 2; ++b) {
        const int jj = j0 + b;
        if (jj < 0 || jj >= cols || ws[b] == 0.0) continue;
        cov[static_cast<std::size_t>(ii) * cols + jj] += wr[a] * ws[b];
      }
    }
  }
  return cov;
}

void ModelGrads::add_scaled(const ModelGrads& o, double scale) {
  for (std::size_t l = 0; l < refine.size(); ++l) {
    for (std::size_t i = 0; i < refine[l].weight.size(); ++i)
      refine[l].weight[i] += scale * o.refine[l].weight[i];
    for (std::size_t i = 0; i < refine[l].bias.size(); ++i)
      refine[l].bias[i] += scale * o.refine[l].bias[i];
  }
  head.add_scaled(o.head, scale);
}

void ModelGrads::scale(double s) {
  for (auto& layer : refine) {
    for (auto& w : layer.weight) w *= s;
    for (auto& b : layer.bias) b *= s;
  }
  for (auto& w : head.weight) w *= s;
  for (auto& b : head.bias) b *= s;
}

LiftModel::LiftModel(const ModelConfig& config, const GroundExtent& extent,
                     std::uint64_t seed)
    : config_(config), extent_(extent) {
  if (config.refine_layers < 1 || config.refine_layers > 4)
    throw InvalidSpecError("refine_layers must be in [1, 4]");
  if (config.latent_channels < 1 || config.hidden_channels < 1)
    throw InvalidSpecError("channel counts must be positive");
  Rng rng(mix_seed(seed, fnv1a64("lift_model")));
  int in_c = input_channels();
  for (int l = 0; l < config.refine_layers; ++l) {
    const int out_c = (l == config.refine_layers - 1) ? config.latent_channels
                                                      : config.hidden_channels;
    ConvLayer layer;
    layer.in_channels = in_c;
    layer.out_channels = out_c;
    layer.weight.resize(static_cast<std::size_t>(9) * in_c * out_c);
    layer.bias.assign(out_c, 0.0);
    const double scale = 1.0 / std::sqrt(9.0 * in_c);
    for (auto& w : layer.weight) w = rng.normal(0.0, scale);
    refine_.push_back(std::move(layer));
    in_c = out_c;
  }
  head_ = SegHead::init(config.latent_channels, config.n_classes,
                        mix_seed(seed, fnv1a64("head")));
}

int LiftModel::input_channels() const {
  return config_.n_classes + 1 + config_.latent_channels;
}

std::size_t LiftModel::parameter_count() const {
  std::size_t n = head_.weight.size() + head_.bias.size();
  for (const auto& layer : refine_)
    n += layer.weight.size() + layer.bias.size();
  return n;
}

LiftModel::Forward LiftModel::forward(const CameraImageStack& images,
                                      const SupervisionMask& pixels,
                                      const SamplingMap& map,
                                      const LatentBev* prev_latent,
                                      const EgoMotion2D& motion) const {
  require_shape(images.channels == config_.n_classes,
                "image stack channel count does not match the model");
  require_shape(map.extent == extent_, "sampling map extent mismatch");

  const Tensor splat = splat_to_bev(images, pixels.mask, map);
  const int rows = extent_.rows, cols = extent_.cols;
  const int d = config_.latent_channels;

  LatentBev prev = LatentBev::zeros(extent_, d);
  if (prev_latent) {
    require_shape(prev_latent->channels == d && prev_latent->extent == extent_,
                  "previous latent shape mismatch");
    prev = warp_ego_motion(*prev_latent, motion);
  }

  Forward fwd;
  fwd.input = Tensor::zeros(rows, cols, input_channels());
  const int sc = splat.channels;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double* dst = fwd.input.v.data() + fwd.input.index(i, j, 0);
      const double* s = splat.v.data() + splat.index(i, j, 0);
      for (int ch = 0; ch < sc; ++ch) dst[ch] = s[ch];
      const double* p = prev.data.data() + prev.index(i, j, 0);
      for (int ch = 0; ch < d; ++ch) dst[sc + ch] = p[ch];
    }
  }

  const Tensor* cur = &fwd.input;
  for (const auto& layer : refine_) {
    Tensor act = conv3x3(*cur, layer);
    for (auto& x : act.v) x = std::tanh(x);
    fwd.activations.push_back(std::move(act));
    cur = &fwd.activations.back();
  }

  fwd.latent = LatentBev::zeros(extent_, d);
  fwd.latent.data = cur->v;
  fwd.pred_logits = head_.apply(fwd.latent);
  return fwd;
}

ModelGrads LiftModel::backward(const Forward& fwd,
                               const LatentBev& grad_latent) const {
  require_shape(grad_latent.channels == config_.latent_channels,
                "latent cotangent channel mismatch");
  ModelGrads grads = zero_grads();

  Tensor d = Tensor::zeros(extent_.rows, extent_.cols, config_.latent_channels);
  d.v = grad_latent.data;

  for (int l = static_cast<int>(refine_.size()) - 1; l >= 0; --l) {
    // tanh backward using the stored post-activation.
    const Tensor& act = fwd.activations[l];
    for (std::size_t i = 0; i < d.v.size(); ++i)
      d.v[i] *= 1.0 - act.v[i] * act.v[i];
    const Tensor& input = (l == 0) ? fwd.input : fwd.activations[l - 1];
    d = conv3x3_vjp(input, refine_[l], d, grads.refine[l]);
  }
  return grads;
}

ModelGrads LiftModel::zero_grads() const {
  ModelGrads g;
  g.refine.resize(refine_.size());
  for (std::size_t l = 0; l < refine_.size(); ++l) {
    g.refine[l].weight.assign(refine_[l].weight.size(), 0.0);
    g.refine[l].bias.assign(refine_[l].bias.size(), 0.0);
  }
  g.head.weight.assign(head_.weight.size(), 0.0);
  g.head.bias.assign(head_.bias.size(), 0.0);
  return g;
}

std::vector<std::pair<std::string, std::vector<double>*>>
LiftModel::param_blobs() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  for (std::size_t l = 0; l < refine_.size(); ++l) {
    out.emplace_back("refine" + std::to_string(l) + ".weight",
                     &refine_[l].weight);
    out.emplace_back("refine" + std::to_string(l) + ".bias", &refine_[l].bias);
  }
  out.emplace_back("head.weight", &head_.weight);
  out.emplace_back("head.bias", &head_.bias);
  return out;
}

std::vector<std::pair<std::string, const std::vector<double>*>>
LiftModel::grad_blobs(const ModelGrads& grads) const {
  std::vector<std::pair<std::string, const std::vector<double>*>> out;
  for (std::size_t l = 0; l < grads.refine.size(); ++l) {
    out.emplace_back("refine" + std::to_string(l) + ".weight",
                     &grads.refine[l].weight);
    out.emplace_back("refine" + std::to_string(l) + ".bias",
                     &grads.refine[l].bias);
  }
  out.emplace_back("head.weight", &grads.head.weight);
  out.emplace_back("head.bias", &grads.head.bias);
  return out;
}

void LiftModel::save(Checkpoint& ck) const {
  auto* self = const_cast<LiftModel*>(this);
  for (const auto& [name, data] : self->param_blobs())
    ck.blobs.emplace_back(name, *data);
}

void LiftModel::load(const Checkpoint& ck) {
  for (auto& [name, data] : param_blobs()) {
    const auto* blob = ck.find(name);
    if (!blob) throw IoError("checkpoint is missing blob " + name);
    if (blob->size() != data->size())
      throw IoError("checkpoint blob " + name + " has the wrong size");
    *data = *blob;
  }
}

}  // namespace bevreproj
