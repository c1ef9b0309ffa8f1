#include "bevreproj/seg_head.hpp"

#include <cmath>

namespace bevreproj {

void SegHeadGrad::add_scaled(const SegHeadGrad& o, double scale) {
  for (std::size_t i = 0; i < weight.size(); ++i) weight[i] += scale * o.weight[i];
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += scale * o.bias[i];
}

SegHead SegHead::init(int in_channels, int out_channels, std::uint64_t seed) {
  SegHead h;
  h.in_channels = in_channels;
  h.out_channels = out_channels;
  h.weight.resize(static_cast<std::size_t>(in_channels) * out_channels);
  h.bias.assign(out_channels, 0.0);
  Rng rng(mix_seed(seed, fnv1a64("seg_head")));
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_channels));
  for (auto& w : h.weight) w = rng.normal(0.0, scale);
  return h;
}

BevGrid SegHead::apply(const LatentBev& x) const {
  require_shape(x.channels == in_channels, "seg head input channel mismatch");
  BevGrid out = BevGrid::zeros(x.extent, out_channels, GridSemantics::logits);
  const std::size_t cells =
      static_cast<std::size_t>(x.extent.rows) * x.extent.cols;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double* xin = x.data.data() + cell * in_channels;
    double* y = out.data.data() + cell * out_channels;
    for (int o = 0; o < out_channels; ++o) y[o] = bias[o];
    for (int i = 0; i < in_channels; ++i) {
      const double xi = xin[i];
      const double* wrow = weight.data() + static_cast<std::size_t>(i) * out_channels;
      for (int o = 0; o < out_channels; ++o) y[o] += xi * wrow[o];
    }
  }
  return out;
}

std::pair<LatentBev, SegHeadGrad> SegHead::vjp(const LatentBev& x,
                                               const BevGrid& cotangent) const {
  require_shape(x.channels == in_channels &&
                    cotangent.channels == out_channels &&
                    x.extent == cotangent.extent,
                "seg head vjp shape mismatch");
  LatentBev dx = LatentBev::zeros(x.extent, in_channels);
  SegHeadGrad g;
  g.weight.assign(weight.size(), 0.0);
  g.bias.assign(bias.size(), 0.0);
  const std::size_t cells =
      static_cast<std::size_t>(x.extent.rows) * x.extent.cols;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double* xin = x.data.data() + cell * in_channels;
    const double* u = cotangent.data.data() + cell * out_channels;
    double* gx = dx.data.data() + cell * in_channels;
    for (int o = 0; o < out_channels; ++o) g.bias[o] += u[o];
    for (int i = 0; i < in_channels; ++i) {
      const double* wrow = weight.data() + static_cast<std::size_t>(i) * out_channels;
      double* gw = g.weight.data() + static_cast<std::size_t>(i) * out_channels;
      double acc = 0.0;
      const double xi = xin[i];
      for (int o = 0; o < out_channels; ++o) {
        acc += wrow[o] * u[o];
        gw[o] += xi * u[o];
      }
      gx[i] = acc;
    }
  }
  return {std::move(dx), std::move(g)};
}

}  // namespace bevreproj
