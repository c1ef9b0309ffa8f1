#pragma once

#include <utility>
#include <vector>

#include "bevreproj/grid.hpp"

namespace bevreproj {

struct SegHeadGrad {
  std::vector<double> weight;
  std::vector<double> bias;

  void add_scaled(const SegHeadGrad& o, double scale);
};

// Per-cell linear map from latent features to class logits (a 1x1
// convolution). Shared across temporal branches by construction: the same
// instance is applied to both time steps.
struct SegHead {
  int in_channels = 0, out_channels = 0;
  std::vector<double> weight;  // [in][out]
  std::vector<double> bias;    // [out]

  static SegHead init(int in_channels, int out_channels, std::uint64_t seed);

  BevGrid apply(const LatentBev& x) const;

  // Backward through apply: returns the latent gradient and the parameter
  // gradient for an upstream cotangent on the logits.
  std::pair<LatentBev, SegHeadGrad> vjp(const LatentBev& x,
                                        const BevGrid& cotangent) const;
};

}  // namespace bevreproj
