#include "bevreproj/grid.hpp"

#include <algorithm>
#include <cmath>

namespace bevreproj {

BevGrid BevGrid::zeros(const GroundExtent& extent, int channels,
                       GridSemantics semantics) {
  BevGrid g;
  g.extent = extent;
  g.channels = channels;
  g.semantics = semantics;
  g.data.assign(static_cast<std::size_t>(extent.rows) * extent.cols * channels,
                0.0);
  return g;
}

LatentBev LatentBev::zeros(const GroundExtent& extent, int channels) {
  LatentBev g;
  g.extent = extent;
  g.channels = channels;
  g.data.assign(static_cast<std::size_t>(extent.rows) * extent.cols * channels,
                0.0);
  return g;
}

LabelGrid LabelGrid::zeros(const GroundExtent& extent) {
  LabelGrid g;
  g.extent = extent;
  g.labels.assign(static_cast<std::size_t>(extent.rows) * extent.cols, 0);
  return g;
}

namespace {

void check_grid(std::size_t data_size, const GroundExtent& extent,
                int channels) {
  require_shape(data_size == static_cast<std::size_t>(extent.rows) *
                                 extent.cols * channels,
                "grid data size does not match extent/channels");
}

// Source position for output cell center p under the rotate-then-translate
// field motion: q = c + R(-dphi) * (p - c - t), with c the extent center.
// Pure translations are evaluated directly in grid-index space so that
// integer-cell shifts (and the identity) land on exact integer coordinates.
struct WarpMap {
  bool pure_translation;
  double shift_r, shift_s;
  double cos_a, sin_a;  // R(-dphi)
  double cx, cy, tx, ty;
  double inv_dx, inv_dy;
  const GroundExtent* extent;

  explicit WarpMap(const GroundExtent& e, const EgoMotion2D& m)
      : pure_translation(m.dphi == 0.0),
        shift_r(m.dx / e.cell_dx()),
        shift_s(m.dy / e.cell_dy()),
        cos_a(std::cos(m.dphi)),
        sin_a(std::sin(m.dphi)),
        cx(e.center_x()),
        cy(e.center_y()),
        tx(m.dx),
        ty(m.dy),
        inv_dx(1.0 / e.cell_dx()),
        inv_dy(1.0 / e.cell_dy()),
        extent(&e) {}

  // Continuous grid coordinates of the sample position for output cell (i, j).
  GridCoord source(int i, int j) const {
    if (pure_translation) return {i - shift_r, j - shift_s};
    const double px = extent->cell_center_x(i) - cx - tx;
    const double py = extent->cell_center_y(j) - cy - ty;
    const double qx = cos_a * px + sin_a * py + cx;
    const double qy = -sin_a * px + cos_a * py + cy;
    return {(qx - extent->x_min) * inv_dx - 0.5,
            (qy - extent->y_min) * inv_dy - 0.5};
  }
};

struct BilinearTaps {
  int i[4], j[4];
  double w[4];
  int count = 0;
};

// Taps inside [0, rows) x [0, cols) with strictly positive weight. Exact-
// integer coordinates produce a single unit-weight tap, which keeps identity
// motions bit-exact.
BilinearTaps bilinear_taps(double r, double s, int rows, int cols) {
  BilinearTaps t;
  const double fi = std::floor(r), fj = std::floor(s);
  const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
  const double fr = r - fi, fs = s - fj;
  const double wr[2] = {1.0 - fr, fr};
  const double ws[2] = {1.0 - fs, fs};
  for (int a = 0; a < 2; ++a) {
    const int ii = i0 + a;
    if (ii < 0 || ii >= rows || wr[a] == 0.0) continue;
    for (int b = 0; b < 2; ++b) {
      const int jj = j0 + b;
      if (jj < 0 || jj >= cols || ws[b] == 0.0) continue;
      const double w = wr[a] * ws[b];
      if (w == 0.0) continue;
      t.i[t.count] = ii;
      t.j[t.count] = jj;
      t.w[t.count] = w;
      ++t.count;
    }
  }
  return t;
}

void warp_field(const double* in, double* out, const GroundExtent& extent,
                int channels, const EgoMotion2D& motion) {
  const int rows = extent.rows, cols = extent.cols;
  if (motion.dx == 0.0 && motion.dy == 0.0 && motion.dphi == 0.0) {
    std::copy(in, in + static_cast<std::size_t>(rows) * cols * channels, out);
    return;
  }
  const WarpMap map(extent, motion);
  parallel_chunks(rows, [&](int row_begin, int row_end) {
    for (int i = row_begin; i < row_end; ++i) {
      for (int j = 0; j < cols; ++j) {
        const auto [r, s] = map.source(i, j);
        const auto taps = bilinear_taps(r, s, rows, cols);
        double* dst = out + (static_cast<std::size_t>(i) * cols + j) * channels;
        for (int ch = 0; ch < channels; ++ch) dst[ch] = 0.0;
        for (int k = 0; k < taps.count; ++k) {
          const double* src =
              in + (static_cast<std::size_t>(taps.i[k]) * cols + taps.j[k]) *
                       channels;
          const double w = taps.w[k];
          for (int ch = 0; ch < channels; ++ch) dst[ch] += w * src[ch];
        }
      }
    }
  });
}

// Transpose of warp_field: same taps, scattered. Sequential so that the
// accumulation order is fixed.
void warp_field_vjp(const double* cot, double* out, const GroundExtent& extent,
                    int channels, const EgoMotion2D& motion) {
  const int rows = extent.rows, cols = extent.cols;
  if (motion.dx == 0.0 && motion.dy == 0.0 && motion.dphi == 0.0) {
    std::copy(cot, cot + static_cast<std::size_t>(rows) * cols * channels, out);
    return;
  }
  const WarpMap map(extent, motion);
  std::fill(out, out + static_cast<std::size_t>(rows) * cols * channels, 0.0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const auto [r, s] = map.source(i, j);
      const auto taps = bilinear_taps(r, s, rows, cols);
      const double* src =
          cot + (static_cast<std::size_t>(i) * cols + j) * channels;
      for (int k = 0; k < taps.count; ++k) {
        double* dst =
            out + (static_cast<std::size_t>(taps.i[k]) * cols + taps.j[k]) *
                      channels;
        const double w = taps.w[k];
        for (int ch = 0; ch < channels; ++ch) dst[ch] += w * src[ch];
      }
    }
  }
}

}  // namespace

BevGrid warp_ego_motion(const BevGrid& grid, const EgoMotion2D& motion) {
  check_grid(grid.data.size(), grid.extent, grid.channels);
  BevGrid out = BevGrid::zeros(grid.extent, grid.channels, grid.semantics);
  warp_field(grid.data.data(), out.data.data(), grid.extent, grid.channels,
             motion);
  return out;
}

LatentBev warp_ego_motion(const LatentBev& grid, const EgoMotion2D& motion) {
  check_grid(grid.data.size(), grid.extent, grid.channels);
  LatentBev out = LatentBev::zeros(grid.extent, grid.channels);
  warp_field(grid.data.data(), out.data.data(), grid.extent, grid.channels,
             motion);
  return out;
}

BevGrid warp_ego_motion_vjp(const BevGrid& cotangent,
                            const EgoMotion2D& motion) {
  check_grid(cotangent.data.size(), cotangent.extent, cotangent.channels);
  BevGrid out = BevGrid::zeros(cotangent.extent, cotangent.channels,
                               cotangent.semantics);
  warp_field_vjp(cotangent.data.data(), out.data.data(), cotangent.extent,
                 cotangent.channels, motion);
  return out;
}

LatentBev warp_ego_motion_vjp(const LatentBev& cotangent,
                              const EgoMotion2D& motion) {
  check_grid(cotangent.data.size(), cotangent.extent, cotangent.channels);
  LatentBev out = LatentBev::zeros(cotangent.extent, cotangent.channels);
  warp_field_vjp(cotangent.data.data(), out.data.data(), cotangent.extent,
                 cotangent.channels, motion);
  return out;
}

BevGrid log_softmax_channels(const BevGrid& grid) {
  check_grid(grid.data.size(), grid.extent, grid.channels);
  BevGrid out =
      BevGrid::zeros(grid.extent, grid.channels, GridSemantics::probabilities);
  const int c = grid.channels;
  const std::size_t cells = grid.cell_count();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double* x = grid.data.data() + cell * c;
    double* y = out.data.data() + cell * c;
    double m = x[0];
    for (int ch = 1; ch < c; ++ch) m = std::max(m, x[ch]);
    double z = 0.0;
    for (int ch = 0; ch < c; ++ch) z += std::exp(x[ch] - m);
    const double log_z = std::log(z);
    for (int ch = 0; ch < c; ++ch) y[ch] = x[ch] - m - log_z;
  }
  return out;
}

BevGrid log_softmax_channels_vjp(const BevGrid& log_out,
                                 const BevGrid& cotangent) {
  require_shape(log_out.extent == cotangent.extent &&
                    log_out.channels == cotangent.channels,
                "log_softmax vjp shape mismatch");
  BevGrid out =
      BevGrid::zeros(log_out.extent, log_out.channels, GridSemantics::logits);
  const int c = log_out.channels;
  const std::size_t cells = log_out.cell_count();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double* ls = log_out.data.data() + cell * c;
    const double* u = cotangent.data.data() + cell * c;
    double* g = out.data.data() + cell * c;
    double usum = 0.0;
    for (int ch = 0; ch < c; ++ch) usum += u[ch];
    for (int ch = 0; ch < c; ++ch) g[ch] = u[ch] - std::exp(ls[ch]) * usum;
  }
  return out;
}

LabelGrid argmax_labels(const BevGrid& grid) {
  check_grid(grid.data.size(), grid.extent, grid.channels);
  LabelGrid out = LabelGrid::zeros(grid.extent);
  const int c = grid.channels;
  const std::size_t cells = grid.cell_count();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double* x = grid.data.data() + cell * c;
    int best = 0;
    for (int ch = 1; ch < c; ++ch)
      if (x[ch] > x[best]) best = ch;
    out.labels[cell] = best;
  }
  return out;
}

}  // namespace bevreproj
