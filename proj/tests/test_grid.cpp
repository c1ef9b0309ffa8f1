#include <doctest.h>

#include <cstring>

#include "bevreproj/grid.hpp"
#include "oracles.hpp"

using namespace bevreproj;

namespace {

BevGrid random_grid(const GroundExtent& extent, int channels, Rng& rng,
                    GridSemantics sem = GridSemantics::logits) {
  BevGrid g = BevGrid::zeros(extent, channels, sem);
  for (auto& x : g.data) x = rng.normal();
  return g;
}

// A few smooth Gaussian blobs; band-limited enough for resampling checks.
BevGrid blob_grid(const GroundExtent& extent, int channels, Rng& rng) {
  BevGrid g = BevGrid::zeros(extent, channels, GridSemantics::logits);
  for (int blob = 0; blob < 4; ++blob) {
    const double bx = rng.uniform(extent.x_min * 0.3, extent.x_max * 0.3);
    const double by = rng.uniform(extent.y_min * 0.3, extent.y_max * 0.3);
    const double amp = rng.uniform(0.5, 1.5);
    const double sigma = 2.5 * std::max(extent.cell_dx(), extent.cell_dy());
    const int ch = blob % channels;
    for (int i = 0; i < extent.rows; ++i) {
      for (int j = 0; j < extent.cols; ++j) {
        const double dx = extent.cell_center_x(i) - bx;
        const double dy = extent.cell_center_y(j) - by;
        g.at(i, j, ch) += amp * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      }
    }
  }
  return g;
}

const GroundExtent kExtent = GroundExtent::create(-8, 8, -6, 6, 32, 24);

}  // namespace

TEST_SUITE("bev_grid") {

TEST_CASE("warp with zero motion is bit-identical") {
  Rng rng(3);
  const BevGrid g = random_grid(kExtent, 3, rng);
  const BevGrid w = warp_ego_motion(g, {0.0, 0.0, 0.0});
  REQUIRE(w.data.size() == g.data.size());
  CHECK(std::memcmp(w.data.data(), g.data.data(),
                    g.data.size() * sizeof(double)) == 0);
}

TEST_CASE("integer-cell translation moves mass without spreading") {
  BevGrid g = BevGrid::zeros(kExtent, 1, GridSemantics::logits);
  g.at(16, 12, 0) = 1.0;
  const BevGrid w = warp_ego_motion(g, {kExtent.cell_dx(), 0.0, 0.0});
  CHECK(w.at(17, 12, 0) == 1.0);
  double total = 0.0;
  for (const auto x : w.data) total += x;
  CHECK(total == 1.0);
}

TEST_CASE("warp matches the per-cell loop oracle") {
  Rng rng(5);
  const BevGrid g = random_grid(kExtent, 3, rng);
  const EgoMotion2D motion{1.3, -0.7, 0.2};
  const BevGrid got = warp_ego_motion(g, motion);
  const BevGrid want = oracles::warp_loop(g, motion);
  for (std::size_t i = 0; i < got.data.size(); ++i)
    CHECK(std::abs(got.data[i] - want.data[i]) <= 1e-12);
}

TEST_CASE("warp composition on smooth grids") {
  Rng rng(9);
  const GroundExtent extent = GroundExtent::create(-12, 12, -12, 12, 48, 48);
  const BevGrid g = blob_grid(extent, 2, rng);
  const EgoMotion2D m1{1.0, -0.5, 0.1};
  const EgoMotion2D m2{-0.7, 0.3, -0.05};
  // Composite of applying m1 then m2.
  const double c2 = std::cos(m2.dphi), s2 = std::sin(m2.dphi);
  const EgoMotion2D m12{c2 * m1.dx - s2 * m1.dy + m2.dx,
                        s2 * m1.dx + c2 * m1.dy + m2.dy, m1.dphi + m2.dphi};
  const BevGrid two_step = warp_ego_motion(warp_ego_motion(g, m1), m2);
  const BevGrid one_step = warp_ego_motion(g, m12);
  double linf = 0.0;
  for (std::size_t i = 0; i < g.data.size(); ++i)
    linf = std::max(linf, std::abs(two_step.data[i] - one_step.data[i]));
  CHECK(linf <= 5e-2);
}

TEST_CASE("warp is linear in the grid values") {
  Rng rng(13);
  const BevGrid g1 = random_grid(kExtent, 2, rng);
  const BevGrid g2 = random_grid(kExtent, 2, rng);
  const double a = 1.7, b = -0.4;
  const EgoMotion2D motion{0.9, 0.4, -0.3};
  BevGrid combo = BevGrid::zeros(kExtent, 2, GridSemantics::logits);
  for (std::size_t i = 0; i < combo.data.size(); ++i)
    combo.data[i] = a * g1.data[i] + b * g2.data[i];
  const BevGrid w_combo = warp_ego_motion(combo, motion);
  const BevGrid w1 = warp_ego_motion(g1, motion);
  const BevGrid w2 = warp_ego_motion(g2, motion);
  for (std::size_t i = 0; i < combo.data.size(); ++i)
    CHECK(std::abs(w_combo.data[i] - (a * w1.data[i] + b * w2.data[i])) <=
          1e-12);
}

TEST_CASE("warp adjoint identity") {
  Rng rng(17);
  const BevGrid g = random_grid(kExtent, 3, rng);
  const BevGrid u = random_grid(kExtent, 3, rng);
  const EgoMotion2D motion{0.8, -1.1, 0.25};
  const BevGrid wg = warp_ego_motion(g, motion);
  const BevGrid wtu = warp_ego_motion_vjp(u, motion);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    lhs += wg.data[i] * u.data[i];
    rhs += g.data[i] * wtu.data[i];
  }
  CHECK(std::abs(lhs - rhs) <= 1e-10);
}

TEST_CASE("warp rejects inconsistent shapes") {
  BevGrid g = BevGrid::zeros(kExtent, 2, GridSemantics::logits);
  g.data.pop_back();
  CHECK_THROWS_AS(warp_ego_motion(g, {0.1, 0.0, 0.0}), ShapeMismatchError);
}

TEST_CASE("log_softmax of uniform logits and extreme logits") {
  BevGrid g = BevGrid::zeros(kExtent, 3, GridSemantics::logits);
  for (auto& x : g.data) x = 0.42;
  const BevGrid ls = log_softmax_channels(g);
  for (const auto x : ls.data)
    CHECK(x == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-12));

  BevGrid extreme = BevGrid::zeros(kExtent, 2, GridSemantics::logits);
  for (std::size_t cell = 0; cell < extreme.cell_count(); ++cell) {
    extreme.data[cell * 2] = 1000.0;
    extreme.data[cell * 2 + 1] = 0.0;
  }
  const BevGrid le = log_softmax_channels(extreme);
  for (std::size_t cell = 0; cell < extreme.cell_count(); ++cell) {
    CHECK(std::isfinite(le.data[cell * 2]));
    CHECK(std::isfinite(le.data[cell * 2 + 1]));
    CHECK(le.data[cell * 2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(le.data[cell * 2 + 1] == doctest::Approx(-1000.0).epsilon(1e-12));
  }
}

TEST_CASE("log_softmax matches an extended-precision oracle and normalizes") {
  Rng rng(23);
  const BevGrid g = random_grid(kExtent, 4, rng);
  const BevGrid ls = log_softmax_channels(g);
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    long double z = 0;
    for (int c = 0; c < 4; ++c)
      z += expl(static_cast<long double>(g.data[cell * 4 + c]));
    const long double log_z = logl(z);
    long double sum = 0;
    for (int c = 0; c < 4; ++c) {
      const long double want =
          static_cast<long double>(g.data[cell * 4 + c]) - log_z;
      CHECK(std::abs(static_cast<double>(want) - ls.data[cell * 4 + c]) <=
            1e-12);
      sum += expl(static_cast<long double>(ls.data[cell * 4 + c]));
    }
    CHECK(std::abs(static_cast<double>(sum) - 1.0) <= 1e-12);
  }
}

TEST_CASE("argmax labels with deterministic tie-breaking") {
  BevGrid g = BevGrid::zeros(kExtent, 4, GridSemantics::logits);
  // One-hot grid maps back to its labels.
  Rng rng(29);
  LabelGrid want = LabelGrid::zeros(kExtent);
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    const int cls = static_cast<int>(rng.uniform_int(0, 3));
    g.data[cell * 4 + cls] = 1.0;
    want.labels[cell] = cls;
  }
  const LabelGrid got = argmax_labels(g);
  CHECK(got.labels == want.labels);

  // Tie between classes 1 and 2 resolves to 1.
  BevGrid tie = BevGrid::zeros(kExtent, 4, GridSemantics::logits);
  for (std::size_t cell = 0; cell < tie.cell_count(); ++cell) {
    tie.data[cell * 4 + 1] = 2.0;
    tie.data[cell * 4 + 2] = 2.0;
  }
  for (const auto l : argmax_labels(tie).labels) CHECK(l == 1);
}

TEST_CASE("argmax matches a scan oracle on random grids") {
  Rng rng(31);
  const BevGrid g = random_grid(kExtent, 5, rng);
  const LabelGrid got = argmax_labels(g);
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    int best = 0;
    for (int c = 1; c < 5; ++c)
      if (g.data[cell * 5 + c] > g.data[cell * 5 + best]) best = c;
    CHECK(got.labels[cell] == best);
  }
}

}  // TEST_SUITE
