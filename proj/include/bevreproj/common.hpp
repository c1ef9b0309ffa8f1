#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace bevreproj {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatchError : Error {
  using Error::Error;
};

struct EmptyMaskError : Error {
  using Error::Error;
};

struct InvalidSpecError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct LabelIsolationError : Error {
  using Error::Error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatchError(what);
}

// splitmix64; used to derive independent seed streams from a root seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Deterministic RNG with a pinned bit-level mapping from engine output to
// doubles, so generated datasets are reproducible across standard libraries.
// mt19937_64 engine; uniform doubles take the top 53 bits; normals via
// Box-Muller on two fresh uniforms (no cached spare).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] via rejection-free scaling (bias negligible
  // for the small ranges used here, and deterministic).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const double u = uniform();
    auto v = lo + static_cast<std::int64_t>(u * static_cast<double>(hi - lo + 1));
    return v > hi ? hi : v;
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t next_u64() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// Global worker-count knob for the internal loop parallelism. All parallel
// code paths write disjoint outputs or reduce in a fixed order, so results
// are bit-identical for any setting.
void set_thread_count(int n);
int thread_count();

// Runs fn(begin, end) over a partition of [0, n). Chunks are contiguous and
// processed by at most thread_count() workers.
void parallel_chunks(int n, const std::function<void(int, int)>& fn);

}  // namespace bevreproj
