#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bevreproj/io.hpp"

namespace bevreproj {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over named parameter blobs. Moment state is keyed by blob name and
// serialized into checkpoints; lr = 0 leaves parameters exactly unchanged.
class Adam {
 public:
  explicit Adam(const AdamConfig& config) : config_(config) {}

  void step(const std::vector<std::pair<std::string, std::vector<double>*>>& params,
            const std::vector<std::pair<std::string, const std::vector<double>*>>& grads);

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

  void save(Checkpoint& ck) const;
  void load(const Checkpoint& ck);

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      state_;  // name -> (m, v)
};

}  // namespace bevreproj
