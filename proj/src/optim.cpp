#include "bevreproj/optim.hpp"

#include <cmath>

#include "bevreproj/common.hpp"

namespace bevreproj {

void Adam::step(
    const std::vector<std::pair<std::string, std::vector<double>*>>& params,
    const std::vector<std::pair<std::string, const std::vector<double>*>>&
        grads) {
  require_shape(params.size() == grads.size(),
                "parameter/gradient blob count mismatch");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_shape(params[k].first == grads[k].first,
                  "parameter/gradient blob name mismatch");
    auto& p = *params[k].second;
    const auto& g = *grads[k].second;
    require_shape(p.size() == g.size(), "gradient size mismatch for blob " +
                                            params[k].first);
    auto& [m, v] = state_[params[k].first];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void Adam::save(Checkpoint& ck) const {
  ck.blobs.emplace_back("adam.t",
                        std::vector<double>{static_cast<double>(t_)});
  for (const auto& [name, mv] : state_) {
    ck.blobs.emplace_back("adam.m." + name, mv.first);
    ck.blobs.emplace_back("adam.v." + name, mv.second);
  }
}

void Adam::load(const Checkpoint& ck) {
  state_.clear();
  const auto* t = ck.find("adam.t");
  if (!t || t->empty()) throw IoError("checkpoint has no optimizer state");
  t_ = static_cast<std::int64_t>((*t)[0]);
  for (const auto& [name, data] : ck.blobs) {
    if (name.rfind("adam.m.", 0) == 0)
      state_[name.substr(7)].first = data;
    else if (name.rfind("adam.v.", 0) == 0)
      state_[name.substr(7)].second = data;
  }
}

}  // namespace bevreproj
