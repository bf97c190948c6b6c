#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sagin/config.hpp"
#include "sagin/mlp.hpp"

namespace sagin::test {

// Scaled scenario trimmed for fast unit tests.
inline Config small_config(int episodes = 3, int max_steps = 12) {
  Config c = scaled_config();
  c.train.episodes = episodes;
  c.train.uav_count = 1;
  c.env.max_steps = max_steps;
  c.ddqn.hidden = {16, 8};
  c.csac.hidden = {16, 8};
  c.ddqn.batch_size = 8;
  c.csac.batch_size = 8;
  c.ddqn.buffer_capacity = 256;
  c.csac.buffer_capacity = 256;
  c.ddqn.sync_period = 10;
  return c;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)}); }

// Central differences of `loss` with respect to every parameter of `net`.
inline MlpGrads numeric_grads(Mlp& net, const std::function<double()>& loss, double h = 1e-5) {
  MlpGrads g = net.zero_grads();
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto probe = [&](std::vector<double>& params, std::vector<double>& out) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        net.mutable_layers();
        const double up = loss();
        params[i] = keep - h;
        net.mutable_layers();
        const double down = loss();
        params[i] = keep;
        net.mutable_layers();
        out[i] = (up - down) / (2.0 * h);
      }
    };
    probe(layers[l].w, g.dw[l]);
    probe(layers[l].b, g.db[l]);
  }
  return g;
}

// Largest relative error, ignoring entries where both gradients are tiny.
inline double max_grad_error(const MlpGrads& a, const MlpGrads& b, double floor = 1e-7) {
  double worst = 0.0;
  auto cmp = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double scale = std::max(std::abs(x[i]), std::abs(y[i]));
      if (scale < floor) continue;
      worst = std::max(worst, std::abs(x[i] - y[i]) / scale);
    }
  };
  for (std::size_t l = 0; l < a.dw.size(); ++l) {
    cmp(a.dw[l], b.dw[l]);
    cmp(a.db[l], b.db[l]);
  }
  return worst;
}

}  // namespace sagin::test
