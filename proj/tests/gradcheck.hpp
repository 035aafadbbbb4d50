#pragma once

#include "mrcp/nn/cnn.hpp"
#include "mrcp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mrcp::testing {

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_excess = 0.0;
  std::string worst_param;
};

/// Tolerance used throughout: max(1e-4 absolute, 1e-3 relative).
inline bool grad_close(double analytic, double numeric) {
  return std::abs(analytic - numeric) <= std::max(1e-4, 1e-3 * std::max(std::abs(analytic), std::abs(numeric)));
}

/// Random small network and batch; every parameter entry compared against a
/// central difference of the training loss with step 1e-4.
inline GradCheck check_random_network(std::uint64_t seed) {
  Rng rng(seed, 0x67726164);
  nn::CnnSpec spec;
  spec.spatial_kernel = 1 + rng.below(4);
  spec.temporal_kernel = 1 + rng.below(4);
  spec.pool_kernel = 1 + rng.below(3);
  spec.n_samples = spec.temporal_kernel + spec.pool_kernel - 1 + rng.below(6);
  spec.depth = 1 + rng.below(3);
  spec.fc1_units = 1 + rng.below(5);
  spec.n_classes = 2 + rng.below(3);
  const std::size_t batch = 2 + rng.below(4);

  nn::CnnModel model(spec, rng.next_u64());
  for (auto& p : model.parameters()) {
    const bool is_gamma = p.name.find("gamma") != std::string::npos;
    for (double& v : p.values) v = is_gamma ? rng.uniform(0.5, 1.5) : v + rng.uniform(-0.2, 0.2);
  }
  nn::Tensor x(batch, 1, spec.spatial_kernel, spec.n_samples);
  for (double& v : x.values()) v = rng.normal();
  std::vector<int> labels(batch);
  for (auto& l : labels) l = static_cast<int>(rng.below(spec.n_classes));

  const auto analytic = model.loss_and_gradients(x, labels);
  GradCheck out;
  auto params = model.parameters();
  const double h = 1e-4;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].values.size(); ++i) {
      double& v = params[p].values[i];
      const double saved = v;
      v = saved + h;
      const double up = model.loss_and_gradients(x, labels).loss;
      v = saved - h;
      const double down = model.loss_and_gradients(x, labels).loss;
      v = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.gradients[p][i];
      ++out.checked;
      if (!grad_close(a, numeric)) {
        ++out.failed;
        const double excess = std::abs(a - numeric);
        if (excess > out.worst_excess) {
          out.worst_excess = excess;
          out.worst_param = params[p].name + "[" + std::to_string(i) + "]";
        }
      }
    }
  }
  return out;
}

}  // namespace mrcp::testing
