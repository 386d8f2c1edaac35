#pragma once

// Central finite-difference check of Network::backward against the MSE loss.

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "sdmlp/metrics.hpp"
#include "sdmlp/nn.hpp"
#include "sdmlp/numerics.hpp"

namespace sdmlp {

struct GradCheckResult {
  double max_rel_err = 0.0;
  // Location of the worst entry: dense layer index, tensor ("W" or "b"), flat index.
  std::size_t layer = 0;
  std::string tensor = "W";
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor); both gradients zero counts as exact agreement.
inline double relative_error(double a, double n, double floor = 1e-8) {
  const double diff = std::abs(a - n);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(a), std::abs(n), floor});
}

// Compares analytic gradients of mse(net(x), y) with central differences of
// step `eps` for every weight and bias. Dropout layers must be absent or at
// rate 0. `sabotage` adds 1e-3 to one analytic entry as a negative control.
inline GradCheckResult gradient_check(Network& net, const Matrix& x, const Matrix& y,
                                      double eps = 1e-5, bool sabotage = false) {
  net.set_mode(Mode::training);
  net.backward(mse(net.forward(x), y).grad);
  net.clear_caches();

  GradCheckResult res;
  std::size_t dense_index = 0;
  auto loss = [&] { return mse(net.infer(x), y).value; };
  for (auto& layer : net.layers()) {
    auto* d = std::get_if<DenseLayer>(&layer);
    if (!d) continue;
    for (int t = 0; t < 2; ++t) {
      auto value = t == 0 ? d->w.values() : d->b.values();
      std::vector<double> analytic(t == 0 ? d->grad_w.values().begin() : d->grad_b.values().begin(),
                                   t == 0 ? d->grad_w.values().end() : d->grad_b.values().end());
      if (sabotage && dense_index == 0 && t == 0) analytic[0] += 1e-3;
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double saved = value[i];
        value[i] = saved + eps;
        const double up = loss();
        value[i] = saved - eps;
        const double down = loss();
        value[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double err = relative_error(analytic[i], numeric);
        ++res.checked;
        if (err > res.max_rel_err || res.checked == 1) {
          res.max_rel_err = err;
          res.layer = dense_index;
          res.tensor = t == 0 ? "W" : "b";
          res.index = i;
          res.analytic = analytic[i];
          res.numeric = numeric;
        }
      }
    }
    ++dense_index;
  }
  return res;
}

} // namespace sdmlp
