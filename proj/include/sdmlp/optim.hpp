#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sdmlp/errors.hpp"
#include "sdmlp/nn.hpp"

namespace sdmlp {

// Adadelta accumulators, one pair of buffers per parameter tensor.
// 
// acc_grad holds the running average E[g^2], acc_update holds E[dx^2].
// Both start at zero and are never reset between epochs.
struct AdadeltaState {
  double rho = 0.95;
  double eps = 1e-6;
  std::vector<std::vector<double>> acc_grad;
  std::vector<std::vector<double>> acc_update;

  AdadeltaState(std::span<const ParamView> params, double rho_ = 0.95, double eps_ = 1e-6)
      : rho(rho_), eps(eps_) {
    if (!(rho > 0.0 && rho < 1.0)) {
      throw InvalidArgument("Adadelta: rho must be in (0, 1), got " + std::to_string(rho));
    }
    if (!(eps > 0.0)) {
      throw InvalidArgument("Adadelta: eps must be > 0, got " + std::to_string(eps));
    }
    for (const auto& p : params) {
      acc_grad.emplace_back(p.value.size(), 0.0);
      acc_update.emplace_back(p.value.size(), 0.0);
    }
  }
};

struct SgdConfig {
  double learning_rate = 0.01;
};

// The four Adadelta recurrences applied elementwise, in this order:
//   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
//   dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
//   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
//   x       <- x + dx
inline void adadelta_update(std::span<double> x, std::span<const double> g,
                            std::span<double> acc_grad, std::span<double> acc_update, double rho,
                            double eps) {
  if (g.size() != x.size() || acc_grad.size() != x.size() || acc_update.size() != x.size()) {
    throw InvalidArgument("adadelta_step: shape mismatch (params " + std::to_string(x.size()) +
                          ", grads " + std::to_string(g.size()) + ", accumulators " +
                          std::to_string(acc_grad.size()) + "/" +
                          std::to_string(acc_update.size()) + ")");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc_grad[i] = rho * acc_grad[i] + (1.0 - rho) * g[i] * g[i];
    const double dx = -(std::sqrt(acc_update[i] + eps) / std::sqrt(acc_grad[i] + eps)) * g[i];
    acc_update[i] = rho * acc_update[i] + (1.0 - rho) * dx * dx;
    x[i] += dx;
  }
}

inline void adadelta_step(std::span<const ParamView> params, AdadeltaState& state) {
  if (params.size() != state.acc_grad.size()) {
    throw InvalidArgument("adadelta_step: " + std::to_string(params.size()) +
                          " parameter tensors but state tracks " +
                          std::to_string(state.acc_grad.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    adadelta_update(params[k].value, params[k].grad, state.acc_grad[k], state.acc_update[k],
                    state.rho, state.eps);
  }
}

inline void sgd_step(std::span<const ParamView> params, const SgdConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    throw InvalidArgument("sgd_step: learning rate must be > 0");
  }
  for (const auto& p : params) {
    if (p.grad.size() != p.value.size()) {
      throw InvalidArgument("sgd_step: shape mismatch (params " + std::to_string(p.value.size()) +
                            ", grads " + std::to_string(p.grad.size()) + ")");
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= cfg.learning_rate * p.grad[i];
  }
}

} // namespace sdmlp
