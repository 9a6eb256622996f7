#pragma once

#include <functional>
#include <vector>

#include "sgode/tensor.hpp"

namespace sgode::ode {

enum class Method { euler, rk4, dopri5 };

struct SolverConfig {
  Method method = Method::rk4;
  // dopri5 controls
  double rtol = 1e-7;
  double atol = 1e-9;
  long max_steps = 1000000;
  // fixed-step controls: step_count substeps per grid interval when > 0,
  // otherwise ceil(dt * steps_per_unit) with a minimum of one substep.
  int step_count = 0;
  double steps_per_unit = 8.0;
};

// Differentiable vector field; the returned tensor lives on the same tape
// as the state, so the whole unrolled integration is differentiated
// exactly (discretize-then-optimize).
using TensorRhs = std::function<Tensor(double t, const Tensor& state)>;

// Fixed-step Euler / RK4 across a strictly increasing grid whose first
// entry is the time of x0. Returns one state per grid time (states[0] is
// x0 itself).
std::vector<Tensor> integrate_fixed(const TensorRhs& rhs, const Tensor& x0,
                                    const std::vector<double>& t_grid,
                                    const SolverConfig& cfg);

// Plain (non-differentiable) vector field over flat states.
using VecRhs = std::function<void(double t, const std::vector<double>& y,
                                  std::vector<double>& dydt)>;

struct Dopri5Stats {
  long accepted = 0;
  long rejected = 0;
  // Largest scaled local error estimate among accepted steps; the step
  // control guarantees <= 1.
  double max_accepted_error = 0.0;
};

// Dormand-Prince 5(4) with PI step control and 4th-order dense output at
// the requested times. t_eval must be strictly increasing and >= t0.
std::vector<std::vector<double>> integrate_dopri5(
    const VecRhs& rhs, const std::vector<double>& y0, double t0,
    const std::vector<double>& t_eval, const SolverConfig& cfg,
    Dopri5Stats* stats = nullptr);

}  // namespace sgode::ode
