#include "sgode/ode.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sgode::ode {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor rk_step(const TensorRhs& rhs, const Tensor& h, double t, double dt,
               Method method) {
  if (method == Method::euler) {
    Tensor k1 = rhs(t, h);
    return lincomb({{h, 1.0}, {k1, dt}});
  }
  Tensor k1 = rhs(t, h);
  Tensor k2 = rhs(t + dt / 2, lincomb({{h, 1.0}, {k1, dt / 2}}));
  Tensor k3 = rhs(t + dt / 2, lincomb({{h, 1.0}, {k2, dt / 2}}));
  Tensor k4 = rhs(t + dt, lincomb({{h, 1.0}, {k3, dt}}));
  return lincomb(
      {{h, 1.0}, {k1, dt / 6}, {k2, dt / 3}, {k3, dt / 3}, {k4, dt / 6}});
}

}  // namespace

std::vector<Tensor> integrate_fixed(const TensorRhs& rhs, const Tensor& x0,
                                    const std::vector<double>& t_grid,
                                    const SolverConfig& cfg) {
  if (cfg.method == Method::dopri5)
    throw std::invalid_argument("integrate_fixed: use euler or rk4");
  if (t_grid.empty())
    throw std::invalid_argument("integrate_fixed: empty time grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument(
          "integrate_fixed: time grid must be strictly increasing");

  std::vector<Tensor> states;
  states.reserve(t_grid.size());
  states.push_back(x0);
  Tensor h = x0;
  long step_index = 0;
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double dt_total = t_grid[i] - t_grid[i - 1];
    const int nsub =
        cfg.step_count > 0
            ? cfg.step_count
            : std::max(1, static_cast<int>(
                              std::ceil(dt_total * cfg.steps_per_unit)));
    const double dt = dt_total / nsub;
    double t = t_grid[i - 1];
    for (int s = 0; s < nsub; ++s) {
      h = rk_step(rhs, h, t, dt, cfg.method);
      t += dt;
      ++step_index;
      if (!all_finite(h.data()))
        throw std::runtime_error(
            "integrate_fixed: non-finite state at step " +
            std::to_string(step_index) + " (t=" + std::to_string(t) + ")");
    }
    states.push_back(h);
  }
  return states;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output coefficients
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

double scaled_norm(const std::vector<double>& e, const std::vector<double>& y0,
                   const std::vector<double>& y1, double atol, double rtol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double sc =
        atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = e[i] / sc;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(e.size()));
}

}  // namespace

std::vector<std::vector<double>> integrate_dopri5(
    const VecRhs& rhs, const std::vector<double>& y0, double t0,
    const std::vector<double>& t_eval, const SolverConfig& cfg,
    Dopri5Stats* stats) {
  const std::size_t n = y0.size();
  if (n == 0) throw std::invalid_argument("integrate_dopri5: empty state");
  for (std::size_t i = 0; i < t_eval.size(); ++i) {
    if (i > 0 && !(t_eval[i] > t_eval[i - 1]))
      throw std::invalid_argument(
          "integrate_dopri5: t_eval must be strictly increasing");
    if (t_eval[i] < t0)
      throw std::invalid_argument(
          "integrate_dopri5: t_eval precedes the integration span");
  }
  std::vector<std::vector<double>> out;
  out.reserve(t_eval.size());
  std::size_t next_eval = 0;
  while (next_eval < t_eval.size() && t_eval[next_eval] == t0) {
    out.push_back(y0);
    ++next_eval;
  }
  if (next_eval == t_eval.size()) return out;
  const double t_end = t_eval.back();

  std::vector<double> y = y0;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  std::vector<double> ytmp(n), ynew(n), errv(n);
  rhs(t0, y, k1);

  // classic initial-step heuristic
  double h;
  {
    double d0 = 0.0, dd1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = cfg.atol + cfg.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      dd1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    dd1 = std::sqrt(dd1 / n);
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min(h0, t_end - t0);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h0 * k1[i];
    rhs(t0 + h0, ytmp, k2);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = cfg.atol + cfg.rtol * std::abs(y[i]);
      const double q = (k2[i] - k1[i]) / sc;
      d2 += q * q;
    }
    d2 = std::sqrt(d2 / n) / h0;
    const double dm = std::max(dd1, d2);
    double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                            : std::pow(0.01 / dm, 0.2);
    h = std::min({100.0 * h0, h1, t_end - t0});
  }

  // PI controller per the classic dopri5 implementation
  const double safe = 0.9, fac1 = 0.2, fac2 = 10.0, beta = 0.04;
  const double expo1 = 0.2 - beta * 0.75;
  double facold = 1e-4;
  bool last_rejected = false;
  double t = t0;
  long nsteps = 0;

  while (t < t_end) {
    if (nsteps++ > cfg.max_steps)
      throw std::runtime_error("integrate_dopri5: max_steps exceeded at t=" +
                               std::to_string(t));
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw std::runtime_error(
          "integrate_dopri5: step size underflow at t=" + std::to_string(t));
    if (t + h > t_end) h = t_end - t;

    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    rhs(t + c2 * h, ytmp, k2);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * h, ytmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * h, ytmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] =
          y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(t + c5 * h, ytmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                            a64 * k4[i] + a65 * k5[i]);
    rhs(t + h, ytmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] +
                            a75 * k5[i] + a76 * k6[i]);
    rhs(t + h, ynew, k7);  // FSAL
    for (std::size_t i = 0; i < n; ++i)
      errv[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                     e6 * k6[i] + e7 * k7[i]);

    const double err = scaled_norm(errv, y, ynew, cfg.atol, cfg.rtol);
    const double fac11 = std::pow(err, expo1);
    if (err <= 1.0) {
      if (stats) {
        ++stats->accepted;
        stats->max_accepted_error = std::max(stats->max_accepted_error, err);
      }
      facold = std::max(err, 1e-4);
      // dense output over (t, t+h]
      if (next_eval < t_eval.size() && t_eval[next_eval] <= t + h) {
        std::vector<double> cont4(n), cont5(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double ydiff = ynew[i] - y[i];
          const double bspl = h * k1[i] - ydiff;
          cont4[i] = ydiff - h * k7[i] - bspl;
          cont5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                          d6 * k6[i] + d7 * k7[i]);
        }
        while (next_eval < t_eval.size() && t_eval[next_eval] <= t + h) {
          const double th = (t_eval[next_eval] - t) / h;
          std::vector<double> u(n);
          for (std::size_t i = 0; i < n; ++i) {
            const double ydiff = ynew[i] - y[i];
            const double bspl = h * k1[i] - ydiff;
            u[i] = y[i] + th * (ydiff +
                                (1.0 - th) *
                                    (bspl + th * (cont4[i] +
                                                  (1.0 - th) * cont5[i])));
          }
          out.push_back(std::move(u));
          ++next_eval;
        }
      }
      t += h;
      y.swap(ynew);
      k1.swap(k7);
      if (!all_finite(y))
        throw std::runtime_error("integrate_dopri5: non-finite state at t=" +
                                 std::to_string(t));
      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(1.0 / fac2, std::min(1.0 / fac1, fac / safe));
      double hnew = h / fac;
      if (last_rejected) hnew = std::min(hnew, h);
      h = hnew;
      last_rejected = false;
    } else {
      if (stats) ++stats->rejected;
      h = h / std::min(1.0 / fac1, fac11 / safe);
      last_rejected = true;
    }
  }
  if (next_eval != t_eval.size())
    throw std::runtime_error("integrate_dopri5: failed to reach all t_eval");
  return out;
}

}  // namespace sgode::ode
