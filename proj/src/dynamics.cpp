#include "sgode/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sgode/rng.hpp"

namespace sgode::dynamics {

namespace {

inline double pv(const std::vector<double>& v, int i) {
  return v.size() == 1 ? v[0] : v[static_cast<std::size_t>(i)];
}

void check_const(const std::vector<double>& v, int n, const char* name) {
  if (v.size() != 1 && v.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument(std::string("dynamics: constant '") + name +
                                "' must be scalar or per-node");
  for (double x : v)
    if (!std::isfinite(x))
      throw std::invalid_argument(std::string("dynamics: constant '") + name +
                                  "' is not finite");
}

}  // namespace

Kind kind_from_string(const std::string& s) {
  if (s == "heat") return Kind::heat;
  if (s == "mutualistic") return Kind::mutualistic;
  if (s == "gene") return Kind::gene;
  throw std::invalid_argument("dynamics: unknown kind '" + s + "'");
}

std::string to_string(Kind k) {
  switch (k) {
    case Kind::heat:
      return "heat";
    case Kind::mutualistic:
      return "mutualistic";
    case Kind::gene:
      return "gene";
  }
  return "?";
}

void DynamicsParams::validate(int n) const {
  check_const(k_heat, n, "k_heat");
  check_const(b, n, "b");
  check_const(k_cap, n, "k_cap");
  check_const(c, n, "c");
  check_const(d, n, "d");
  check_const(e, n, "e");
  check_const(h_sat, n, "h_sat");
  check_const(b_gene, n, "b_gene");
  for (double x : k_cap)
    if (!(x > 0)) throw std::invalid_argument("dynamics: k_cap must be > 0");
  for (double x : c)
    if (!(x > 0)) throw std::invalid_argument("dynamics: c must be > 0");
  if (f_exp != 1 && f_exp != 2)
    throw std::invalid_argument("dynamics: f_exp must be 1 or 2");
}

void heat_rhs(const double* x, int n, int d, const graph::Graph& g,
              const DynamicsParams& p, double* out) {
#pragma omp parallel for schedule(static) if (n * d > 256)
  for (int i = 0; i < n; ++i) {
    const double ki = pv(p.k_heat, i);
    for (int f = 0; f < d; ++f) {
      double acc = 0.0;
      const double xi = x[static_cast<std::size_t>(i) * d + f];
      for (int j = 0; j < n; ++j) {
        const double a = g.at(i, j);
        if (a != 0.0) acc += a * (xi - x[static_cast<std::size_t>(j) * d + f]);
      }
      out[static_cast<std::size_t>(i) * d + f] = -ki * acc;
    }
  }
}

void mutualistic_rhs(const double* x, int n, int d, const graph::Graph& g,
                     const DynamicsParams& p, double* out) {
  for (int i = 0; i < n; ++i) {
    const double bi = pv(p.b, i), ki = pv(p.k_cap, i), ci = pv(p.c, i);
    const double di = pv(p.d, i), ei = pv(p.e, i);
    for (int f = 0; f < d; ++f) {
      const double xi = x[static_cast<std::size_t>(i) * d + f];
      double acc = bi + xi * (1.0 - xi / ki) * (xi / ci - 1.0);
      for (int j = 0; j < n; ++j) {
        const double a = g.at(i, j);
        if (a == 0.0) continue;
        const double xj = x[static_cast<std::size_t>(j) * d + f];
        const double den = di + ei * xi + pv(p.h_sat, j) * xj;
        if (std::abs(den) < 1e-9)
          throw std::runtime_error(
              "mutualistic_rhs: vanishing denominator at edge (" +
              std::to_string(i) + "," + std::to_string(j) + ")");
        acc += a * xi * xj / den;
      }
      out[static_cast<std::size_t>(i) * d + f] = acc;
    }
  }
}

void gene_rhs(const double* x, int n, int d, const graph::Graph& g,
              const DynamicsParams& p, double* out) {
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < d; ++f)
      if (x[static_cast<std::size_t>(i) * d + f] < 0.0)
        throw std::domain_error("gene_rhs: negative state at node " +
                                std::to_string(i));
#pragma omp parallel for schedule(static) if (n * d > 256)
  for (int i = 0; i < n; ++i) {
    const double bi = pv(p.b_gene, i);
    for (int f = 0; f < d; ++f) {
      const double xi = x[static_cast<std::size_t>(i) * d + f];
      double acc = -bi * (p.f_exp == 1 ? xi : xi * xi);
      for (int j = 0; j < n; ++j) {
        const double a = g.at(i, j);
        if (a == 0.0) continue;
        const double xj = x[static_cast<std::size_t>(j) * d + f];
        const double xh = std::pow(xj, p.h_hill);
        acc += a * xh / (xh + 1.0);
      }
      out[static_cast<std::size_t>(i) * d + f] = acc;
    }
  }
}

ode::VecRhs make_rhs(const graph::Graph& g, const DynamicsParams& p, int d) {
  p.validate(g.n);
  const graph::Graph* gp = &g;
  DynamicsParams params = p;
  int n = g.n;
  switch (p.kind) {
    case Kind::heat:
      return [gp, params, n, d](double, const std::vector<double>& y,
                                std::vector<double>& dy) {
        heat_rhs(y.data(), n, d, *gp, params, dy.data());
      };
    case Kind::mutualistic:
      return [gp, params, n, d](double, const std::vector<double>& y,
                                std::vector<double>& dy) {
        mutualistic_rhs(y.data(), n, d, *gp, params, dy.data());
      };
    case Kind::gene:
      return [gp, params, n, d](double, const std::vector<double>& y,
                                std::vector<double>& dy) {
        gene_rhs(y.data(), n, d, *gp, params, dy.data());
      };
  }
  throw std::logic_error("make_rhs: bad kind");
}

std::vector<double> random_initial_state(int n, int d, double lo, double hi,
                                         std::uint64_t seed) {
  auto rng = rng::stream(seed, "dynamics.x0");
  std::vector<double> x(static_cast<std::size_t>(n) * d);
  for (auto& v : x) v = rng.uniform(lo, hi);
  return x;
}

Generated generate_trajectory(const graph::Graph& g, const DynamicsParams& p,
                              const std::vector<double>& x0, double t_end,
                              const SplitSpec& spec, std::uint64_t seed,
                              const ode::SolverConfig& cfg) {
  if (!(t_end > 0.0))
    throw std::invalid_argument("generate_trajectory: t_end must be > 0");
  if (spec.train < 2)
    throw std::invalid_argument("generate_trajectory: need >= 2 train snapshots");
  const int n = g.n;
  const int d = static_cast<int>(x0.size()) / n;
  if (static_cast<std::size_t>(n) * d != x0.size())
    throw std::invalid_argument("generate_trajectory: x0 size mismatch");

  Generated out;
  out.traj.n = n;
  out.traj.d = d;

  const bool irregular = spec.mode == SplitSpec::Mode::irregular;
  const int head = spec.train + spec.interp;  // snapshots eligible for training
  const int total = head + spec.extrap;

  std::vector<double>& times = out.traj.times;
  if (irregular) {
    auto trng = rng::stream(seed, "dynamics.times");
    times.reserve(total);
    while (static_cast<int>(times.size()) < total) {
      double t = trng.uniform01() * t_end;
      if (t > 0.0) times.push_back(t);
    }
    std::sort(times.begin(), times.end());
    for (std::size_t i = 1; i < times.size(); ++i)
      if (times[i] == times[i - 1])
        throw std::runtime_error("generate_trajectory: duplicate sample time");
  } else {
    times.resize(total);
    for (int i = 0; i < total; ++i) times[i] = (i + 1) * t_end / total;
  }

  if (irregular) {
    // pin earliest and latest head snapshots into training, draw the rest
    std::vector<int> middle(head - 2);
    std::iota(middle.begin(), middle.end(), 1);
    auto srng = rng::stream(seed, "dynamics.split");
    srng.shuffle(middle);
    std::vector<int> train = {0, head - 1};
    train.insert(train.end(), middle.begin(), middle.begin() + (spec.train - 2));
    std::sort(train.begin(), train.end());
    std::vector<char> in_train(head, 0);
    for (int i : train) in_train[i] = 1;
    out.splits.train = train;
    for (int i = 0; i < head; ++i)
      if (!in_train[i]) out.splits.interp.push_back(i);
  } else {
    for (int i = 0; i < spec.train; ++i) out.splits.train.push_back(i);
    for (int i = spec.train; i < head; ++i) out.splits.interp.push_back(i);
  }
  for (int i = head; i < total; ++i) out.splits.extrap.push_back(i);

  ode::SolverConfig solver = cfg;
  solver.method = ode::Method::dopri5;
  out.traj.states =
      ode::integrate_dopri5(make_rhs(g, p, d), x0, 0.0, times, solver);
  return out;
}

void save_trajectory(const Trajectory& t, const std::string& path) {
  std::ostringstream os;
  os << "SGODE-TRAJ v1 n=" << t.n << " d=" << t.d << " T=" << t.times.size()
     << "\n";
  char buf[64];
  for (std::size_t s = 0; s < t.times.size(); ++s) {
    std::snprintf(buf, sizeof buf, "%.17g", t.times[s]);
    os << buf;
    for (double v : t.states[s]) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      os << buf;
    }
    os << "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_trajectory: cannot open " + path);
  f << os.str();
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_trajectory: cannot open " + path);
  std::string magic, version, nf, df, tf;
  f >> magic >> version >> nf >> df >> tf;
  if (magic != "SGODE-TRAJ" || version != "v1" || nf.rfind("n=", 0) != 0 ||
      df.rfind("d=", 0) != 0 || tf.rfind("T=", 0) != 0)
    throw std::runtime_error("load_trajectory: bad header in " + path);
  Trajectory t;
  t.n = std::stoi(nf.substr(2));
  t.d = std::stoi(df.substr(2));
  const int total = std::stoi(tf.substr(2));
  t.times.resize(total);
  t.states.assign(total, std::vector<double>(
                             static_cast<std::size_t>(t.n) * t.d));
  for (int s = 0; s < total; ++s) {
    if (!(f >> t.times[s]))
      throw std::runtime_error("load_trajectory: truncated file " + path);
    for (auto& v : t.states[s])
      if (!(f >> v))
        throw std::runtime_error("load_trajectory: truncated file " + path);
    if (s > 0 && !(t.times[s] > t.times[s - 1]))
      throw std::runtime_error("load_trajectory: times not increasing");
  }
  return t;
}

}  // namespace sgode::dynamics
