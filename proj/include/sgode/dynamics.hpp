#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgode/graph.hpp"
#include "sgode/ode.hpp"

namespace sgode::dynamics {

enum class Kind { heat, mutualistic, gene };

Kind kind_from_string(const std::string& s);
std::string to_string(Kind k);

// Constants may be scalar (size 1) or per-node (size n).
struct DynamicsParams {
  Kind kind = Kind::heat;
  std::vector<double> k_heat{1.0};
  std::vector<double> b{0.1}, k_cap{5.0}, c{1.0}, d{5.0}, e{0.9}, h_sat{0.1};
  std::vector<double> b_gene{1.0};
  int f_exp = 2;
  double h_hill = 2.0;

  void validate(int n) const;
};

// States are row-major n x d (d feature columns evolving independently
// through the same coupling).
void heat_rhs(const double* x, int n, int d, const graph::Graph& g,
              const DynamicsParams& p, double* out);
void mutualistic_rhs(const double* x, int n, int d, const graph::Graph& g,
                     const DynamicsParams& p, double* out);
void gene_rhs(const double* x, int n, int d, const graph::Graph& g,
              const DynamicsParams& p, double* out);

// Adapter for the adaptive solver.
ode::VecRhs make_rhs(const graph::Graph& g, const DynamicsParams& p, int d);

struct Trajectory {
  int n = 0;
  int d = 1;
  std::vector<double> times;
  std::vector<std::vector<double>> states;  // one flat n*d state per time
};

struct SplitSpec {
  enum class Mode { irregular, regular };
  Mode mode = Mode::irregular;
  int train = 80;
  int interp = 20;
  int extrap = 20;
};

struct Splits {
  std::vector<int> train, interp, extrap;  // snapshot indices
};

struct Generated {
  Trajectory traj;
  Splits splits;
};

// Seeded uniform initial state on [lo, hi] (stream "dynamics.x0").
std::vector<double> random_initial_state(int n, int d, double lo, double hi,
                                         std::uint64_t seed);

// Ground truth via dopri5 from x0 at t=0. Irregular mode samples
// train+interp+extrap sorted uniform times on (0, t_end]; the earliest and
// latest of the first train+interp snapshots are pinned into the training
// split so interpolation times stay interior and extrapolation times stay
// beyond the trained range. Regular mode uses equispaced times with the
// leading block as training and the trailing block as extrapolation.
Generated generate_trajectory(const graph::Graph& g, const DynamicsParams& p,
                              const std::vector<double>& x0, double t_end,
                              const SplitSpec& spec, std::uint64_t seed,
                              const ode::SolverConfig& cfg = {});

// "SGODE-TRAJ v1" ASCII format.
void save_trajectory(const Trajectory& t, const std::string& path);
Trajectory load_trajectory(const std::string& path);

}  // namespace sgode::dynamics
