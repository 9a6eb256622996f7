#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgode/dynamics.hpp"
#include "sgode/model.hpp"
#include "sgode/rnn.hpp"

namespace sgode::train {

// ---- metrics ----------------------------------------------------------------

// MAPE in percent over observed entries; entries with |truth| < 1e-3 are
// excluded (near-zero denominators swamp the metric). Throws when nothing
// remains.
double mape_percent(const std::vector<double>& pred,
                    const std::vector<double>& truth,
                    const std::vector<char>* observed = nullptr);

// (rmse, mae) over observed entries; throws on an empty mask.
std::pair<double, double> rmse_mae(const std::vector<double>& pred,
                                   const std::vector<double>& truth,
                                   const std::vector<char>* observed = nullptr);

struct MetricsReport {
  std::string split;
  std::vector<double> mae, rmse, mape;  // per horizon; one entry for dynamics
  double avg_mae = 0, avg_rmse = 0, avg_mape = 0;
};

// ---- missing-data protocol -----------------------------------------------------

struct Corrupted {
  std::vector<std::vector<double>> filled;  // inputs with gaps interpolated
  std::vector<std::vector<char>> mask;      // 1 = observed
};

// Marks exactly round(rate*N) entries missing (seeded shuffle over all
// entries), fills them by per-column linear interpolation along the row
// axis, and returns the observation mask. rate must lie in [0,1).
Corrupted corrupt_matrix(const std::vector<std::vector<double>>& rows,
                         double rate, std::uint64_t seed);

// ---- continuous-dynamics training ----------------------------------------------

struct DynTrainConfig {
  double lr = 0.01;
  double weight_decay = 1e-3;
  int epochs = 400;
  ode::SolverConfig solver;
  int log_every = 0;
};

struct DynResult {
  MetricsReport train, interp, extrap;
  std::vector<double> loss_curve;
  std::vector<std::vector<double>> predictions;  // one per trajectory time
};

// Full-batch L1 training: each epoch integrates the model from the anchor
// snapshot (the earliest one, which the split protocol pins into training)
// across every training time. Metrics are reported on all three splits.
DynResult train_dynamics(model::DynModel& m, const dynamics::Trajectory& traj,
                         const dynamics::Splits& splits,
                         const DynTrainConfig& cfg,
                         const std::vector<std::vector<char>>* obs_mask = nullptr);

// ---- windowed forecasting ---------------------------------------------------------

struct Series {
  std::vector<std::vector<double>> rows;  // time x n, original units
  std::vector<std::vector<char>> mask;    // optional observation mask
};

struct ZScore {
  double mu = 0.0;
  double sigma = 1.0;
  double normalize(double x) const { return (x - mu) / sigma; }
  double denormalize(double z) const { return z * sigma + mu; }
};

// Fitted over observed entries of rows [0, train_end).
ZScore fit_zscore(const Series& s, int train_end);

struct ForecastTrainConfig {
  double lr = 0.005;
  double weight_decay = 0.0;
  int epochs = 60;
  int batch = 64;
  int patience = 15;       // early stop on validation MAE
  double grad_clip = 5.0;  // global-norm clip; 0 disables
  int cl_decay = 2000;     // scheduled-sampling decay; 0 = free running
  int window_stride = 1;
  double split_train = 0.7, split_val = 0.1;  // remainder is test
  double stop_at_train_mae = 0.0;             // early exit threshold; 0 = off
  std::uint64_t seed = 0;
  int log_every = 0;
};

struct ForecastResult {
  MetricsReport val, test;
  std::vector<double> train_mae_curve;  // normalized units
  int best_epoch = 0;
};

ForecastResult train_forecaster(rnn::Forecaster& m, const Series& series,
                                const ForecastTrainConfig& cfg);

// Deterministic synthetic benchmark series: pairs of nodes coupled through
// a skew-symmetric signed matrix (sustained oscillation), distinct per-node
// offsets and amplitudes, a slow shared seasonal term, and light noise.
Series synthetic_signed_series(int n, int steps, std::uint64_t seed);

}  // namespace sgode::train
