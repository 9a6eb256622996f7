#include "sgode/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "sgode/rng.hpp"

namespace sgode::train {

namespace {
constexpr double kMapeGuard = 1e-3;
}

double mape_percent(const std::vector<double>& pred,
                    const std::vector<double>& truth,
                    const std::vector<char>* observed) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("mape: size mismatch");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (observed && !(*observed)[i]) continue;
    if (std::abs(truth[i]) < kMapeGuard) continue;
    acc += std::abs((truth[i] - pred[i]) / truth[i]);
    ++count;
  }
  if (count == 0)
    throw std::domain_error("mape: no entries survive the zero-guard");
  return 100.0 * acc / static_cast<double>(count);
}

std::pair<double, double> rmse_mae(const std::vector<double>& pred,
                                   const std::vector<double>& truth,
                                   const std::vector<char>* observed) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("rmse_mae: size mismatch");
  double se = 0.0, ae = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (observed && !(*observed)[i]) continue;
    const double d = pred[i] - truth[i];
    se += d * d;
    ae += std::abs(d);
    ++count;
  }
  if (count == 0) throw std::domain_error("rmse_mae: empty observation mask");
  return {std::sqrt(se / count), ae / count};
}

Corrupted corrupt_matrix(const std::vector<std::vector<double>>& rows,
                         double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("corrupt_matrix: rate must lie in [0,1)");
  const std::size_t t_len = rows.size();
  const std::size_t n = t_len ? rows[0].size() : 0;
  Corrupted out;
  out.filled = rows;
  out.mask.assign(t_len, std::vector<char>(n, 1));
  const std::size_t total = t_len * n;
  const std::size_t k =
      static_cast<std::size_t>(std::llround(rate * static_cast<double>(total)));
  if (k == 0) return out;

  // exact-count selection by partial Fisher-Yates
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  auto rng = rng::stream(seed, "corrupt.mask");
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_int(total - i);
    std::swap(idx[i], idx[j]);
    out.mask[idx[i] / n][idx[i] % n] = 0;
  }

  // fill gaps by per-column linear interpolation along the time axis;
  // leading/trailing gaps take the nearest observed value
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::size_t> obs;
    for (std::size_t t = 0; t < t_len; ++t)
      if (out.mask[t][c]) obs.push_back(t);
    if (obs.empty()) {
      for (std::size_t t = 0; t < t_len; ++t) out.filled[t][c] = 0.0;
      continue;
    }
    std::size_t oi = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
      if (out.mask[t][c]) continue;
      while (oi < obs.size() && obs[oi] < t) ++oi;
      const bool has_hi = oi < obs.size();
      const bool has_lo = oi > 0;
      if (has_lo && has_hi) {
        const std::size_t lo = obs[oi - 1], hi = obs[oi];
        const double w = static_cast<double>(t - lo) /
                         static_cast<double>(hi - lo);
        out.filled[t][c] = rows[lo][c] * (1.0 - w) + rows[hi][c] * w;
      } else if (has_lo) {
        out.filled[t][c] = rows[obs[oi - 1]][c];
      } else {
        out.filled[t][c] = rows[obs[oi]][c];
      }
    }
  }
  return out;
}

// ---- dynamics training ---------------------------------------------------------

namespace {

void collect_split(const std::vector<std::vector<double>>& preds,
                   const dynamics::Trajectory& traj,
                   const std::vector<std::vector<char>>* obs_mask,
                   const std::vector<int>& idxs, const std::string& label,
                   MetricsReport& rep) {
  std::vector<double> p, t;
  std::vector<char> m;
  for (int s : idxs) {
    p.insert(p.end(), preds[s].begin(), preds[s].end());
    t.insert(t.end(), traj.states[s].begin(), traj.states[s].end());
    if (obs_mask)
      m.insert(m.end(), (*obs_mask)[s].begin(), (*obs_mask)[s].end());
  }
  rep.split = label;
  auto [rmse, mae] = rmse_mae(p, t, obs_mask ? &m : nullptr);
  const double mape = mape_percent(p, t, obs_mask ? &m : nullptr);
  rep.mae = {mae};
  rep.rmse = {rmse};
  rep.mape = {mape};
  rep.avg_mae = mae;
  rep.avg_rmse = rmse;
  rep.avg_mape = mape;
}

}  // namespace

DynResult train_dynamics(model::DynModel& m, const dynamics::Trajectory& traj,
                         const dynamics::Splits& splits,
                         const DynTrainConfig& cfg,
                         const std::vector<std::vector<char>>* obs_mask) {
  if (splits.train.empty())
    throw std::invalid_argument("train_dynamics: empty training split");
  std::vector<int> train_idx = splits.train;
  std::sort(train_idx.begin(), train_idx.end());
  if (train_idx.front() != 0)
    throw std::invalid_argument(
        "train_dynamics: the earliest snapshot must belong to the training "
        "split (it anchors the integration)");

  const std::vector<double>& anchor = traj.states[0];
  Tensor x0 = Tensor::from_data(traj.n, traj.d, anchor);

  std::vector<double> train_times;
  std::vector<Tensor> train_truth;
  std::vector<Tensor> train_mask;
  for (int i : train_idx) {
    train_times.push_back(traj.times[i]);
    train_truth.push_back(Tensor::from_data(traj.n, traj.d, traj.states[i]));
    if (obs_mask) {
      std::vector<double> md((*obs_mask)[i].begin(), (*obs_mask)[i].end());
      train_mask.push_back(Tensor::from_data(traj.n, traj.d, md));
    }
  }

  Tape& tape = m.tape();
  Adam opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  DynResult res;
  res.loss_curve.reserve(cfg.epochs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    m.params().zero_grad();
    auto preds = m.forward(x0, train_times, cfg.solver);
    std::vector<std::pair<Tensor, double>> terms;
    const double w = 1.0 / static_cast<double>(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (obs_mask) {
        bool any = false;
        for (double mv : train_mask[i].data()) any = any || mv != 0.0;
        if (!any) continue;
        terms.emplace_back(masked_l1(preds[i], train_truth[i], train_mask[i]),
                           w);
      } else {
        terms.emplace_back(l1_mean_abs_diff(preds[i], train_truth[i]), w);
      }
    }
    Tensor loss = lincomb(terms);
    const double lv = loss.item();
    if (!std::isfinite(lv))
      throw std::runtime_error("train_dynamics: loss diverged at epoch " +
                               std::to_string(epoch));
    res.loss_curve.push_back(lv);
    tape.backward(loss);
    opt.step(m.params());
    if (cfg.log_every > 0 && epoch % cfg.log_every == 0)
      std::printf("epoch %4d  loss %.6f\n", epoch, lv);
  }

  // final evaluation over the whole trajectory
  tape.set_recording(false);
  auto all = m.forward(x0, traj.times, cfg.solver);
  tape.set_recording(true);
  res.predictions.reserve(all.size());
  for (const Tensor& t : all) res.predictions.push_back(t.data());

  collect_split(res.predictions, traj, obs_mask, train_idx, "train", res.train);
  if (!splits.interp.empty())
    collect_split(res.predictions, traj, obs_mask, splits.interp, "interp",
                  res.interp);
  if (!splits.extrap.empty())
    collect_split(res.predictions, traj, obs_mask, splits.extrap, "extrap",
                  res.extrap);
  return res;
}

// ---- forecaster training ---------------------------------------------------------

ZScore fit_zscore(const Series& s, int train_end) {
  double acc = 0.0;
  std::size_t count = 0;
  for (int t = 0; t < train_end; ++t)
    for (std::size_t i = 0; i < s.rows[t].size(); ++i) {
      if (!s.mask.empty() && !s.mask[t][i]) continue;
      acc += s.rows[t][i];
      ++count;
    }
  if (count == 0) throw std::domain_error("fit_zscore: no observed entries");
  ZScore z;
  z.mu = acc / static_cast<double>(count);
  double var = 0.0;
  for (int t = 0; t < train_end; ++t)
    for (std::size_t i = 0; i < s.rows[t].size(); ++i) {
      if (!s.mask.empty() && !s.mask[t][i]) continue;
      const double d = s.rows[t][i] - z.mu;
      var += d * d;
    }
  z.sigma = std::sqrt(var / static_cast<double>(count));
  if (z.sigma < 1e-12) z.sigma = 1.0;
  return z;
}

namespace {

Tensor row_tensor(const Series& s, const ZScore& z, int row) {
  const std::size_t n = s.rows[row].size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = z.normalize(s.rows[row][i]);
  return Tensor::from_data(static_cast<int>(n), 1, d);
}

std::vector<int> window_starts(int lo, int hi, int span, int stride) {
  std::vector<int> out;
  for (int s = lo; s + span <= hi; s += stride) out.push_back(s);
  return out;
}

MetricsReport eval_windows(const rnn::Forecaster& m, const Series& s,
                           const ZScore& z, const std::vector<int>& starts,
                           const std::string& label) {
  const int T = m.config().window;
  const int tau = m.config().horizon;
  const int n = m.config().n;
  std::vector<std::vector<double>> pred(tau), truth(tau);
  std::vector<std::vector<char>> mask(tau);

  Tape& tape = m.tape();
  const bool prev = tape.recording();
  tape.set_recording(false);
  for (int s0 : starts) {
    std::vector<Tensor> window;
    window.reserve(T);
    for (int t = 0; t < T; ++t) window.push_back(row_tensor(s, z, s0 + t));
    auto out = m.forecast(window);
    for (int k = 0; k < tau; ++k) {
      const int row = s0 + T + k;
      for (int i = 0; i < n; ++i) {
        pred[k].push_back(z.denormalize(out[k].data()[i]));
        truth[k].push_back(s.rows[row][i]);
        mask[k].push_back(s.mask.empty() ? 1 : s.mask[row][i]);
      }
    }
  }
  tape.set_recording(prev);

  MetricsReport rep;
  rep.split = label;
  for (int k = 0; k < tau; ++k) {
    auto [rmse, mae] = rmse_mae(pred[k], truth[k], &mask[k]);
    rep.mae.push_back(mae);
    rep.rmse.push_back(rmse);
    rep.mape.push_back(mape_percent(pred[k], truth[k], &mask[k]));
  }
  for (int k = 0; k < tau; ++k) {
    rep.avg_mae += rep.mae[k];
    rep.avg_rmse += rep.rmse[k];
    rep.avg_mape += rep.mape[k];
  }
  rep.avg_mae /= tau;
  rep.avg_rmse /= tau;
  rep.avg_mape /= tau;
  return rep;
}

std::map<std::string, std::vector<double>> snapshot_params(ParamStore& ps) {
  std::map<std::string, std::vector<double>> snap;
  for (auto& [name, t] : ps.items()) snap[name] = t.data();
  return snap;
}

void restore_params(ParamStore& ps,
                    const std::map<std::string, std::vector<double>>& snap) {
  for (auto& [name, values] : snap) ps.get(name).data() = values;
}

}  // namespace

ForecastResult train_forecaster(rnn::Forecaster& m, const Series& series,
                                const ForecastTrainConfig& cfg) {
  const int T = m.config().window;
  const int tau = m.config().horizon;
  const int span = T + tau;
  const int total = static_cast<int>(series.rows.size());
  const int train_end = static_cast<int>(total * cfg.split_train);
  const int val_end =
      static_cast<int>(total * (cfg.split_train + cfg.split_val));
  if (train_end < span || total - val_end < span)
    throw std::invalid_argument("train_forecaster: series too short");

  const ZScore z = fit_zscore(series, train_end);
  auto train_starts = window_starts(0, train_end, span, cfg.window_stride);
  auto val_starts = window_starts(train_end, val_end, span, cfg.window_stride);
  auto test_starts = window_starts(val_end, total, span, cfg.window_stride);
  if (train_starts.empty() || val_starts.empty())
    throw std::invalid_argument("train_forecaster: empty window sets");

  Tape& tape = m.tape();
  Adam opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  auto order_rng = rng::stream(cfg.seed, "train.batch-order");
  auto samp_rng = rng::stream(cfg.seed, "train.sched-sampling");

  ForecastResult res;
  double best_val = 1e300;
  std::map<std::string, std::vector<double>> best_snap;
  int bad_epochs = 0;
  long global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = train_starts;
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t pos = 0; pos < order.size();
         pos += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end =
          std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch));
      m.params().zero_grad();
      const double eps =
          cfg.cl_decay > 0
              ? cfg.cl_decay /
                    (cfg.cl_decay +
                     std::exp(static_cast<double>(global_step) / cfg.cl_decay))
              : 0.0;
      std::vector<std::pair<Tensor, double>> terms;
      for (std::size_t wi = pos; wi < end; ++wi) {
        const int s0 = order[wi];
        std::vector<Tensor> window, teacher;
        for (int t = 0; t < T; ++t) window.push_back(row_tensor(series, z, s0 + t));
        for (int k = 0; k < tau; ++k)
          teacher.push_back(row_tensor(series, z, s0 + T + k));
        auto out = m.forward(window, &teacher, eps, &samp_rng);
        for (int k = 0; k < tau; ++k) {
          if (!series.mask.empty()) {
            const auto& mrow = series.mask[s0 + T + k];
            bool any = false;
            for (char c : mrow) any = any || c;
            if (!any) continue;
            std::vector<double> md(mrow.begin(), mrow.end());
            terms.emplace_back(
                masked_l1(out[k], teacher[k],
                          Tensor::from_data(m.config().n, 1, md)),
                1.0);
          } else {
            terms.emplace_back(l1_mean_abs_diff(out[k], teacher[k]), 1.0);
          }
        }
      }
      for (auto& [t, w] : terms) w = 1.0 / static_cast<double>(terms.size());
      Tensor loss = lincomb(terms);
      const double lv = loss.item();
      if (!std::isfinite(lv))
        throw std::runtime_error("train_forecaster: loss diverged at epoch " +
                                 std::to_string(epoch));
      epoch_loss += lv;
      ++batches;
      tape.backward(loss);
      if (cfg.grad_clip > 0.0) {
        double norm2 = 0.0;
        for (auto& [name, p] : m.params().items())
          for (double g : p.grad()) norm2 += g * g;
        const double norm = std::sqrt(norm2);
        if (norm > cfg.grad_clip) {
          const double sc = cfg.grad_clip / norm;
          for (auto& [name, p] : m.params().items())
            for (double& g : p.grad()) g *= sc;
        }
      }
      opt.step(m.params());
      ++global_step;
    }
    epoch_loss /= std::max(1, batches);
    res.train_mae_curve.push_back(epoch_loss);

    MetricsReport val = eval_windows(m, series, z, val_starts, "val");
    if (cfg.log_every > 0 && epoch % cfg.log_every == 0)
      std::printf("epoch %3d  train %.5f  val MAE %.5f\n", epoch, epoch_loss,
                  val.avg_mae);
    if (val.avg_mae < best_val) {
      best_val = val.avg_mae;
      best_snap = snapshot_params(m.params());
      res.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.patience) {
      break;
    }
    if (cfg.stop_at_train_mae > 0.0 && epoch_loss < cfg.stop_at_train_mae)
      break;
  }

  if (!best_snap.empty()) restore_params(m.params(), best_snap);
  res.val = eval_windows(m, series, z, val_starts, "val");
  if (!test_starts.empty())
    res.test = eval_windows(m, series, z, test_starts, "test");
  return res;
}

// ---- synthetic benchmark series -----------------------------------------------------

Series synthetic_signed_series(int n, int steps, std::uint64_t seed) {
  if (n < 2 || steps < 2)
    throw std::invalid_argument("synthetic_signed_series: need n>=2, steps>=2");
  auto shape_rng = rng::stream(seed, "synth.shape");
  auto x0_rng = rng::stream(seed, "synth.x0");
  auto noise_rng = rng::stream(seed, "synth.noise");

  // skew-symmetric signed coupling: antagonistic pairs plus a weak ring
  std::vector<double> A(static_cast<std::size_t>(n) * n, 0.0);
  auto at = [&](int i, int j) -> double& {
    return A[static_cast<std::size_t>(i) * n + j];
  };
  for (int i = 0; i + 1 < n; i += 2) {
    const double c = shape_rng.uniform(0.6, 1.6);
    at(i, i + 1) = -c;
    at(i + 1, i) = c;
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 2) % n;
    at(i, j) += -0.15;
    at(j, i) += 0.15;
  }

  std::vector<double> x(n);
  for (auto& v : x) v = x0_rng.normal();

  const double dt = 0.3;
  std::vector<double> ts(steps - 1);
  for (int t = 1; t < steps; ++t) ts[t - 1] = t * dt;
  ode::VecRhs rhs = [&](double, const std::vector<double>& y,
                        std::vector<double>& dy) {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += at(i, j) * y[j];
      dy[i] = acc;
    }
  };
  ode::SolverConfig cfg;
  cfg.rtol = 1e-8;
  cfg.atol = 1e-10;
  auto latent = ode::integrate_dopri5(rhs, x, 0.0, ts, cfg);
  latent.insert(latent.begin(), x);

  std::vector<double> amp(n), offset(n);
  for (int i = 0; i < n; ++i) {
    amp[i] = shape_rng.uniform(0.5, 1.5);
    offset[i] = shape_rng.uniform(3.0, 10.0);
  }

  Series s;
  s.rows.assign(steps, std::vector<double>(n));
  for (int t = 0; t < steps; ++t) {
    const double seasonal = 0.4 * std::sin(2.0 * 3.14159265358979323846 *
                                           (t * dt) / 40.0);
    for (int i = 0; i < n; ++i)
      s.rows[t][i] = amp[i] * latent[t][i] + offset[i] + seasonal +
                     0.02 * noise_rng.normal();
  }
  return s;
}

}  // namespace sgode::train
