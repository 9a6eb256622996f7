#include "sgode/rnn.hpp"

#include <cmath>
#include <stdexcept>

namespace sgode::rnn {

using model::gaussian_param;
using model::zeros_param;

SignedDiffusionCell::SignedDiffusionCell(const CellConfig& cfg,
                                         const model::SignedCoeff& coeff,
                                         ParamStore& params,
                                         const std::string& prefix, Tape& tape,
                                         rng::Xoshiro256ss& rng)
    : cfg_(cfg), coeff_(&coeff) {
  if (cfg.diffusion_m < 1)
    throw std::invalid_argument("SignedDiffusionCell: diffusion_m must be >= 1");
  const int h = cfg.hidden_dim;
  const double std_h = 1.0 / std::sqrt(static_cast<double>(h));
  W_h_ = gaussian_param(h, h, 0.1 * std_h, params, prefix + "W_h", tape, rng);
  if (cfg.trend)
    trend_ = model::make_trend(1, 1, 1, model::G1Kind::linear_scale_b,
                               model::G2Kind::two_layer_fc, cfg.n, h, 0,
                               params, prefix + "trend.", tape, rng);
  const char* gate_names[3] = {"R", "U", "C"};
  const int reads = cfg.only_final ? 1 : cfg.diffusion_m + 1;
  const double std_read = 1.0 / std::sqrt(static_cast<double>(h) * reads);
  for (int q = 0; q < 3; ++q) {
    const std::string gp = prefix + gate_names[q] + ".";
    proj_[q] = gaussian_param(2 * h, h, 1.0 / std::sqrt(2.0 * h), params,
                              gp + "proj", tape, rng);
    for (int k = 0; k < reads; ++k)
      read_[q].push_back(gaussian_param(h, h, std_read, params,
                                        gp + "w" + std::to_string(k), tape,
                                        rng));
    bias_[q] = zeros_param(1, h, params, gp + "b", tape);
  }
}

Tensor SignedDiffusionCell::gate_input(const Tensor& x_t, const Tensor& h,
                                       Gate q) const {
  return matmul(concat_cols(x_t, h), proj_[static_cast<int>(q)]);
}

Tensor SignedDiffusionCell::diffuse(const Tensor& h_in, Gate q) const {
  const int qi = static_cast<int>(q);
  Tensor K = coeff_->build();

  // g2(H(0)) and B0 stay constant along the trajectory
  Tensor static_trend;
  if (cfg_.trend) {
    Tensor inner = relu(add(matmul(h_in, trend_.W_g2a), trend_.b_g2a));
    static_trend = lincomb({{add(matmul(inner, trend_.W_g2b), trend_.b_g2b), 1.0},
                            {trend_.B0, 1.0}});
  }
  auto rhs = [&](const Tensor& H) {
    Tensor HW = matmul(H, W_h_);
    std::vector<std::pair<Tensor, double>> parts{{matmul(K, HW), 1.0}};
    if (cfg_.trend) {
      parts.emplace_back(row_scale(HW, trend_.b_vec), 1.0);
      parts.emplace_back(static_trend, 1.0);
    }
    return parts.size() == 1 ? parts[0].first : lincomb(parts);
  };

  // m+1 equidistant samples of the trajectory on [0,1], endpoints included
  std::vector<Tensor> samples{h_in};
  Tensor H = h_in;
  const double dt = 1.0 / (cfg_.diffusion_m * cfg_.rk4_substeps);
  for (int k = 0; k < cfg_.diffusion_m; ++k) {
    for (int s = 0; s < cfg_.rk4_substeps; ++s) {
      Tensor k1 = rhs(H);
      Tensor k2 = rhs(lincomb({{H, 1.0}, {k1, dt / 2}}));
      Tensor k3 = rhs(lincomb({{H, 1.0}, {k2, dt / 2}}));
      Tensor k4 = rhs(lincomb({{H, 1.0}, {k3, dt}}));
      H = lincomb(
          {{H, 1.0}, {k1, dt / 6}, {k2, dt / 3}, {k3, dt / 3}, {k4, dt / 6}});
    }
    samples.push_back(H);
  }
  for (double v : H.data())
    if (!std::isfinite(v))
      throw std::runtime_error("signed_diffusion: non-finite state");

  Tensor acc;
  if (cfg_.only_final) {
    acc = matmul(samples.back(), read_[qi][0]);
  } else {
    std::vector<std::pair<Tensor, double>> read_terms;
    for (std::size_t k = 0; k < samples.size(); ++k)
      read_terms.emplace_back(matmul(samples[k], read_[qi][k]), 1.0);
    acc = read_terms.size() == 1 ? read_terms[0].first : lincomb(read_terms);
  }
  return add(acc, bias_[qi]);
}

Tensor SignedDiffusionCell::step(const Tensor& x_t, const Tensor& h_prev) const {
  Tensor r = sigmoid(diffuse(gate_input(x_t, h_prev, Gate::reset), Gate::reset));
  Tensor u =
      sigmoid(diffuse(gate_input(x_t, h_prev, Gate::update), Gate::update));
  Tensor gated = mul(r, h_prev);
  Tensor c = tanh_op(
      diffuse(gate_input(x_t, gated, Gate::candidate), Gate::candidate));
  // h = u . h_prev + (1-u) . c
  Tensor one_minus_u = sub(Tensor::full(h_prev.rows(), h_prev.cols(), 1.0), u);
  return add(mul(u, h_prev), mul(one_minus_u, c));
}

Forecaster::Forecaster(const ForecasterConfig& cfg, std::uint64_t seed,
                       Tape& tape)
    : cfg_(cfg), tape_(&tape) {
  auto rng = rng::stream(seed, "rnn.init");
  const int h = cfg.hidden_dim;
  W_in_ = gaussian_param(cfg.data_dim, h,
                         1.0 / std::sqrt(static_cast<double>(cfg.data_dim)),
                         params_, "in.W", tape, rng);
  W_out_ = gaussian_param(h, cfg.data_dim,
                          1.0 / std::sqrt(static_cast<double>(h)), params_,
                          "out.W", tape, rng);
  b_out_ = zeros_param(1, cfg.data_dim, params_, "out.b", tape);

  enc_coeff_ = model::make_signed_coeff(model::CoeffVariant::v3_signed_pair,
                                        cfg.n, cfg.embed_dim, 1.0, params_,
                                        "enc.K.", tape, rng);
  dec_coeff_ = model::make_signed_coeff(model::CoeffVariant::v3_signed_pair,
                                        cfg.n, cfg.embed_dim, 1.0, params_,
                                        "dec.K.", tape, rng);
  enc_coeff_.sign_mode = cfg.sign_mode;
  dec_coeff_.sign_mode = cfg.sign_mode;

  CellConfig cc;
  cc.n = cfg.n;
  cc.hidden_dim = h;
  cc.diffusion_m = cfg.diffusion_m;
  cc.rk4_substeps = cfg.rk4_substeps;
  cc.trend = cfg.trend;
  cc.only_final = cfg.only_final;
  enc_cells_.reserve(cfg.layers);
  dec_cells_.reserve(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    enc_cells_.emplace_back(cc, enc_coeff_, params_,
                            "enc.l" + std::to_string(l) + ".", tape, rng);
    dec_cells_.emplace_back(cc, dec_coeff_, params_,
                            "dec.l" + std::to_string(l) + ".", tape, rng);
  }
}

std::vector<Tensor> Forecaster::forward(const std::vector<Tensor>& window,
                                        const std::vector<Tensor>* teacher,
                                        double teacher_prob,
                                        rng::Xoshiro256ss* sampler) const {
  if (static_cast<int>(window.size()) != cfg_.window)
    throw std::invalid_argument(
        "forecast: expected a window of " + std::to_string(cfg_.window) +
        " steps, got " + std::to_string(window.size()));
  const int h = cfg_.hidden_dim;

  std::vector<Tensor> hidden(cfg_.layers, Tensor::zeros(cfg_.n, h));
  for (const Tensor& x : window) {
    Tensor in = matmul(x, W_in_);
    for (int l = 0; l < cfg_.layers; ++l) {
      hidden[l] = enc_cells_[l].step(in, hidden[l]);
      in = hidden[l];
    }
  }

  std::vector<Tensor> out;
  out.reserve(cfg_.horizon);
  Tensor feed = Tensor::zeros(cfg_.n, cfg_.data_dim);  // GO symbol
  for (int k = 0; k < cfg_.horizon; ++k) {
    Tensor in = matmul(feed, W_in_);
    for (int l = 0; l < cfg_.layers; ++l) {
      hidden[l] = dec_cells_[l].step(in, hidden[l]);
      in = hidden[l];
    }
    Tensor pred = add(matmul(hidden.back(), W_out_), b_out_);
    out.push_back(pred);
    if (teacher && sampler && sampler->uniform01() < teacher_prob)
      feed = (*teacher)[k];
    else
      feed = pred;
  }
  return out;
}

}  // namespace sgode::rnn
