#include "sgode/model.hpp"

#include <cmath>
#include <stdexcept>

namespace sgode::model {

Tensor gaussian_param(int rows, int cols, double stddev, ParamStore& params,
                      const std::string& name, Tape& tape,
                      rng::Xoshiro256ss& rng) {
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  for (auto& v : data) v = stddev * rng.normal();
  return params.add(name, Tensor::param(rows, cols, std::move(data), tape));
}

Tensor zeros_param(int rows, int cols, ParamStore& params,
                   const std::string& name, Tape& tape) {
  std::vector<double> data(static_cast<std::size_t>(rows) * cols, 0.0);
  return params.add(name, Tensor::param(rows, cols, std::move(data), tape));
}

// ---- SignedCoeff ------------------------------------------------------------

SignedCoeff make_signed_coeff(CoeffVariant variant, int n, int embed_dim,
                              double alpha, ParamStore& params,
                              const std::string& prefix, Tape& tape,
                              rng::Xoshiro256ss& rng) {
  SignedCoeff sc;
  sc.variant = variant;
  sc.n = n;
  sc.embed_dim = embed_dim;
  sc.alpha = alpha;
  const double std_e = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  auto emb = [&](const std::string& name) {
    return gaussian_param(n, embed_dim, std_e, params, prefix + name, tape, rng);
  };
  switch (variant) {
    case CoeffVariant::v1_dense:
      sc.K_raw = gaussian_param(n, n, 0.1, params, prefix + "K_raw", tape, rng);
      break;
    case CoeffVariant::v2_factored:
      sc.E1 = emb("E1");
      sc.E2 = emb("E2");
      break;
    case CoeffVariant::v3_signed_pair:
      sc.E1 = emb("E1");
      sc.E2 = emb("E2");
      sc.E3 = emb("E3");
      sc.E4 = emb("E4");
      break;
    case CoeffVariant::masked_signed:
      sc.E1 = emb("E1");
      sc.E2 = emb("E2");
      sc.E3 = emb("E3");
      sc.E_M1 = emb("E_M1");
      sc.E_M2 = emb("E_M2");
      break;
  }
  return sc;
}

Tensor SignedCoeff::build() const {
  switch (variant) {
    case CoeffVariant::v1_dense:
      return K_raw;
    case CoeffVariant::v2_factored:
      return matmul_nt(E1, E2);
    case CoeffVariant::v3_signed_pair: {
      Tensor pos = relu(matmul_nt(E1, E2));
      if (sign_mode == SignMode::positive1) return pos;
      Tensor neg = relu(matmul_nt(E3, E4));
      if (sign_mode == SignMode::positive2) return add(pos, neg);
      return sub(pos, neg);
    }
    case CoeffVariant::masked_signed: {
      Tensor k0 = sub(relu(matmul_nt(E1, E2)), relu(matmul_nt(E1, E3)));
      Tensor mask = hardsigmoid_ste(matmul_nt(E_M1, E_M2), alpha);
      return mul(k0, mask);
    }
  }
  throw std::logic_error("SignedCoeff::build: bad variant");
}

// ---- Trend ------------------------------------------------------------------

Trend make_trend(int l1, int l2, int l3, G1Kind g1, G2Kind g2, int n,
                 int hidden_dim, int embed_dim, ParamStore& params,
                 const std::string& prefix, Tape& tape,
                 rng::Xoshiro256ss& rng, const Tensor* shared_E1) {
  Trend t;
  t.l1 = l1;
  t.l2 = l2;
  t.l3 = l3;
  t.g1 = g1;
  t.g2 = g2;
  const double std_h = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  if (l1) {
    if (g1 == G1Kind::linear_scale_b) {
      t.b_vec = zeros_param(n, 1, params, prefix + "b_vec", tape);
    } else {
      if (!shared_E1 || !shared_E1->defined())
        throw std::invalid_argument("make_trend: weightpool g1 needs E1");
      t.E_pool = *shared_E1;
      t.W_pool = gaussian_param(
          embed_dim, hidden_dim * hidden_dim,
          1.0 / std::sqrt(static_cast<double>(embed_dim)), params,
          prefix + "W_pool", tape, rng);
    }
  }
  if (l2) {
    if (g2 != G2Kind::two_layer_fc)
      throw std::invalid_argument("make_trend: lambda2 needs a g2 network");
    t.W_g2a = gaussian_param(hidden_dim, hidden_dim, std_h, params,
                             prefix + "W_g2a", tape, rng);
    t.b_g2a = zeros_param(1, hidden_dim, params, prefix + "b_g2a", tape);
    t.W_g2b = gaussian_param(hidden_dim, hidden_dim, std_h, params,
                             prefix + "W_g2b", tape, rng);
    t.b_g2b = zeros_param(1, hidden_dim, params, prefix + "b_g2b", tape);
  }
  if (l3) t.B0 = zeros_param(n, hidden_dim, params, prefix + "B0", tape);
  return t;
}

Tensor Trend::eval(const Tensor& H_t, const Tensor& H_0,
                   const Tensor& W_h) const {
  std::vector<std::pair<Tensor, double>> parts;
  if (l1) {
    if (g1 == G1Kind::linear_scale_b) {
      parts.emplace_back(row_scale(matmul(H_t, W_h), b_vec), 1.0);
    } else {
      parts.emplace_back(per_node_linear(H_t, matmul(E_pool, W_pool)), 1.0);
    }
  }
  if (l2) {
    Tensor inner = relu(add(matmul(H_0, W_g2a), b_g2a));
    parts.emplace_back(add(matmul(inner, W_g2b), b_g2b), 1.0);
  }
  if (l3) parts.emplace_back(B0, 1.0);
  if (parts.empty()) return Tensor::zeros(H_t.rows(), H_t.cols());
  if (parts.size() == 1) return parts[0].first;
  return lincomb(parts);
}

// ---- layer right-hand sides ----------------------------------------------------

Tensor sgode_rhs(const Tensor& K, const Tensor& H, const Tensor& W_h,
                 const Tensor& b_h, const Tensor& B) {
  Tensor pre = add(matmul(matmul(K, H), W_h), b_h);
  if (B.defined()) pre = add(pre, B);
  return relu(pre);
}

Tensor ndcn_rhs(const Tensor& A_norm, const Tensor& H, const Tensor& W_h,
                const Tensor& b_h) {
  return relu(add(matmul(matmul(A_norm, H), W_h), b_h));
}

Tensor adaptive_adjacency(const Tensor& E) {
  Tensor soft = row_softmax(relu(matmul_nt(E, E)));
  Tensor eye = Tensor::zeros(E.rows(), E.rows());
  for (int i = 0; i < E.rows(); ++i) eye.at(i, i) = 1.0;
  return add(soft, eye);
}

// ---- DynModel -----------------------------------------------------------------

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "sgodev1") return LayerKind::sgodev1;
  if (s == "sgodev2") return LayerKind::sgodev2;
  if (s == "sgodev3") return LayerKind::sgodev3;
  if (s == "ndcn") return LayerKind::ndcn;
  if (s == "adaptive") return LayerKind::adaptive;
  if (s == "nograph") return LayerKind::nograph;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::sgodev1:
      return "sgodev1";
    case LayerKind::sgodev2:
      return "sgodev2";
    case LayerKind::sgodev3:
      return "sgodev3";
    case LayerKind::ndcn:
      return "ndcn";
    case LayerKind::adaptive:
      return "adaptive";
    case LayerKind::nograph:
      return "nograph";
  }
  return "?";
}

DynModel::DynModel(const DynModelConfig& cfg, int n, int data_dim,
                   std::uint64_t seed, Tape& tape)
    : cfg_(cfg), n_(n), data_dim_(data_dim), tape_(&tape) {
  auto rng = rng::stream(seed, "model.init");
  const int h = cfg.hidden_dim;
  const double std_in = 1.0 / std::sqrt(static_cast<double>(data_dim));
  const double std_h = 1.0 / std::sqrt(static_cast<double>(h));

  W_enc_ = gaussian_param(data_dim, h, std_in, params_, "enc.W", tape, rng);
  b_enc_ = zeros_param(1, h, params_, "enc.b", tape);
  W_dec_ = gaussian_param(h, data_dim, std_h, params_, "dec.W", tape, rng);
  b_dec_ = zeros_param(1, data_dim, params_, "dec.b", tape);
  W_h_ = gaussian_param(h, h, std_h, params_, "ode.W_h", tape, rng);
  b_h_ = zeros_param(1, h, params_, "ode.b_h", tape);

  switch (cfg.kind) {
    case LayerKind::sgodev1:
      coeff_ = make_signed_coeff(CoeffVariant::v1_dense, n, cfg.embed_dim,
                                 cfg.alpha, params_, "ode.", tape, rng);
      break;
    case LayerKind::sgodev2:
      coeff_ = make_signed_coeff(CoeffVariant::v2_factored, n, cfg.embed_dim,
                                 cfg.alpha, params_, "ode.", tape, rng);
      break;
    case LayerKind::sgodev3:
      coeff_ = make_signed_coeff(CoeffVariant::v3_signed_pair, n,
                                 cfg.embed_dim, cfg.alpha, params_, "ode.",
                                 tape, rng);
      break;
    case LayerKind::adaptive:
      coeff_ = make_signed_coeff(CoeffVariant::v2_factored, n, cfg.embed_dim,
                                 cfg.alpha, params_, "ode.", tape, rng);
      break;
    case LayerKind::ndcn:
    case LayerKind::nograph:
      break;
  }

  // per-kind trend defaults: v3 uses the linear scaling, others none
  int l1 = cfg.trend_l1, l2 = cfg.trend_l2, l3 = cfg.trend_l3;
  if (l1 < 0) l1 = cfg.kind == LayerKind::sgodev3 ? 1 : 0;
  if (l2 < 0) l2 = 0;
  if (l3 < 0) l3 = 0;
  cfg_.trend_l1 = l1;
  cfg_.trend_l2 = l2;
  cfg_.trend_l3 = l3;
  const bool has_k = cfg.kind == LayerKind::sgodev1 ||
                     cfg.kind == LayerKind::sgodev2 ||
                     cfg.kind == LayerKind::sgodev3;
  if (has_k && (l1 || l2 || l3))
    trend_ = make_trend(l1, l2, l3, G1Kind::linear_scale_b,
                        l2 ? G2Kind::two_layer_fc : G2Kind::none, n, h,
                        cfg.embed_dim, params_, "trend.", tape, rng);
}

void DynModel::set_graph(const graph::Graph& g) {
  if (g.n != n_) throw std::invalid_argument("set_graph: node count mismatch");
  if (cfg_.kind == LayerKind::ndcn) A_norm_ = graph::normalize_ndcn(g);
}

bool DynModel::has_coeff() const {
  return cfg_.kind == LayerKind::sgodev1 || cfg_.kind == LayerKind::sgodev2 ||
         cfg_.kind == LayerKind::sgodev3;
}

const SignedCoeff& DynModel::coeff() const {
  if (!has_coeff() && cfg_.kind != LayerKind::adaptive)
    throw std::logic_error("model '" + to_string(cfg_.kind) +
                           "' has no coefficient matrix");
  return coeff_;
}

std::vector<Tensor> DynModel::forward(const Tensor& x0,
                                      const std::vector<double>& t_grid,
                                      const ode::SolverConfig& solver) const {
  if (x0.rows() != n_ || x0.cols() != data_dim_)
    throw std::invalid_argument("DynModel::forward: state shape mismatch");
  if (cfg_.kind == LayerKind::ndcn && !A_norm_.defined())
    throw std::logic_error("DynModel::forward: ndcn layer needs set_graph()");

  Tensor x_in = cfg_.input_scale != 1.0 ? scale(x0, 1.0 / cfg_.input_scale)
                                        : x0;
  Tensor H0 = add(matmul(x_in, W_enc_), b_enc_);
  if (cfg_.encoder_tanh) H0 = tanh_op(H0);

  // materialize the interaction operator once per forward pass
  Tensor op;
  if (has_coeff())
    op = coeff_.build();
  else if (cfg_.kind == LayerKind::adaptive)
    op = row_softmax(relu(matmul_nt(coeff_.E1, coeff_.E2)));
  else if (cfg_.kind == LayerKind::ndcn)
    op = A_norm_;

  const bool use_trend = trend_.enabled();
  ode::TensorRhs rhs = [this, op, H0, use_trend](double,
                                                 const Tensor& H) -> Tensor {
    if (cfg_.kind == LayerKind::nograph)
      return relu(add(matmul(H, W_h_), b_h_));
    Tensor B;
    if (use_trend) B = trend_.eval(H, H0, W_h_);
    return sgode_rhs(op, H, W_h_, b_h_, B);
  };

  std::vector<Tensor> hidden = ode::integrate_fixed(rhs, H0, t_grid, solver);
  std::vector<Tensor> out;
  out.reserve(hidden.size());
  for (const Tensor& H : hidden) {
    Tensor xhat = add(matmul(H, W_dec_), b_dec_);
    out.push_back(cfg_.input_scale != 1.0 ? scale(xhat, cfg_.input_scale)
                                          : xhat);
  }
  return out;
}

}  // namespace sgode::model
