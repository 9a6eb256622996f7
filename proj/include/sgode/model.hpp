#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgode/graph.hpp"
#include "sgode/ode.hpp"
#include "sgode/rng.hpp"
#include "sgode/tensor.hpp"

namespace sgode::model {

// ---- signed coefficient matrix K -------------------------------------------

enum class CoeffVariant { v1_dense, v2_factored, v3_signed_pair, masked_signed };

// Sign-structure switches used by the forecaster ablations; only meaningful
// for the embedding-pair variants.
enum class SignMode { signed_pair, positive1, positive2 };

struct SignedCoeff {
  CoeffVariant variant = CoeffVariant::v2_factored;
  SignMode sign_mode = SignMode::signed_pair;
  int n = 0;
  int embed_dim = 0;
  double alpha = 1.0;
  Tensor K_raw;            // v1
  Tensor E1, E2, E3, E4;   // v2: E1,E2; v3: E1..E4; masked: E1,E2,E3
  Tensor E_M1, E_M2;       // masked

  // Materializes K on the tape. v3/masked keep the positive part
  // elementwise >= 0 and the negative part <= 0 by construction; the
  // masked variant zeroes entries through the straight-through binary mask
  // on every call.
  Tensor build() const;
};

SignedCoeff make_signed_coeff(CoeffVariant variant, int n, int embed_dim,
                              double alpha, ParamStore& params,
                              const std::string& prefix, Tape& tape,
                              rng::Xoshiro256ss& rng);

// ---- self-trend B(t) ---------------------------------------------------------

enum class G1Kind { linear_scale_b, weightpool };
enum class G2Kind { none, two_layer_fc };

struct Trend {
  int l1 = 0, l2 = 0, l3 = 0;  // branch switches, each 0 or 1
  G1Kind g1 = G1Kind::linear_scale_b;
  G2Kind g2 = G2Kind::none;
  Tensor b_vec;    // n x 1, g1 linear scaling
  Tensor E_pool;   // shared embedding for the weight-pool form of g1
  Tensor W_pool;   // embed_dim x h*h
  Tensor W_g2a, b_g2a, W_g2b, b_g2b;  // g2 two-layer FC
  Tensor B0;       // n x h constant branch

  // lambda1*g1(H_t) + lambda2*g2(H_0) + lambda3*B0; disabled branches
  // contribute exactly nothing. W_h is the ODE-layer weight shared with
  // the g1 linear scaling.
  Tensor eval(const Tensor& H_t, const Tensor& H_0, const Tensor& W_h) const;

  bool enabled() const { return l1 || l2 || l3; }
};

Trend make_trend(int l1, int l2, int l3, G1Kind g1, G2Kind g2, int n,
                 int hidden_dim, int embed_dim, ParamStore& params,
                 const std::string& prefix, Tape& tape,
                 rng::Xoshiro256ss& rng, const Tensor* shared_E1 = nullptr);

// ---- ODE layer right-hand sides ---------------------------------------------

// dH/dt = relu(K H W_h + B + b_h); pass B.defined()==false to drop the trend.
Tensor sgode_rhs(const Tensor& K, const Tensor& H, const Tensor& W_h,
                 const Tensor& b_h, const Tensor& B);

// dH/dt = relu(A_norm H W_h + b_h) with A_norm from normalize_ndcn.
Tensor ndcn_rhs(const Tensor& A_norm, const Tensor& H, const Tensor& W_h,
                const Tensor& b_h);

// I + row-softmax(relu(E E^T)), the unsigned adaptive operator.
Tensor adaptive_adjacency(const Tensor& E);

// ---- dynamics models -----------------------------------------------------------

enum class LayerKind { sgodev1, sgodev2, sgodev3, ndcn, adaptive, nograph };

LayerKind layer_kind_from_string(const std::string& s);
std::string to_string(LayerKind k);

struct DynModelConfig {
  LayerKind kind = LayerKind::sgodev2;
  int hidden_dim = 20;
  int embed_dim = 10;
  // trend switches; -1 leaves the per-kind default (v3 uses the linear
  // scaling g1, the others run without a trend)
  int trend_l1 = -1, trend_l2 = -1, trend_l3 = -1;
  double alpha = 1.0;
  double input_scale = 1.0;  // fixed data scaling folded into encoder/decoder
  bool encoder_tanh = true;
};

// Encoder -> ODE layer -> decoder over snapshot states (n x d).
class DynModel {
 public:
  DynModel(const DynModelConfig& cfg, int n, int data_dim, std::uint64_t seed,
           Tape& tape);

  // Required for the ndcn layer before forward().
  void set_graph(const graph::Graph& g);

  // Integrates the hidden state from x0 at t_grid[0] across the grid and
  // decodes every snapshot.
  std::vector<Tensor> forward(const Tensor& x0,
                              const std::vector<double>& t_grid,
                              const ode::SolverConfig& solver) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const DynModelConfig& config() const { return cfg_; }
  int n() const { return n_; }
  int data_dim() const { return data_dim_; }
  const SignedCoeff& coeff() const;
  bool has_coeff() const;
  Tape& tape() const { return *tape_; }

 private:
  DynModelConfig cfg_;
  int n_ = 0;
  int data_dim_ = 1;
  Tape* tape_ = nullptr;
  ParamStore params_;
  SignedCoeff coeff_;
  Trend trend_;
  Tensor W_enc_, b_enc_, W_dec_, b_dec_;
  Tensor W_h_, b_h_;
  Tensor A_norm_;  // ndcn constant
};

// Gaussian init helper shared by the model builders.
Tensor gaussian_param(int rows, int cols, double stddev, ParamStore& params,
                      const std::string& name, Tape& tape,
                      rng::Xoshiro256ss& rng);
Tensor zeros_param(int rows, int cols, ParamStore& params,
                   const std::string& name, Tape& tape);

}  // namespace sgode::model
