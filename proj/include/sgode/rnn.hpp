#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgode/model.hpp"
#include "sgode/rng.hpp"
#include "sgode/tensor.hpp"

namespace sgode::rnn {

enum class Gate { reset, update, candidate };

struct CellConfig {
  int n = 0;
  int hidden_dim = 64;
  int diffusion_m = 2;    // sampled intervals on [0,1]; m+1 extracted states
  int rk4_substeps = 4;   // RK4 steps per sampled interval
  bool trend = true;      // B(t); off reproduces the without-B ablation
  bool only_final = false;  // extract the final state only (Only FF)
};

// GRU cell whose gate transforms run a signed continuous diffusion:
// the gate input evolves under dH/dt = K H W_h + B(t) on [0,1] and the
// gate reads a learned combination of the m+1 equidistant samples.
// K is owned by the enclosing stack (one per encoder, one per decoder).
class SignedDiffusionCell {
 public:
  SignedDiffusionCell(const CellConfig& cfg, const model::SignedCoeff& coeff,
                      ParamStore& params, const std::string& prefix,
                      Tape& tape, rng::Xoshiro256ss& rng);

  // One GRU step; x_t and h_prev are n x hidden.
  Tensor step(const Tensor& x_t, const Tensor& h_prev) const;

  // Diffuse h_in under the shared field and extract the gate readout.
  Tensor diffuse(const Tensor& h_in, Gate q) const;

  const CellConfig& config() const { return cfg_; }

 private:
  Tensor gate_input(const Tensor& x_t, const Tensor& h, Gate q) const;

  CellConfig cfg_;
  const model::SignedCoeff* coeff_;
  Tensor W_h_;                    // inner ODE weight
  model::Trend trend_;            // g1 linear scaling + g2 two-layer FC + B0
  Tensor proj_[3];                // per-gate (2h x h) concat projections
  std::vector<Tensor> read_[3];   // per-gate per-sample (h x h) readouts
  Tensor bias_[3];                // per-gate 1 x h
};

struct ForecasterConfig {
  int n = 0;
  int data_dim = 1;
  int hidden_dim = 64;
  int embed_dim = 10;
  int layers = 1;
  int window = 12;   // T
  int horizon = 12;  // tau
  int diffusion_m = 2;
  int rk4_substeps = 4;
  model::SignMode sign_mode = model::SignMode::signed_pair;
  bool trend = true;
  bool only_final = false;
};

// Sequence-to-sequence window forecaster; the encoder consumes T input
// steps, the decoder rolls out tau steps feeding back its own predictions
// (or the ground truth under scheduled sampling during training).
class Forecaster {
 public:
  Forecaster(const ForecasterConfig& cfg, std::uint64_t seed, Tape& tape);

  // window: T tensors (n x data_dim). teacher: tau ground-truth tensors or
  // nullptr; sampler draws per decoder step whether to feed the truth.
  std::vector<Tensor> forward(const std::vector<Tensor>& window,
                              const std::vector<Tensor>* teacher,
                              double teacher_prob,
                              rng::Xoshiro256ss* sampler) const;

  std::vector<Tensor> forecast(const std::vector<Tensor>& window) const {
    return forward(window, nullptr, 0.0, nullptr);
  }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ForecasterConfig& config() const { return cfg_; }
  const model::SignedCoeff& encoder_coeff() const { return enc_coeff_; }
  const model::SignedCoeff& decoder_coeff() const { return dec_coeff_; }
  Tape& tape() const { return *tape_; }

 private:
  ForecasterConfig cfg_;
  Tape* tape_ = nullptr;
  ParamStore params_;
  model::SignedCoeff enc_coeff_, dec_coeff_;
  std::vector<SignedDiffusionCell> enc_cells_, dec_cells_;
  Tensor W_in_;           // data_dim -> hidden
  Tensor W_out_, b_out_;  // hidden -> data_dim
};

}  // namespace sgode::rnn
