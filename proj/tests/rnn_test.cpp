#include <cmath>
#include <memory>
#include <stdexcept>

#include "doctest.h"
#include "fd_check.hpp"
#include "sgode/rnn.hpp"

using namespace sgode;
using namespace sgode::rnn;

namespace {

void zero_params(ParamStore& ps) {
  for (auto& [name, t] : ps.items())
    std::fill(t.data().begin(), t.data().end(), 0.0);
}

struct CellFixture {
  Tape tape;
  ParamStore params;
  model::SignedCoeff coeff;
  CellConfig cell_cfg;
  std::unique_ptr<SignedDiffusionCell> cell;

  CellFixture(int n, int h, int m, bool trend = true, bool only_final = false) {
    cell_cfg.n = n;
    cell_cfg.hidden_dim = h;
    cell_cfg.diffusion_m = m;
    cell_cfg.rk4_substeps = 4;
    cell_cfg.trend = trend;
    cell_cfg.only_final = only_final;
    auto rng = rng::stream(99, "test.cell");
    coeff = model::make_signed_coeff(model::CoeffVariant::v3_signed_pair, n, 3,
                                     1.0, params, "K.", tape, rng);
    cell = std::make_unique<SignedDiffusionCell>(cell_cfg, coeff, params,
                                                 "cell.", tape, rng);
  }
};

}  // namespace

TEST_CASE("signed_diffusion: frozen field reduces to a readout of the input") {
  CellFixture f(3, 4, 2);
  zero_params(f.params);
  // readouts w0 = I, w1 = 2I, w2 = 3I: output = (1+2+3) * H_in
  for (int k = 0; k < 3; ++k) {
    auto& w = f.params.get("cell.R.w" + std::to_string(k)).data();
    for (int i = 0; i < 4; ++i) w[i * 4 + i] = k + 1.0;
  }
  Tensor h_in = Tensor::from_rows(
      {{0.5, -1, 2, 0}, {1, 1, -1, 3}, {0, 0.25, 0.5, -0.75}});
  Tensor out = f.cell->diffuse(h_in, Gate::reset);
  for (int i = 0; i < out.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(6.0 * h_in.data()[i]).epsilon(1e-12));
}

TEST_CASE("signed_diffusion: zero readout weights leave only the bias") {
  CellFixture f(3, 4, 1);
  zero_params(f.params);
  f.params.get("cell.U.b").data() = {1.5, -0.5, 0.25, 2.0};
  Tensor h_in = Tensor::from_rows(
      {{0.5, -1, 2, 0}, {1, 1, -1, 3}, {0, 0.25, 0.5, -0.75}});
  Tensor out = f.cell->diffuse(h_in, Gate::update);
  for (int i = 0; i < 3; ++i) {
    CHECK(out.at(i, 0) == 1.5);
    CHECK(out.at(i, 1) == -0.5);
    CHECK(out.at(i, 2) == 0.25);
    CHECK(out.at(i, 3) == 2.0);
  }
}

TEST_CASE("dcgru_step: all-zero parameters halve the hidden state") {
  CellFixture f(2, 3, 1);
  zero_params(f.params);
  Tensor x = Tensor::from_rows({{0.3, -0.7, 1.1}, {0.0, 0.5, -0.2}});
  Tensor h_prev = Tensor::from_rows({{1.0, -2.0, 4.0}, {0.5, 0.25, -1.0}});
  Tensor h = f.cell->step(x, h_prev);
  for (int i = 0; i < h.size(); ++i)
    CHECK(h.data()[i] == doctest::Approx(0.5 * h_prev.data()[i]).epsilon(1e-12));

  Tensor z = Tensor::zeros(2, 3);
  Tensor h0 = f.cell->step(z, z);
  for (double v : h0.data()) CHECK(v == 0.0);
}

TEST_CASE("dcgru_step: hidden state stays between h_prev and the candidate") {
  CellFixture f(4, 5, 2);
  auto rng = rng::stream(3, "test.box");
  Tensor x = Tensor::zeros(4, 5);
  Tensor h_prev = Tensor::zeros(4, 5);
  for (auto& v : x.data()) v = rng.uniform(-1, 1);
  for (auto& v : h_prev.data()) v = rng.uniform(-1, 1);
  Tensor h = f.cell->step(x, h_prev);
  // convex combination of h_prev and a tanh-bounded candidate
  for (int i = 0; i < h.size(); ++i) {
    const double lo = std::min(h_prev.data()[i], -1.0);
    const double hi = std::max(h_prev.data()[i], 1.0);
    CHECK(h.data()[i] >= lo - 1e-12);
    CHECK(h.data()[i] <= hi + 1e-12);
  }
}

TEST_CASE("signed_diffusion extracts exactly m+1 states") {
  for (int m : {1, 2, 4}) {
    CellFixture f(2, 3, m);
    int reads = 0;
    for (auto& [name, t] : f.params.items())
      if (name.rfind("cell.C.w", 0) == 0) ++reads;
    CHECK(reads == m + 1);
  }
  CHECK_THROWS_AS(CellFixture(2, 3, 0), std::invalid_argument);
}

TEST_CASE("only-final ablation reads one state") {
  CellFixture f(2, 3, 3, true, true);
  int reads = 0;
  for (auto& [name, t] : f.params.items())
    if (name.rfind("cell.R.w", 0) == 0) ++reads;
  CHECK(reads == 1);
}

TEST_CASE("gradients through signed_diffusion match finite differences") {
  CellFixture f(3, 4, 2);
  Tensor h_in = Tensor::from_rows(
      {{0.5, -1, 2, 0}, {1, 1, -1, 3}, {0, 0.25, 0.5, -0.75}});
  std::vector<Tensor> params;
  for (auto& [name, t] : f.params.items()) params.push_back(t);
  auto rep = fd_check(
      f.tape, params,
      [&] {
        Tensor out = f.cell->diffuse(h_in, Gate::candidate);
        return mean(mul(out, out));
      },
      1e-6);
  CHECK(rep.max_rel_err < 1e-3);
}

TEST_CASE("forecaster shapes, determinism and window contract") {
  Tape tape;
  ForecasterConfig cfg;
  cfg.n = 4;
  cfg.hidden_dim = 6;
  cfg.embed_dim = 3;
  cfg.window = 5;
  cfg.horizon = 3;
  cfg.diffusion_m = 1;
  Forecaster m(cfg, 7, tape);

  auto rng = rng::stream(8, "test.fc");
  std::vector<Tensor> window;
  for (int t = 0; t < 5; ++t) {
    std::vector<double> d(4);
    for (auto& v : d) v = rng.uniform(-1, 1);
    window.push_back(Tensor::from_data(4, 1, d));
  }
  tape.set_recording(false);
  auto out = m.forecast(window);
  REQUIRE(out.size() == 3);
  for (auto& o : out) {
    CHECK(o.rows() == 4);
    CHECK(o.cols() == 1);
    for (double v : o.data()) CHECK(std::isfinite(v));
  }
  auto out2 = m.forecast(window);
  for (std::size_t k = 0; k < out.size(); ++k)
    CHECK(out[k].data() == out2[k].data());

  window.pop_back();
  CHECK_THROWS_AS(m.forecast(window), std::invalid_argument);
  tape.set_recording(true);
}

TEST_CASE("encoder and decoder own independent coefficient matrices") {
  Tape tape;
  ForecasterConfig cfg;
  cfg.n = 3;
  cfg.hidden_dim = 4;
  cfg.embed_dim = 2;
  Forecaster m(cfg, 5, tape);
  CHECK(m.params().contains("enc.K.E1"));
  CHECK(m.params().contains("dec.K.E1"));
  CHECK(m.encoder_coeff().E1.data() != m.decoder_coeff().E1.data());
  tape.set_recording(false);
  Tensor ke = m.encoder_coeff().build();
  Tensor kd = m.decoder_coeff().build();
  CHECK(ke.data() != kd.data());
  tape.set_recording(true);
}

TEST_CASE("forecaster gradients flow through every parameter and match FD") {
  Tape tape;
  ForecasterConfig cfg;
  cfg.n = 3;
  cfg.hidden_dim = 4;
  cfg.embed_dim = 2;
  cfg.window = 3;
  cfg.horizon = 2;
  cfg.diffusion_m = 1;
  cfg.rk4_substeps = 2;
  Forecaster m(cfg, 21, tape);

  auto rng = rng::stream(9, "test.fcgrad");
  std::vector<Tensor> window, target;
  for (int t = 0; t < 3; ++t) {
    std::vector<double> d(3);
    for (auto& v : d) v = rng.uniform(-1, 1);
    window.push_back(Tensor::from_data(3, 1, d));
  }
  for (int t = 0; t < 2; ++t) {
    std::vector<double> d(3);
    for (auto& v : d) v = rng.uniform(-1, 1);
    target.push_back(Tensor::from_data(3, 1, d));
  }

  m.params().zero_grad();
  auto out = m.forward(window, nullptr, 0.0, nullptr);
  Tensor d0 = sub(out[0], target[0]);
  Tensor d1 = sub(out[1], target[1]);
  tape.backward(add(mean(mul(d0, d0)), mean(mul(d1, d1))));
  for (auto& [name, p] : m.params().items()) {
    double norm = 0;
    for (double gv : p.grad()) norm += std::abs(gv);
    INFO("param: " << name);
    CHECK(norm > 0.0);
  }

  std::vector<Tensor> params;
  for (auto& [name, t] : m.params().items()) params.push_back(t);
  auto rep = fd_check(
      tape, params,
      [&] {
        auto o = m.forward(window, nullptr, 0.0, nullptr);
        Tensor e0 = sub(o[0], target[0]);
        Tensor e1 = sub(o[1], target[1]);
        return add(mean(mul(e0, e0)), mean(mul(e1, e1)));
      },
      1e-6);
  CHECK(rep.max_rel_err < 1e-3);
}
