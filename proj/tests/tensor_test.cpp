#include <cmath>
#include <functional>
#include <stdexcept>

#include "doctest.h"
#include "fd_check.hpp"
#include "sgode/rng.hpp"
#include "sgode/tensor.hpp"

using namespace sgode;

namespace {

Tensor random_param(int r, int c, ParamStore& ps, const std::string& name,
                    Tape& tape, rng::Xoshiro256ss& g) {
  std::vector<double> d(static_cast<std::size_t>(r) * c);
  for (auto& v : d) v = g.uniform(-1.0, 1.0);
  return ps.add(name, Tensor::param(r, c, std::move(d), tape));
}

}  // namespace

TEST_CASE("matmul values") {
  Tensor eye = Tensor::from_rows({{1, 0}, {0, 1}});
  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor c = matmul(eye, a);
  CHECK(c.at(0, 0) == 1);
  CHECK(c.at(0, 1) == 2);
  CHECK(c.at(1, 0) == 3);
  CHECK(c.at(1, 1) == 4);

  Tensor r = matmul(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}, {4}}));
  CHECK(r.item() == 11);

  CHECK_THROWS_WITH_AS(matmul(Tensor::zeros(2, 3), Tensor::zeros(4, 5)),
                       "matmul: inner dimensions disagree, 2x3 * 4x5",
                       std::invalid_argument);
}

TEST_CASE("matmul gradient equals ones * B^T and matches finite differences") {
  Tape tape;
  auto g = rng::stream(11, "test.matmul");
  ParamStore ps;
  Tensor a = random_param(3, 4, ps, "a", tape, g);
  Tensor b = random_param(4, 2, ps, "b", tape, g);

  a.zero_grad();
  b.zero_grad();
  Tensor loss = sum(matmul(a, b));
  tape.backward(loss);
  // dA = ones(3x2) * B^T
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      double expect = 0.0;
      for (int k = 0; k < 2; ++k) expect += b.at(j, k);
      CHECK(a.grad()[i * 4 + j] == doctest::Approx(expect).epsilon(1e-12));
    }

  auto rep = fd_check(tape, {a, b}, [&] { return sum(matmul(a, b)); });
  CHECK(rep.max_rel_err < 1e-6);
  CHECK(rep.max_abs_err < 1e-6);
}

TEST_CASE("elementwise forward values") {
  Tensor x = Tensor::from_rows({{-1, 0, 2}});
  Tensor y = relu(x);
  CHECK(y.at(0, 0) == 0);
  CHECK(y.at(0, 1) == 0);
  CHECK(y.at(0, 2) == 2);

  CHECK(sigmoid(Tensor::zeros(1, 1)).item() == 0.5);
  CHECK(tanh_op(Tensor::zeros(1, 1)).item() == 0.0);

  CHECK_THROWS_AS(add(Tensor::zeros(2, 3), Tensor::zeros(3, 2)),
                  std::invalid_argument);
}

TEST_CASE("tanh gradient at zero is one") {
  Tape tape;
  ParamStore ps;
  Tensor x = ps.add("x", Tensor::param(1, 1, {0.0}, tape));
  auto rep = fd_check(tape, {x}, [&] { return sum(tanh_op(x)); }, 1e-6);
  CHECK(rep.max_rel_err < 1e-6);
  x.zero_grad();
  Tensor loss = sum(tanh_op(x));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("row-vector and scalar broadcast") {
  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor row = Tensor::from_rows({{10, 20}});
  Tensor s = add(a, row);
  CHECK(s.at(1, 0) == 13);
  CHECK(s.at(0, 1) == 22);
  Tensor sc = mul(a, Tensor::full(1, 1, 2.0));
  CHECK(sc.at(1, 1) == 8);

  Tape tape;
  ParamStore ps;
  auto g = rng::stream(12, "test.broadcast");
  Tensor aa = random_param(3, 4, ps, "aa", tape, g);
  Tensor bb = random_param(1, 4, ps, "bb", tape, g);
  Tensor cc = random_param(1, 1, ps, "cc", tape, g);
  auto rep = fd_check(tape, {aa, bb, cc},
                      [&] { return sum(mul(add(aa, bb), cc)); });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("hardsigmoid_ste forward saturation and tie") {
  Tensor x = Tensor::from_rows({{10, -10, 0}});
  Tensor y = hardsigmoid_ste(x, 1.0);
  CHECK(y.at(0, 0) == 1.0);
  CHECK(y.at(0, 1) == 0.0);
  CHECK(y.at(0, 2) == 1.0);  // hardsigmoid(0)=0.5 rounds away from zero
  CHECK_THROWS_AS(hardsigmoid_ste(x, 0.5), std::invalid_argument);
}

TEST_CASE("hardsigmoid_ste is binary and backward is the smooth surrogate") {
  auto g = rng::stream(13, "test.ste");
  Tape tape;
  ParamStore ps;
  const double alpha = 2.0;
  std::vector<double> xs(40);
  for (auto& v : xs) v = g.uniform(-4.0, 4.0);
  Tensor x = ps.add("x", Tensor::param(8, 5, xs, tape));
  Tensor y = hardsigmoid_ste(x, alpha);
  for (double v : y.data()) CHECK((v == 0.0 || v == 1.0));

  x.zero_grad();
  tape.backward(sum(y));
  for (int i = 0; i < 40; ++i) {
    const double z = alpha * xs[i];
    const double expect = (z > -3.0 && z < 3.0) ? alpha / 6.0 : 0.0;
    CHECK(x.grad()[i] == expect);
  }
}

TEST_CASE("reductions") {
  CHECK(sum(Tensor::from_rows({{1, 2, 3}})).item() == 6);
  CHECK(mean(Tensor::from_rows({{1, 2, 3}})).item() == 2);
  Tensor x = Tensor::from_rows({{1, 3}});
  CHECK(l1_mean_abs_diff(x, x).item() == 0);
  CHECK(l1_mean_abs_diff(x, Tensor::from_rows({{2, 2}})).item() == 1.0);
  CHECK_THROWS_AS(sum(Tensor()), std::domain_error);
}

TEST_CASE("masked_l1 ignores masked-out entries") {
  Tensor a = Tensor::from_rows({{1, 5}});
  Tensor b = Tensor::from_rows({{2, 100}});
  Tensor mask = Tensor::from_rows({{1, 0}});
  CHECK(masked_l1(a, b, mask).item() == 1.0);
  CHECK_THROWS_AS(masked_l1(a, b, Tensor::zeros(1, 2)), std::domain_error);
}

TEST_CASE("backward fills leaf gradients") {
  Tape tape;
  ParamStore ps;
  Tensor w = ps.add("w", Tensor::param(2, 2, {1, 2, 3, 4}, tape));
  w.zero_grad();
  tape.backward(sum(scale(w, 1.0)));
  for (double gv : w.grad()) CHECK(gv == 1.0);

  Tensor neg = Tensor::param(2, 2, {-1, -1, -1, -1}, tape);
  neg.zero_grad();
  tape.backward(sum(relu(neg)));
  for (double gv : neg.grad()) CHECK(gv == 0.0);
}

TEST_CASE("backward twice without re-forward is rejected") {
  Tape tape;
  ParamStore ps;
  Tensor w = ps.add("w", Tensor::param(1, 2, {1, 2}, tape));
  Tensor loss = sum(scale(w, 2.0));
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
  CHECK_THROWS_AS(tape.backward(w), std::logic_error);  // non-scalar
}

TEST_CASE("composite graph gradients match central finite differences") {
  Tape tape;
  ParamStore ps;
  auto g = rng::stream(77, "test.composite");
  Tensor w1 = random_param(3, 4, ps, "w1", tape, g);
  Tensor w2 = random_param(4, 4, ps, "w2", tape, g);
  Tensor b = random_param(1, 4, ps, "b", tape, g);
  std::vector<double> td(12);
  for (auto& v : td) v = g.uniform(-1.0, 1.0);
  Tensor t = Tensor::from_data(3, 4, td);
  auto forward = [&] {
    Tensor h = tanh_op(add(matmul(w1, w2), b));
    Tensor s = sigmoid(mul(h, h));
    return add(l1_mean_abs_diff(s, t), mean(relu(h)));
  };
  auto rep = fd_check(tape, {w1, w2, b}, forward);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK(rep.max_abs_err < 1e-5);
}

TEST_CASE("every primitive matches finite differences on random 3x4 input") {
  Tape tape;
  auto g = rng::stream(1234, "test.prim");
  ParamStore ps;
  Tensor a = random_param(3, 4, ps, "a", tape, g);
  Tensor b = random_param(3, 4, ps, "b", tape, g);
  Tensor m = random_param(4, 3, ps, "m", tape, g);
  Tensor col = random_param(3, 1, ps, "col", tape, g);
  Tensor pool = random_param(3, 16, ps, "pool", tape, g);

  std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
      {"relu", [&] { return sum(relu(a)); }},
      {"tanh", [&] { return sum(tanh_op(a)); }},
      {"sigmoid", [&] { return sum(sigmoid(a)); }},
      {"add", [&] { return sum(add(a, b)); }},
      {"sub", [&] { return sum(sub(a, b)); }},
      {"mul", [&] { return sum(mul(a, b)); }},
      {"scale", [&] { return sum(scale(a, -1.7)); }},
      {"matmul", [&] { return sum(matmul(a, m)); }},
      {"matmul_nt", [&] { return sum(matmul_nt(a, b)); }},
      {"transpose", [&] { return sum(matmul(transpose(a), b)); }},
      {"lincomb", [&] { return sum(lincomb({{a, 0.3}, {b, -1.1}})); }},
      {"row_softmax", [&] { return sum(mul(row_softmax(a), b)); }},
      {"row_scale", [&] { return sum(row_scale(a, col)); }},
      {"per_node_linear", [&] { return sum(per_node_linear(a, pool)); }},
      {"concat_cols",
       [&] { return sum(mul(concat_cols(a, b), concat_cols(b, a))); }},
      {"mean", [&] { return mean(mul(a, a)); }},
      {"l1", [&] { return l1_mean_abs_diff(a, b); }},
  };
  for (auto& [name, fwd] : cases) {
    INFO("primitive: " << name);
    auto rep = fd_check(tape, {a, b, m, col, pool}, fwd);
    CHECK(rep.max_rel_err < 1e-4);
    CHECK(rep.max_abs_err < 1e-5);
  }
}

TEST_CASE("operations are deterministic") {
  auto build = [] {
    auto g = rng::stream(5, "test.det");
    std::vector<double> d(12);
    for (auto& v : d) v = g.uniform(-1.0, 1.0);
    Tensor x = Tensor::from_data(3, 4, d);
    return row_softmax(tanh_op(matmul_nt(x, x)));
  };
  Tensor r1 = build();
  Tensor r2 = build();
  CHECK(r1.data() == r2.data());
}

TEST_CASE("adam zero gradient with zero weight decay leaves params unchanged") {
  Tape tape;
  ParamStore ps;
  ps.add("w", Tensor::param(2, 2, {1, 2, 3, 4}, tape));
  ps.zero_grad();
  Adam opt({.lr = 0.1});
  opt.step(ps);
  CHECK(ps.get("w").data() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("adam first step moves by about -lr * sign(g)") {
  Tape tape;
  ParamStore ps;
  Tensor w = ps.add("w", Tensor::param(1, 3, {0.0, 0.0, 0.0}, tape));
  w.grad() = {0.5, -2.0, 1e-3};
  Adam opt({.lr = 0.01});
  opt.step(ps);
  CHECK(w.data()[0] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(w.data()[1] == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(w.data()[2] == doctest::Approx(-0.01).epsilon(1e-4));
}

TEST_CASE("adam weight decay acts as an L2 pull toward zero") {
  Tape tape;
  ParamStore ps;
  Tensor w = ps.add("w", Tensor::param(1, 2, {4.0, -4.0}, tape));
  ps.zero_grad();
  Adam opt({.lr = 0.01, .weight_decay = 1e-3});
  opt.step(ps);
  CHECK(w.data()[0] < 4.0);
  CHECK(w.data()[1] > -4.0);
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
  Tape tape;
  ParamStore ps;
  Tensor w = ps.add("bad.param", Tensor::param(1, 1, {0.0}, tape));
  w.grad() = {std::nan("")};
  Adam opt({});
  CHECK_THROWS_WITH_AS(opt.step(ps),
                       "adam: non-finite gradient in parameter 'bad.param'",
                       std::runtime_error);
}
