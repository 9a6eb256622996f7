#include <vector>

#include "doctest.h"
#include "sgode/kernels.hpp"
#include "sgode/rng.hpp"

using namespace sgode;

namespace {

std::vector<double> random_vec(std::size_t len, std::uint64_t seed) {
  auto g = rng::stream(seed, "test.kern");
  std::vector<double> v(len);
  for (auto& x : v) x = g.uniform(-2.0, 2.0);
  return v;
}

}  // namespace

// The omp kernels only split work across output rows, so they must agree
// bitwise with the serial reference for any size, including ones small
// enough to stay below the parallel cutoff.
TEST_CASE("omp kernels match the serial reference bitwise") {
  struct Dim {
    int m, k, n;
  };
  for (Dim d : {Dim{1, 1, 1}, Dim{3, 5, 2}, Dim{17, 9, 23}, Dim{64, 64, 64},
                Dim{130, 70, 90}}) {
    auto a = random_vec(static_cast<std::size_t>(d.m) * d.k, 7 + d.m);
    auto b = random_vec(static_cast<std::size_t>(d.k) * d.n, 19 + d.n);
    auto bt = random_vec(static_cast<std::size_t>(d.n) * d.k, 31 + d.k);
    auto at = random_vec(static_cast<std::size_t>(d.k) * d.m, 43 + d.m);
    std::vector<double> c1(static_cast<std::size_t>(d.m) * d.n, 0.5);
    std::vector<double> c2 = c1;

    kern::matmul(a.data(), d.m, d.k, b.data(), d.n, c1.data(), true);
    kern::serial::matmul(a.data(), d.m, d.k, b.data(), d.n, c2.data(), true);
    CHECK(c1 == c2);

    kern::matmul_nt(a.data(), d.m, d.k, bt.data(), d.n, c1.data());
    kern::serial::matmul_nt(a.data(), d.m, d.k, bt.data(), d.n, c2.data());
    CHECK(c1 == c2);

    kern::matmul_tn(at.data(), d.k, d.m, b.data(), d.n, c1.data(), true);
    kern::serial::matmul_tn(at.data(), d.k, d.m, b.data(), d.n, c2.data(),
                            true);
    CHECK(c1 == c2);
  }
}

TEST_CASE("matmul identity and accumulate") {
  // 2x2 identity times arbitrary matrix
  std::vector<double> eye = {1, 0, 0, 1};
  std::vector<double> x = {5, -3, 2, 7};
  std::vector<double> c(4, 0.0);
  kern::matmul(eye.data(), 2, 2, x.data(), 2, c.data());
  CHECK(c == x);
  kern::matmul(eye.data(), 2, 2, x.data(), 2, c.data(), true);
  CHECK(c == std::vector<double>{10, -6, 4, 14});
}

TEST_CASE("transpose kernels compute the right contractions") {
  // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
  std::vector<double> a = {1, 2, 3, 4};
  std::vector<double> b = {5, 6, 7, 8};
  std::vector<double> c(4, 0.0);
  // a * b^T = [[1*5+2*6, 1*7+2*8],[3*5+4*6, 3*7+4*8]]
  kern::matmul_nt(a.data(), 2, 2, b.data(), 2, c.data());
  CHECK(c == std::vector<double>{17, 23, 39, 53});
  // a^T * b = [[1*5+3*7, 1*6+3*8],[2*5+4*7, 2*6+4*8]]
  kern::matmul_tn(a.data(), 2, 2, b.data(), 2, c.data());
  CHECK(c == std::vector<double>{26, 30, 38, 44});
}

TEST_CASE("axpy") {
  std::vector<double> x = {1, 2, 3};
  std::vector<double> y = {10, 10, 10};
  kern::axpy(2.0, x.data(), y.data(), 3);
  CHECK(y == std::vector<double>{12, 14, 16});
  std::vector<double> y2 = {10, 10, 10};
  kern::serial::axpy(2.0, x.data(), y2.data(), 3);
  CHECK(y == y2);
}
