#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "doctest.h"
#include "sgode/graph.hpp"

using namespace sgode;
using namespace sgode::graph;

namespace {

int degree(const Graph& g, int i) {
  int d = 0;
  for (int j = 0; j < g.n; ++j)
    if (g.at(i, j) != 0.0) ++d;
  return d;
}

int count_components(const Graph& g) {
  std::vector<int> comp(g.n, -1);
  int ncomp = 0;
  for (int s = 0; s < g.n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack = {s};
    comp[s] = ncomp;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int j = 0; j < g.n; ++j)
        if (g.at(v, j) != 0.0 && comp[j] < 0) {
          comp[j] = ncomp;
          stack.push_back(j);
        }
    }
    ++ncomp;
  }
  return ncomp;
}

}  // namespace

TEST_CASE("grid: Moore neighborhood") {
  Graph g = gen_grid(3);
  CHECK(g.n == 9);
  CHECK(degree(g, 4) == 8);          // center node
  CHECK(g.edge_count() == 20);       // degree sum 4*3+4*5+8 = 40
  g.validate();

  Graph big = gen_grid(20);
  CHECK(big.n == 400);
  CHECK_THROWS_AS(gen_grid(1), std::invalid_argument);
}

TEST_CASE("random: edge probability extremes and binomial oracle") {
  CHECK(gen_random(10, 0.0, 1).edge_count() == 0);
  CHECK(gen_random(10, 1.0, 1).edge_count() == 45);
  CHECK_THROWS_AS(gen_random(10, 1.5, 1), std::invalid_argument);

  const int n = 400;
  const double p = 0.1;
  const double pairs = n * (n - 1) / 2.0;
  const double mu = p * pairs;
  const double sigma = std::sqrt(pairs * p * (1 - p));
  Graph g = gen_random(n, p, 99);
  g.validate();
  CHECK(std::abs(static_cast<double>(g.edge_count()) - mu) < 4.0 * sigma);
}

TEST_CASE("powerlaw: construction edge count and handshake") {
  Graph g = gen_powerlaw(400, 5, 7);
  g.validate();
  CHECK(g.edge_count() == 10 + 5 * 395);  // clique + per-node attachments
  std::size_t degsum = 0;
  for (int i = 0; i < g.n; ++i) degsum += degree(g, i);
  CHECK(degsum == 2 * g.edge_count());
  CHECK_THROWS_AS(gen_powerlaw(5, 5, 7), std::invalid_argument);
}

TEST_CASE("powerlaw grows heavier hubs than random at equal density") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Graph ba = gen_powerlaw(200, 4, seed);
    const double p =
        2.0 * ba.edge_count() / (200.0 * 199.0);  // matched density
    Graph er = gen_random(200, p, seed);
    int mba = 0, mer = 0;
    for (int i = 0; i < 200; ++i) {
      mba = std::max(mba, degree(ba, i));
      mer = std::max(mer, degree(er, i));
    }
    if (mba > mer) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("smallworld: lattice and rewiring invariants") {
  Graph lattice = gen_smallworld(10, 4, 0.0, 3);
  for (int i = 0; i < 10; ++i) CHECK(degree(lattice, i) == 4);

  Graph c6 = gen_smallworld(6, 2, 0.0, 3);
  for (int i = 0; i < 6; ++i) {
    CHECK(degree(c6, i) == 2);
    CHECK(c6.at(i, (i + 1) % 6) == 1.0);
  }

  for (double pr : {0.0, 0.1, 0.5, 1.0}) {
    Graph g = gen_smallworld(30, 4, pr, 5);
    g.validate();
    CHECK(g.edge_count() == 30 * 4 / 2);
  }
  CHECK_THROWS_AS(gen_smallworld(10, 3, 0.1, 1), std::invalid_argument);
}

TEST_CASE("community: block structure") {
  Graph zero_out = gen_community(40, 4, 0.3, 0.0, 11);
  CHECK(count_components(zero_out) >= 4);

  Graph g = gen_community(400, 4, 0.2, 0.01, 13);
  g.validate();
  double within = 0, between = 0, within_pairs = 0, between_pairs = 0;
  for (int i = 0; i < g.n; ++i)
    for (int j = i + 1; j < g.n; ++j) {
      const bool same = (i / 100) == (j / 100);
      (same ? within_pairs : between_pairs) += 1;
      if (g.at(i, j) != 0.0) (same ? within : between) += 1;
    }
  CHECK(within / within_pairs > between / between_pairs);
  CHECK_THROWS_AS(gen_community(4, 8, 0.2, 0.01, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_community(40, 4, 0.1, 0.5, 1), std::invalid_argument);
}

TEST_CASE("generators are deterministic in (params, seed)") {
  CHECK(gen_random(50, 0.2, 42).adj == gen_random(50, 0.2, 42).adj);
  CHECK(gen_powerlaw(50, 3, 42).adj == gen_powerlaw(50, 3, 42).adj);
  CHECK(gen_smallworld(50, 4, 0.2, 42).adj ==
        gen_smallworld(50, 4, 0.2, 42).adj);
  CHECK(gen_community(50, 2, 0.3, 0.05, 42).adj ==
        gen_community(50, 2, 0.3, 0.05, 42).adj);
  CHECK(gen_random(50, 0.2, 42).adj != gen_random(50, 0.2, 43).adj);
}

TEST_CASE("normalize_ndcn") {
  Graph pair;
  pair.n = 2;
  pair.adj = {0, 1, 1, 0};
  Tensor a = normalize_ndcn(pair);
  CHECK(a.at(0, 0) == 1.0);
  CHECK(a.at(0, 1) == -1.0);
  CHECK(a.at(1, 0) == -1.0);
  CHECK(a.at(1, 1) == 1.0);

  Graph empty;
  empty.n = 3;
  empty.adj.assign(9, 0.0);
  Tensor z = normalize_ndcn(empty);
  for (double v : z.data()) CHECK(v == 0.0);

  // 4-cycle is regular: rows of the normalized Laplacian sum to zero
  Graph cyc = gen_smallworld(4, 2, 0.0, 1);
  Tensor l = normalize_ndcn(cyc);
  for (int i = 0; i < 4; ++i) {
    double rs = 0;
    for (int j = 0; j < 4; ++j) rs += l.at(i, j);
    CHECK(rs == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("row_normalize") {
  Graph d;
  d.n = 2;
  d.directed = true;
  d.adj = {0, 1, 0, 0};  // single arc 0 -> 1
  Tensor out = row_normalize(d, Direction::out);
  CHECK(out.at(0, 0) == 0.0);
  CHECK(out.at(0, 1) == 1.0);
  CHECK(out.at(1, 0) == 0.0);  // no out-edges: zero row
  Tensor in = row_normalize(d, Direction::in);
  CHECK(in.at(1, 0) == 1.0);  // node 1 receives from 0
  CHECK(in.at(0, 1) == 0.0);

  Graph tri = gen_random(3, 1.0, 1);
  Tensor t = row_normalize(tri, Direction::out);
  CHECK(t.at(0, 1) == 0.5);
  CHECK(t.at(2, 0) == 0.5);

  Graph g = gen_random(40, 0.15, 21);
  Tensor rn = row_normalize(g, Direction::out);
  for (int i = 0; i < g.n; ++i) {
    double rs = 0;
    for (int j = 0; j < g.n; ++j) rs += rn.at(i, j);
    if (degree(g, i) > 0)
      CHECK(std::abs(rs - 1.0) < 1e-12);
    else
      CHECK(rs == 0.0);
  }
}

TEST_CASE("graph file round trip") {
  Graph g = gen_smallworld(24, 4, 0.3, 17);
  const char* path = "graph_roundtrip.txt";
  save_graph(g, path);
  Graph h = load_graph(path);
  CHECK(h.n == g.n);
  CHECK(h.directed == g.directed);
  CHECK(h.adj == g.adj);
  std::remove(path);
}
