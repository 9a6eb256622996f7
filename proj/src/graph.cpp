#include "sgode/graph.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sgode/rng.hpp"

namespace sgode::graph {

namespace {

Graph make_graph(int n, bool directed) {
  if (n <= 0) throw std::invalid_argument("graph: node count must be positive");
  Graph g;
  g.n = n;
  g.directed = directed;
  g.adj.assign(static_cast<std::size_t>(n) * n, 0.0);
  return g;
}

void add_undirected(Graph& g, int i, int j, double w = 1.0) {
  g.at(i, j) = w;
  g.at(j, i) = w;
}

}  // namespace

std::size_t Graph::edge_count() const {
  std::size_t cnt = 0;
  for (int i = 0; i < n; ++i) {
    const int j0 = directed ? 0 : i + 1;
    for (int j = j0; j < n; ++j)
      if (i != j && at(i, j) != 0.0) ++cnt;
  }
  return cnt;
}

void Graph::validate() const {
  for (int i = 0; i < n; ++i) {
    if (at(i, i) != 0.0)
      throw std::logic_error("graph: nonzero diagonal at node " +
                             std::to_string(i));
    for (int j = 0; j < n; ++j) {
      const double w = at(i, j);
      if (!std::isfinite(w) || w < 0.0)
        throw std::logic_error("graph: invalid weight at (" +
                               std::to_string(i) + "," + std::to_string(j) +
                               ")");
      if (!directed && at(j, i) != w)
        throw std::logic_error("graph: asymmetric undirected adjacency");
    }
  }
}

Graph gen_grid(int side) {
  if (side < 2) throw std::invalid_argument("gen_grid: side must be >= 2");
  Graph g = make_graph(side * side, false);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= side || cc < 0 || cc >= side) continue;
          add_undirected(g, r * side + c, rr * side + cc);
        }
  return g;
}

Graph gen_random(int n, double p, std::uint64_t seed) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("gen_random: p must lie in [0,1]");
  Graph g = make_graph(n, false);
  auto rng = rng::stream(seed, "graph.random");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < p) add_undirected(g, i, j);
  return g;
}

Graph gen_powerlaw(int n, int m_attach, std::uint64_t seed) {
  if (m_attach < 1 || m_attach >= n)
    throw std::invalid_argument(
        "gen_powerlaw: need 1 <= m_attach < n, got m_attach=" +
        std::to_string(m_attach) + " n=" + std::to_string(n));
  Graph g = make_graph(n, false);
  auto rng = rng::stream(seed, "graph.powerlaw");
  // Endpoint pool: each node appears once per incident edge, so uniform
  // draws from the pool realize preferential attachment.
  std::vector<int> pool;
  for (int i = 0; i < m_attach; ++i)
    for (int j = i + 1; j < m_attach; ++j) {
      add_undirected(g, i, j);
      pool.push_back(i);
      pool.push_back(j);
    }
  std::vector<int> targets;
  for (int v = m_attach; v < n; ++v) {
    targets.clear();
    while (static_cast<int>(targets.size()) < m_attach) {
      int t = pool[rng.uniform_int(pool.size())];
      bool dup = false;
      for (int u : targets) dup = dup || (u == t);
      if (!dup) targets.push_back(t);
    }
    for (int t : targets) {
      add_undirected(g, v, t);
      pool.push_back(v);
      pool.push_back(t);
    }
  }
  return g;
}

Graph gen_smallworld(int n, int k_ring, double p_rewire, std::uint64_t seed) {
  if (k_ring % 2 != 0)
    throw std::invalid_argument("gen_smallworld: k_ring must be even");
  if (k_ring < 2 || k_ring >= n)
    throw std::invalid_argument("gen_smallworld: need 2 <= k_ring < n");
  if (p_rewire < 0.0 || p_rewire > 1.0)
    throw std::invalid_argument("gen_smallworld: p_rewire must lie in [0,1]");
  Graph g = make_graph(n, false);
  for (int i = 0; i < n; ++i)
    for (int d = 1; d <= k_ring / 2; ++d) add_undirected(g, i, (i + d) % n);
  auto rng = rng::stream(seed, "graph.smallworld");
  // Watts-Strogatz pass: each lattice edge (i, i+d) may move its far end.
  for (int d = 1; d <= k_ring / 2; ++d)
    for (int i = 0; i < n; ++i) {
      const int j = (i + d) % n;
      if (rng.uniform01() >= p_rewire) continue;
      if (g.at(i, j) == 0.0) continue;  // already moved by an earlier rewire
      int t = static_cast<int>(rng.uniform_int(n));
      int guard = 0;
      while ((t == i || g.at(i, t) != 0.0) && guard < 16 * n) {
        t = static_cast<int>(rng.uniform_int(n));
        ++guard;
      }
      if (t == i || g.at(i, t) != 0.0) continue;  // node saturated, keep edge
      g.at(i, j) = 0.0;
      g.at(j, i) = 0.0;
      add_undirected(g, i, t);
    }
  return g;
}

Graph gen_community(int n, int blocks, double p_in, double p_out,
                    std::uint64_t seed) {
  if (blocks < 2) throw std::invalid_argument("gen_community: blocks must be >= 2");
  if (blocks > n) throw std::invalid_argument("gen_community: blocks > n");
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0))
    throw std::invalid_argument("gen_community: need 0 <= p_out <= p_in <= 1");
  Graph g = make_graph(n, false);
  const int base = n / blocks;
  auto block_of = [&](int v) {
    int b = v / base;
    return b >= blocks ? blocks - 1 : b;  // remainder joins the last block
  };
  auto rng = rng::stream(seed, "graph.community");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double p = block_of(i) == block_of(j) ? p_in : p_out;
      if (rng.uniform01() < p) add_undirected(g, i, j);
    }
  return g;
}

Tensor normalize_ndcn(const Graph& g) {
  if (g.directed)
    throw std::invalid_argument("normalize_ndcn: undirected graph required");
  const int n = g.n;
  std::vector<double> dinv_sqrt(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) deg += g.at(i, j);
    dinv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Tensor out = Tensor::zeros(n, n);
  for (int i = 0; i < n; ++i) {
    double deg = dinv_sqrt[i] > 0.0 ? 1.0 / (dinv_sqrt[i] * dinv_sqrt[i]) : 0.0;
    for (int j = 0; j < n; ++j) {
      const double lap = (i == j ? deg : 0.0) - g.at(i, j);
      out.at(i, j) = dinv_sqrt[i] * lap * dinv_sqrt[j];
    }
  }
  return out;
}

Tensor row_normalize(const Graph& g, Direction dir) {
  const int n = g.n;
  Tensor out = Tensor::zeros(n, n);
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j)
      deg += dir == Direction::out ? g.at(i, j) : g.at(j, i);
    if (deg <= 0.0) continue;
    for (int j = 0; j < n; ++j)
      out.at(i, j) =
          (dir == Direction::out ? g.at(i, j) : g.at(j, i)) / deg;
  }
  return out;
}

void save_graph(const Graph& g, const std::string& path) {
  std::ostringstream os;
  os << "SGODE-GRAPH v1 n=" << g.n << " directed=" << (g.directed ? 1 : 0)
     << "\n";
  char buf[64];
  for (int i = 0; i < g.n; ++i) {
    const int j0 = g.directed ? 0 : i + 1;
    for (int j = j0; j < g.n; ++j) {
      if (i == j || g.at(i, j) == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%.17g", g.at(i, j));
      os << i << " " << j << " " << buf << "\n";
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_graph: cannot open " + path);
  f << os.str();
}

Graph load_graph(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_graph: cannot open " + path);
  std::string magic, version, nfield, dfield;
  f >> magic >> version >> nfield >> dfield;
  if (magic != "SGODE-GRAPH" || version != "v1" ||
      nfield.rfind("n=", 0) != 0 || dfield.rfind("directed=", 0) != 0)
    throw std::runtime_error("load_graph: bad header in " + path);
  const int n = std::stoi(nfield.substr(2));
  const bool directed = dfield.substr(9) == "1";
  Graph g = make_graph(n, directed);
  int i, j;
  double w;
  while (f >> i >> j >> w) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw std::runtime_error("load_graph: edge endpoint out of range");
    g.at(i, j) = w;
    if (!directed) g.at(j, i) = w;
  }
  g.validate();
  return g;
}

}  // namespace sgode::graph
