#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgode/tensor.hpp"

namespace sgode::graph {

// Weighted adjacency, dense row-major; A[i*n+j] is the weight of edge i->j.
// Zero diagonal by construction; undirected graphs keep A symmetric.
struct Graph {
  int n = 0;
  bool directed = false;
  std::vector<double> adj;

  double& at(int i, int j) { return adj[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const {
    return adj[static_cast<std::size_t>(i) * n + j];
  }
  std::size_t edge_count() const;  // undirected pairs or directed arcs
  void validate() const;           // invariant check, throws on violation
};

// Five benchmark families. Every generator is a pure function of its
// parameters and seed (streams "graph.<family>").
Graph gen_grid(int side);
Graph gen_random(int n, double p, std::uint64_t seed);
Graph gen_powerlaw(int n, int m_attach, std::uint64_t seed);
Graph gen_smallworld(int n, int k_ring, double p_rewire, std::uint64_t seed);
Graph gen_community(int n, int blocks, double p_in, double p_out,
                    std::uint64_t seed);

// D^{-1/2} (D - A) D^{-1/2}; isolated nodes yield zero rows/columns.
Tensor normalize_ndcn(const Graph& g);

enum class Direction { out, in };

// Rows sum to 1 where the corresponding degree is positive, else zero row.
// out: D_O^{-1} A, in: D_I^{-1} A^T.
Tensor row_normalize(const Graph& g, Direction dir);

// "SGODE-GRAPH v1" ASCII format.
void save_graph(const Graph& g, const std::string& path);
Graph load_graph(const std::string& path);

}  // namespace sgode::graph
