#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mgmn/errors.hpp"

namespace mgmn {

struct Edge {
  int u = 0;
  int v = 0;
  double weight = 1.0;
};

/// Undirected graph with an N x d node feature matrix.
struct Graph {
  std::string id;
  Eigen::MatrixXd features;  // N x d
  std::vector<Edge> edges;   // undirected, 0-based, no self-loops
  std::vector<int> labels;   // optional per-node category (GED substitution)
  std::optional<std::string> group;

  int num_nodes() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  bool has_labels() const { return !labels.empty(); }
  /// Label of node i, or 0 when the graph is unlabeled.
  int label(int i) const { return labels.empty() ? 0 : labels[static_cast<std::size_t>(i)]; }
};

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
template <typename Scalar>
struct BasicNormalizedAdjacency {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix;
};
using NormalizedAdjacency = BasicNormalizedAdjacency<double>;

enum class Task { classification, regression };

/// (g1, g2, y): y in {-1, +1} for classification, (0, 1] for regression.
struct LabeledPair {
  std::string g1;
  std::string g2;
  double target = 0.0;
};

/// Checks the graph invariants and canonicalises the edge list: each edge is
/// stored once as (min, max) and duplicates are merged (weights of repeated
/// edges are not summed; the first occurrence wins). Throws GraphError on an
/// empty graph, a self-loop, an out-of-range index, or a label count that
/// does not match N. Returns one warning per merged duplicate.
std::vector<std::string> validate(Graph& g);

/// Non-mutating check: throws on the same errors as validate() and on
/// duplicate edges.
void check(const Graph& g);

/// Throws GraphError unless every graph shares `dim` feature columns.
void check_feature_width(const Graph& g, int dim);

template <typename Scalar = double>
BasicNormalizedAdjacency<Scalar> normalized_adjacency(const Graph& g) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int n = g.num_nodes();
  Mat a = Mat::Identity(n, n);
  for (const Edge& e : g.edges) {
    a(e.u, e.v) += static_cast<Scalar>(e.weight);
    if (e.u != e.v) a(e.v, e.u) += static_cast<Scalar>(e.weight);
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_sqrt =
      a.rowwise().sum().array().sqrt().inverse();
  BasicNormalizedAdjacency<Scalar> out;
  out.matrix = Mat::Zero(n, n);
  // Filled pairwise so that out(i, j) and out(j, i) are the same double.
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (a(i, j) == Scalar(0)) continue;
      const Scalar v = a(i, j) * (inv_sqrt(i) * inv_sqrt(j));
      out.matrix(i, j) = v;
      out.matrix(j, i) = v;
    }
  }
  return out;
}

/// Relabels nodes so that new node perm[i] is old node i.
Graph permute_nodes(const Graph& g, const std::vector<int>& perm);

}  // namespace mgmn
