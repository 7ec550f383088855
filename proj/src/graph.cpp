#include "mgmn/graph.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "mgmn/log.hpp"

namespace mgmn {
namespace {

void check_nodes(const Graph& g) {
  if (g.num_nodes() < 1) throw GraphError("graph '" + g.id + "' has no nodes");
  if (g.has_labels() && static_cast<int>(g.labels.size()) != g.num_nodes()) {
    throw GraphError("graph '" + g.id + "' has " + std::to_string(g.labels.size()) +
                     " labels for " + std::to_string(g.num_nodes()) + " nodes");
  }
}

void check_edge(const Graph& g, const Edge& e) {
  const int n = g.num_nodes();
  if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) {
    throw GraphError("graph '" + g.id + "': edge (" + std::to_string(e.u) + ", " +
                     std::to_string(e.v) + ") out of range for " + std::to_string(n) + " nodes");
  }
  if (e.u == e.v) {
    throw GraphError("graph '" + g.id + "': self-loop on node " + std::to_string(e.u));
  }
  if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
    throw GraphError("graph '" + g.id + "': edge weight must be positive and finite");
  }
}

}  // namespace

std::vector<std::string> validate(Graph& g) {
  check_nodes(g);
  std::vector<std::string> warnings;
  std::set<std::pair<int, int>> seen;
  std::vector<Edge> canonical;
  canonical.reserve(g.edges.size());
  for (const Edge& e : g.edges) {
    check_edge(g, e);
    const auto key = std::minmax(e.u, e.v);
    if (!seen.insert(key).second) {
      warnings.push_back("graph '" + g.id + "': duplicate edge (" + std::to_string(e.u) + ", " +
                         std::to_string(e.v) + ") removed");
      continue;
    }
    canonical.push_back({key.first, key.second, e.weight});
  }
  g.edges = std::move(canonical);
  for (const auto& w : warnings) log::warn(w);
  return warnings;
}

void check(const Graph& g) {
  check_nodes(g);
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : g.edges) {
    check_edge(g, e);
    if (!seen.insert(std::minmax(e.u, e.v)).second) {
      throw GraphError("graph '" + g.id + "': duplicate edge");
    }
  }
}

void check_feature_width(const Graph& g, int dim) {
  if (g.feature_dim() != dim) {
    throw GraphError("graph '" + g.id + "' has feature width " + std::to_string(g.feature_dim()) +
                     ", expected " + std::to_string(dim));
  }
}

Graph permute_nodes(const Graph& g, const std::vector<int>& perm) {
  Graph out;
  out.id = g.id;
  out.group = g.group;
  out.features.resize(g.features.rows(), g.features.cols());
  for (int i = 0; i < g.num_nodes(); ++i) out.features.row(perm[static_cast<std::size_t>(i)]) = g.features.row(i);
  if (g.has_labels()) {
    out.labels.resize(g.labels.size());
    for (int i = 0; i < g.num_nodes(); ++i) {
      out.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = g.labels[static_cast<std::size_t>(i)];
    }
  }
  for (const Edge& e : g.edges) {
    const int a = perm[static_cast<std::size_t>(e.u)];
    const int b = perm[static_cast<std::size_t>(e.v)];
    out.edges.push_back({std::min(a, b), std::max(a, b), e.weight});
  }
  return out;
}

}  // namespace mgmn
