#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>

#include "mgmn/graph.hpp"

namespace mgmn {

/// Unit edit costs; substituting a node is free when the labels agree.
struct EditCostScheme {
  double node_insert = 1.0;
  double node_delete = 1.0;
  double edge_insert = 1.0;
  double edge_delete = 1.0;
  double node_substitute = 1.0;

  double substitute(int label_a, int label_b) const {
    return label_a == label_b ? 0.0 : node_substitute;
  }
};

struct GedResult {
  double distance = 0.0;
  double normalized_similarity = 1.0;
  std::int64_t nodes_expanded = 0;
};

struct GedOptions {
  EditCostScheme costs;
  int node_budget = 10;
  std::chrono::milliseconds timeout{10'000};
};

/// A graph is larger than the exact solver's node budget.
class GedBudgetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Search ran out of time; `lower_bound` is the best proven bound.
class GedTimeoutError : public std::runtime_error {
 public:
  GedTimeoutError(const std::string& what, double lower_bound)
      : std::runtime_error(what), lower_bound_(lower_bound) {}
  double lower_bound() const { return lower_bound_; }

 private:
  double lower_bound_;
};

/// exp(-distance / ((n + m) / 2)).
double normalized_similarity(double distance, int n, int m);

/// Exact GED by A* over prefix mappings of g1's nodes (in index order) onto
/// g2's nodes or deletion. Edge weights are ignored: edges are present or not.
GedResult ged_exact(const Graph& g1, const Graph& g2, const GedOptions& options = {});

/// Exhaustive enumeration of every injective partial node mapping. Refuses
/// graphs with more than 5 nodes.
GedResult ged_bruteforce(const Graph& g1, const Graph& g2, const EditCostScheme& costs = {});

/// The A* heuristic evaluated at the empty mapping (a lower bound on GED).
double ged_lower_bound(const Graph& g1, const Graph& g2, const EditCostScheme& costs = {});

}  // namespace mgmn
