#include "mgmn/ged.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <map>
#include <queue>
#include <string>
#include <vector>

namespace mgmn {
namespace {

constexpr int kMaxNodes = 32;

// Dense view of a graph for the search: adjacency bitmasks and labels
// remapped to 0..L-1 (shared alphabet across both graphs).
struct SearchGraph {
  int n = 0;
  std::vector<std::uint32_t> adj;
  std::vector<int> label;
  int edge_count = 0;

  bool has_edge(int a, int b) const { return (adj[static_cast<std::size_t>(a)] >> b) & 1u; }
};

std::pair<SearchGraph, SearchGraph> make_search_graphs(const Graph& g1, const Graph& g2,
                                                       int& alphabet) {
  std::map<int, int> remap;
  for (const Graph* g : {&g1, &g2}) {
    for (int i = 0; i < g->num_nodes(); ++i) remap.emplace(g->label(i), 0);
  }
  int next = 0;
  for (auto& [raw, id] : remap) id = next++;
  alphabet = next;

  auto build = [&](const Graph& g) {
    SearchGraph s;
    s.n = g.num_nodes();
    s.adj.assign(static_cast<std::size_t>(s.n), 0u);
    s.label.resize(static_cast<std::size_t>(s.n));
    for (int i = 0; i < s.n; ++i) s.label[static_cast<std::size_t>(i)] = remap.at(g.label(i));
    for (const Edge& e : g.edges) {
      if (e.u == e.v || s.has_edge(e.u, e.v)) continue;
      s.adj[static_cast<std::size_t>(e.u)] |= 1u << e.v;
      s.adj[static_cast<std::size_t>(e.v)] |= 1u << e.u;
      ++s.edge_count;
    }
    return s;
  };
  return {build(g1), build(g2)};
}

struct State {
  double g = 0.0;
  std::uint32_t used = 0;  // g2 nodes already in the image
  std::int8_t depth = 0;   // g1 nodes 0..depth-1 are decided
  bool complete = false;   // g2 insertions have been charged
  std::array<std::int8_t, kMaxNodes> map{};  // -1 = deleted
};

struct QueueEntry {
  double f;
  int depth;
  std::int64_t seq;
  std::size_t state;
};

struct QueueOrder {
  // std::priority_queue pops the "largest": lowest f, then deepest, then oldest.
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.seq > b.seq;
  }
};

class AStar {
 public:
  AStar(const SearchGraph& g1, const SearchGraph& g2, int alphabet, const EditCostScheme& costs)
      : g1_(g1), g2_(g2), alphabet_(alphabet), costs_(costs) {
    // suffix_labels_[k][l]: count of label l among g1 nodes k..n1-1.
    suffix_labels_.assign(static_cast<std::size_t>(g1.n + 1),
                          std::vector<int>(static_cast<std::size_t>(alphabet), 0));
    for (int k = g1.n - 1; k >= 0; --k) {
      suffix_labels_[static_cast<std::size_t>(k)] = suffix_labels_[static_cast<std::size_t>(k + 1)];
      ++suffix_labels_[static_cast<std::size_t>(k)][static_cast<std::size_t>(g1.label[static_cast<std::size_t>(k)])];
    }
    // remaining_g1_edges_[k]: edges with an endpoint >= k.
    remaining_g1_edges_.assign(static_cast<std::size_t>(g1.n + 1), 0);
    for (int k = 0; k <= g1.n; ++k) {
      int count = 0;
      for (int a = 0; a < g1.n; ++a) {
        for (int b = a + 1; b < g1.n; ++b) {
          if (g1.has_edge(a, b) && b >= k) ++count;
        }
      }
      remaining_g1_edges_[static_cast<std::size_t>(k)] = count;
    }
  }

  double heuristic(int depth, std::uint32_t used) const {
    const int r1 = g1_.n - depth;
    const int r2 = g2_.n - std::popcount(used);
    std::vector<int> free_labels(static_cast<std::size_t>(alphabet_), 0);
    for (int v = 0; v < g2_.n; ++v) {
      if (!((used >> v) & 1u)) ++free_labels[static_cast<std::size_t>(g2_.label[static_cast<std::size_t>(v)])];
    }
    int common = 0;
    const auto& rest = suffix_labels_[static_cast<std::size_t>(depth)];
    for (int l = 0; l < alphabet_; ++l) {
      common += std::min(rest[static_cast<std::size_t>(l)], free_labels[static_cast<std::size_t>(l)]);
    }
    double h = 0.0;
    h += r1 > r2 ? (r1 - r2) * costs_.node_delete : (r2 - r1) * costs_.node_insert;
    h += (std::min(r1, r2) - common) *
         std::min(costs_.node_substitute, costs_.node_delete + costs_.node_insert);

    int settled_g2_edges = 0;
    for (int v = 0; v < g2_.n; ++v) {
      if ((used >> v) & 1u) settled_g2_edges += std::popcount(g2_.adj[static_cast<std::size_t>(v)] & used);
    }
    const int e2 = g2_.edge_count - settled_g2_edges / 2;
    const int e1 = remaining_g1_edges_[static_cast<std::size_t>(depth)];
    h += e1 > e2 ? (e1 - e2) * costs_.edge_delete : (e2 - e1) * costs_.edge_insert;
    return h;
  }

  // Cost of deciding g1 node `u` (= parent.depth) as `target` (-1 = delete).
  double step_cost(const State& parent, int target) const {
    const int u = parent.depth;
    double c = target < 0 ? costs_.node_delete
                          : costs_.substitute(g1_.label[static_cast<std::size_t>(u)],
                                              g2_.label[static_cast<std::size_t>(target)]);
    for (int w = 0; w < u; ++w) {
      const bool e1 = g1_.has_edge(u, w);
      const int tw = parent.map[static_cast<std::size_t>(w)];
      if (target >= 0 && tw >= 0) {
        const bool e2 = g2_.has_edge(target, tw);
        if (e1 && !e2) c += costs_.edge_delete;
        if (!e1 && e2) c += costs_.edge_insert;
      } else if (e1) {
        c += costs_.edge_delete;
      }
    }
    return c;
  }

  // Insert every unmatched g2 node and every g2 edge touching one.
  double completion_cost(std::uint32_t used) const {
    double c = 0.0;
    int settled = 0;
    for (int v = 0; v < g2_.n; ++v) {
      if ((used >> v) & 1u) {
        settled += std::popcount(g2_.adj[static_cast<std::size_t>(v)] & used);
      } else {
        c += costs_.node_insert;
      }
    }
    c += (g2_.edge_count - settled / 2) * costs_.edge_insert;
    return c;
  }

  GedResult run(std::chrono::milliseconds timeout) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<State> states;
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueOrder> open;
    std::int64_t seq = 0;
    auto push = [&](State s, double f) {
      states.push_back(s);
      open.push({f, s.depth + (s.complete ? 1 : 0), seq++, states.size() - 1});
    };

    State root;
    root.map.fill(-1);
    push(root, heuristic(0, 0));

    std::int64_t expanded = 0;
    double best_bound = 0.0;
    while (!open.empty()) {
      const QueueEntry top = open.top();
      open.pop();
      const State s = states[top.state];
      best_bound = std::max(best_bound, top.f);
      if (s.complete) {
        GedResult r;
        r.distance = s.g;
        r.nodes_expanded = expanded;
        return r;
      }
      ++expanded;
      if ((expanded & 1023) == 0 && std::chrono::steady_clock::now() - start > timeout) {
        throw GedTimeoutError("ged_exact: timed out after " + std::to_string(expanded) +
                                  " expansions",
                              best_bound);
      }
      if (s.depth == g1_.n) {
        State done = s;
        done.complete = true;
        done.g += completion_cost(s.used);
        push(done, done.g);
        continue;
      }
      for (int t = -1; t < g2_.n; ++t) {
        if (t >= 0 && ((s.used >> t) & 1u)) continue;
        State child = s;
        child.g += step_cost(s, t);
        child.map[static_cast<std::size_t>(s.depth)] = static_cast<std::int8_t>(t);
        if (t >= 0) child.used |= 1u << t;
        child.depth = static_cast<std::int8_t>(s.depth + 1);
        push(child, child.g + heuristic(child.depth, child.used));
      }
    }
    throw std::logic_error("ged_exact: search exhausted without reaching a goal");
  }

 private:
  const SearchGraph& g1_;
  const SearchGraph& g2_;
  int alphabet_;
  EditCostScheme costs_;
  std::vector<std::vector<int>> suffix_labels_;
  std::vector<int> remaining_g1_edges_;
};

}  // namespace

double normalized_similarity(double distance, int n, int m) {
  return std::exp(-distance / ((n + m) / 2.0));
}

GedResult ged_exact(const Graph& g1, const Graph& g2, const GedOptions& options) {
  const int budget = std::min(options.node_budget, kMaxNodes);
  if (g1.num_nodes() > budget || g2.num_nodes() > budget) {
    throw GedBudgetError("ged_exact: graphs have " + std::to_string(g1.num_nodes()) + " and " +
                         std::to_string(g2.num_nodes()) + " nodes; node budget is " +
                         std::to_string(budget));
  }
  int alphabet = 0;
  auto [s1, s2] = make_search_graphs(g1, g2, alphabet);
  AStar search(s1, s2, alphabet, options.costs);
  GedResult r = search.run(options.timeout);
  r.normalized_similarity = normalized_similarity(r.distance, g1.num_nodes(), g2.num_nodes());
  return r;
}

double ged_lower_bound(const Graph& g1, const Graph& g2, const EditCostScheme& costs) {
  if (g1.num_nodes() > kMaxNodes || g2.num_nodes() > kMaxNodes) {
    throw GedBudgetError("ged_lower_bound: graph too large");
  }
  int alphabet = 0;
  auto [s1, s2] = make_search_graphs(g1, g2, alphabet);
  return AStar(s1, s2, alphabet, costs).heuristic(0, 0);
}

// ---------------------------------------------------------------------------
// Brute force. Deliberately shares nothing with the A* search above.

namespace {

bool adjacent(const Graph& g, int a, int b) {
  for (const Edge& e : g.edges) {
    if ((e.u == a && e.v == b) || (e.u == b && e.v == a)) return true;
  }
  return false;
}

double mapping_cost(const Graph& g1, const Graph& g2, const std::vector<int>& phi,
                    const EditCostScheme& costs) {
  const int n = g1.num_nodes();
  const int m = g2.num_nodes();
  std::vector<bool> hit(static_cast<std::size_t>(m), false);
  double cost = 0.0;
  for (int a = 0; a < n; ++a) {
    const int t = phi[static_cast<std::size_t>(a)];
    if (t < 0) {
      cost += costs.node_delete;
    } else {
      hit[static_cast<std::size_t>(t)] = true;
      cost += costs.substitute(g1.label(a), g2.label(t));
    }
  }
  for (int x = 0; x < m; ++x) {
    if (!hit[static_cast<std::size_t>(x)]) cost += costs.node_insert;
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const bool e1 = adjacent(g1, a, b);
      const int ta = phi[static_cast<std::size_t>(a)];
      const int tb = phi[static_cast<std::size_t>(b)];
      const bool e2 = ta >= 0 && tb >= 0 && adjacent(g2, ta, tb);
      if (e1 && !e2) cost += costs.edge_delete;
      if (!e1 && e2) cost += costs.edge_insert;
    }
  }
  // g2 edges whose endpoints are not both images were never matched.
  for (int x = 0; x < m; ++x) {
    for (int y = x + 1; y < m; ++y) {
      if (adjacent(g2, x, y) && !(hit[static_cast<std::size_t>(x)] && hit[static_cast<std::size_t>(y)])) {
        cost += costs.edge_insert;
      }
    }
  }
  return cost;
}

void enumerate(const Graph& g1, const Graph& g2, const EditCostScheme& costs,
               std::vector<int>& phi, std::vector<bool>& taken, int a, double& best,
               std::int64_t& visited) {
  if (a == g1.num_nodes()) {
    ++visited;
    best = std::min(best, mapping_cost(g1, g2, phi, costs));
    return;
  }
  phi[static_cast<std::size_t>(a)] = -1;
  enumerate(g1, g2, costs, phi, taken, a + 1, best, visited);
  for (int t = 0; t < g2.num_nodes(); ++t) {
    if (taken[static_cast<std::size_t>(t)]) continue;
    taken[static_cast<std::size_t>(t)] = true;
    phi[static_cast<std::size_t>(a)] = t;
    enumerate(g1, g2, costs, phi, taken, a + 1, best, visited);
    taken[static_cast<std::size_t>(t)] = false;
  }
}

}  // namespace

GedResult ged_bruteforce(const Graph& g1, const Graph& g2, const EditCostScheme& costs) {
  if (g1.num_nodes() > 5 || g2.num_nodes() > 5) {
    throw GedBudgetError("ged_bruteforce: limited to graphs with at most 5 nodes");
  }
  std::vector<int> phi(static_cast<std::size_t>(g1.num_nodes()), -1);
  std::vector<bool> taken(static_cast<std::size_t>(g2.num_nodes()), false);
  double best = std::numeric_limits<double>::infinity();
  std::int64_t visited = 0;
  enumerate(g1, g2, costs, phi, taken, 0, best, visited);
  GedResult r;
  r.distance = best;
  r.normalized_similarity = normalized_similarity(best, g1.num_nodes(), g2.num_nodes());
  r.nodes_expanded = visited;
  return r;
}

}  // namespace mgmn
