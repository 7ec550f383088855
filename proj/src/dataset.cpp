#include "mgmn/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "mgmn/ged.hpp"
#include "mgmn/log.hpp"
#include "mgmn/rng.hpp"

namespace mgmn {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

Graph parse_graph(const json& j) {
  Graph g;
  g.id = j.at("id").get<std::string>();
  if (j.contains("group") && !j.at("group").is_null()) g.group = j.at("group").get<std::string>();
  if (j.contains("labels") && !j.at("labels").is_null()) {
    g.labels = j.at("labels").get<std::vector<int>>();
  }
  const auto& nodes = j.at("nodes");
  if (!nodes.is_array()) throw DatasetError("\"nodes\" must be an array");
  const std::size_t n = nodes.size();
  const std::size_t d = n == 0 ? 0 : nodes.at(0).size();
  g.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = nodes.at(i);
    if (!row.is_array() || row.size() != d) {
      throw DatasetError("node " + std::to_string(i) + " has " + std::to_string(row.size()) +
                         " features, expected " + std::to_string(d));
    }
    for (std::size_t c = 0; c < d; ++c) {
      g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row.at(c).get<double>();
    }
  }
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() < 2) throw DatasetError("edges must be [u, v] pairs");
    Edge edge{e.at(0).get<int>(), e.at(1).get<int>(), 1.0};
    if (e.size() > 2) edge.weight = e.at(2).get<double>();
    g.edges.push_back(edge);
  }
  return g;
}

ordered_json graph_record(const Graph& g) {
  ordered_json j;
  j["id"] = g.id;
  if (g.group) j["group"] = *g.group;
  if (g.has_labels()) j["labels"] = g.labels;
  ordered_json nodes = ordered_json::array();
  for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < g.features.cols(); ++c) row.push_back(g.features(i, c));
    nodes.push_back(std::move(row));
  }
  j["nodes"] = std::move(nodes);
  ordered_json edges = ordered_json::array();
  for (const Edge& e : g.edges) {
    if (e.weight == 1.0) {
      edges.push_back({e.u, e.v});
    } else {
      edges.push_back({e.u, e.v, e.weight});
    }
  }
  j["edges"] = std::move(edges);
  return j;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn fn) {
  std::ifstream is(path);
  if (!is) throw DatasetError("cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line), number);
    } catch (const DatasetError& e) {
      throw DatasetError(where(path, number) + ": " + e.what());
    } catch (const json::exception& e) {
      throw DatasetError(where(path, number) + ": schema violation: " + e.what());
    } catch (const GraphError& e) {
      throw DatasetError(where(path, number) + ": " + e.what());
    }
  }
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DatasetError("cannot open " + tmp.string() + " for writing");
    for (const auto& l : lines) os << l << '\n';
    if (!os) throw DatasetError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

bool is_connected(int n, const std::vector<Edge>& edges) {
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  int components = n;
  for (const Edge& e : edges) {
    const int a = find(e.u);
    const int b = find(e.v);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  return components == 1;
}

bool has_edge(const std::vector<Edge>& edges, int u, int v) {
  return std::any_of(edges.begin(), edges.end(), [&](const Edge& e) {
    return (e.u == u && e.v == v) || (e.u == v && e.v == u);
  });
}

/// Splits `items` (already shuffled) by the given fractions.
template <typename T>
void split_three(const std::vector<T>& items, double train_frac, double val_frac,
                 std::vector<T>& train, std::vector<T>& val, std::vector<T>& test) {
  const auto n = items.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n))));
  train.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
  val.assign(items.begin() + static_cast<std::ptrdiff_t>(n_train),
             items.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  test.assign(items.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), items.end());
}

// Block features of a synthetic CFG node: instructions, calls, arithmetic,
// transfers, constants, offspring.
constexpr int kBlockFeatures = 6;

Eigen::RowVectorXd random_block(Rng& rng) {
  Eigen::RowVectorXd f(kBlockFeatures);
  const int instructions = uniform_int(rng, 1, 15);
  f(0) = instructions;
  f(1) = uniform_int(rng, 0, instructions / 4);
  f(2) = uniform_int(rng, 0, instructions / 2);
  f(3) = uniform_int(rng, 0, 1);
  f(4) = uniform_int(rng, 0, instructions / 3);
  f(5) = 0;
  return f;
}

void refresh_offspring(Graph& g) {
  g.features.col(kBlockFeatures - 1).setZero();
  for (const Edge& e : g.edges) {
    g.features(e.u, kBlockFeatures - 1) += 1;
    g.features(e.v, kBlockFeatures - 1) += 1;
  }
}

Graph random_cfg(int n, Rng& rng) {
  Graph g;
  g.features.resize(n, kBlockFeatures);
  for (int i = 0; i < n; ++i) g.features.row(i) = random_block(rng);
  for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1, 1.0});
  for (int i = 0; i + 2 < n; ++i) {
    if (bernoulli(rng, 0.35)) {
      const int j = uniform_int(rng, i + 2, n - 1);
      if (!has_edge(g.edges, i, j)) g.edges.push_back({i, j, 1.0});
    }
  }
  for (int i = 2; i < n; ++i) {
    if (bernoulli(rng, 0.1)) {
      const int j = uniform_int(rng, 0, i - 2);
      if (!has_edge(g.edges, j, i)) g.edges.push_back({j, i, 1.0});
    }
  }
  return g;
}

/// Applies one random edit; returns false when the drawn edit was rejected.
bool try_edit(Graph& g, Rng& rng) {
  const int n = g.num_nodes();
  switch (uniform_int(rng, 0, 3)) {
    case 0: {
      if (static_cast<int>(g.edges.size()) >= n * (n - 1) / 2) return false;
      int u = 0;
      int v = 0;
      do {
        u = uniform_int(rng, 0, n - 1);
        v = uniform_int(rng, 0, n - 1);
      } while (u == v || has_edge(g.edges, u, v));
      g.edges.push_back({std::min(u, v), std::max(u, v), 1.0});
      return true;
    }
    case 1: {
      if (g.edges.empty()) return false;
      const auto k = uniform_index(rng, g.edges.size());
      std::vector<Edge> kept = g.edges;
      kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(k));
      if (!is_connected(n, kept)) return false;
      g.edges = std::move(kept);
      return true;
    }
    case 2: {
      const int anchor = uniform_int(rng, 0, n - 1);
      g.features.conservativeResize(n + 1, Eigen::NoChange);
      g.features.row(n) = random_block(rng);
      g.edges.push_back({anchor, n, 1.0});
      return true;
    }
    default: {
      const int node = uniform_int(rng, 0, n - 1);
      const int col = uniform_int(rng, 0, kBlockFeatures - 2);
      const double delta = bernoulli(rng, 0.5) ? 1.0 : -1.0;
      g.features(node, col) = std::max(0.0, g.features(node, col) + delta);
      return true;
    }
  }
}

}  // namespace

void Dataset::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (!index_.emplace(graphs[i].id, i).second) {
      throw DatasetError("duplicate graph id '" + graphs[i].id + "'");
    }
  }
}

const Graph& Dataset::graph(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw DatasetError("unknown graph id '" + id + "'");
  return graphs[it->second];
}

DatasetPaths DatasetPaths::in(const std::filesystem::path& dir) {
  return {dir / "graphs.jsonl", dir / "pairs.jsonl", dir / "split.json"};
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds = load_dataset(DatasetPaths::in(dir));
  ds.name = dir.filename().string();
  if (ds.name.empty()) ds.name = dir.parent_path().filename().string();
  return ds;
}

Dataset load_dataset(const DatasetPaths& paths) {
  Dataset ds;
  ds.name = paths.graphs.parent_path().filename().string();
  std::unordered_map<std::string, std::size_t> line_of;
  for_each_line(paths.graphs, [&](const json& j, std::size_t line) {
    Graph g = parse_graph(j);
    validate(g);
    if (!ds.graphs.empty() && g.feature_dim() != ds.feature_dim()) {
      throw DatasetError("graph '" + g.id + "' has feature width " + std::to_string(g.feature_dim()) +
                         ", expected " + std::to_string(ds.feature_dim()));
    }
    if (!line_of.emplace(g.id, line).second) {
      throw DatasetError("duplicate graph id '" + g.id + "' (first seen on line " +
                         std::to_string(line_of[g.id]) + ")");
    }
    ds.graphs.push_back(std::move(g));
  });
  ds.reindex();

  for_each_line(paths.pairs, [&](const json& j, std::size_t) {
    LabeledPair p{j.at("g1").get<std::string>(), j.at("g2").get<std::string>(), j.at("y").get<double>()};
    for (const auto* id : {&p.g1, &p.g2}) {
      if (!ds.contains(*id)) throw DatasetError("pair references unknown graph id '" + *id + "'");
    }
    ds.pairs.push_back(std::move(p));
  });
  if (ds.pairs.empty()) log::warn(paths.pairs.string() + ": no pairs");

  if (!paths.split.empty() && std::filesystem::exists(paths.split)) {
    std::ifstream is(paths.split);
    json j;
    try {
      j = json::parse(is);
      ds.split.train = j.at("train").get<std::vector<std::string>>();
      ds.split.val = j.at("val").get<std::vector<std::string>>();
      ds.split.test = j.at("test").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DatasetError(paths.split.string() + ": schema violation: " + e.what());
    }
    for (const auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) {
      for (const auto& id : *part) {
        if (!ds.contains(id)) {
          throw DatasetError(paths.split.string() + ": unknown graph id '" + id + "'");
        }
      }
    }
    check_split_disjoint(ds);
  }
  return ds;
}

std::vector<Graph> read_graphs(const std::filesystem::path& path) {
  std::vector<Graph> graphs;
  for_each_line(path, [&](const json& j, std::size_t) {
    Graph g = parse_graph(j);
    validate(g);
    graphs.push_back(std::move(g));
  });
  if (graphs.empty()) throw DatasetError(path.string() + ": no graph records");
  return graphs;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> lines;
  lines.reserve(ds.graphs.size());
  for (const Graph& g : ds.graphs) lines.push_back(graph_record(g).dump());
  write_lines(dir / "graphs.jsonl", lines);

  lines.clear();
  for (const LabeledPair& p : ds.pairs) {
    ordered_json j;
    j["g1"] = p.g1;
    j["g2"] = p.g2;
    j["y"] = p.target;
    lines.push_back(j.dump());
  }
  write_lines(dir / "pairs.jsonl", lines);

  ordered_json split;
  split["train"] = ds.split.train;
  split["val"] = ds.split.val;
  split["test"] = ds.split.test;
  write_lines(dir / "split.json", {split.dump()});
}

void check_split_disjoint(const Dataset& ds) {
  std::unordered_map<std::string, std::string> part_of;
  std::unordered_map<std::string, std::string> group_part;
  const std::pair<const char*, const std::vector<std::string>*> parts[] = {
      {"train", &ds.split.train}, {"val", &ds.split.val}, {"test", &ds.split.test}};
  for (const auto& [name, ids] : parts) {
    for (const auto& id : *ids) {
      const auto [it, fresh] = part_of.emplace(id, name);
      if (!fresh) {
        throw DatasetError("graph '" + id + "' is in both " + it->second + " and " + name);
      }
      const auto& group = ds.graph(id).group;
      if (!group) continue;
      const auto [git, gfresh] = group_part.emplace(*group, name);
      if (!gfresh && git->second != name) {
        throw DatasetError("group '" + *group + "' straddles " + git->second + " and " + name);
      }
    }
  }
}

Dataset gen_ged_dataset(const GedDatasetOptions& o) {
  if (o.graphs < 1 || o.min_nodes < 1 || o.min_nodes > o.max_nodes || o.labels < 1) {
    throw DatasetError("invalid GED dataset options");
  }
  if (o.max_nodes > o.node_budget) {
    throw DatasetError("infeasible budget: graphs up to " + std::to_string(o.max_nodes) +
                       " nodes exceed the exact solver budget of " + std::to_string(o.node_budget));
  }
  Rng rng(o.seed);
  Dataset ds;
  ds.name = "ged-" + std::to_string(o.seed);
  char id[32];
  for (int k = 0; k < o.graphs; ++k) {
    Graph g;
    std::snprintf(id, sizeof(id), "g%04d", k);
    g.id = id;
    const int n = uniform_int(rng, o.min_nodes, o.max_nodes);
    do {
      g.edges.clear();
      for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
          if (bernoulli(rng, o.edge_prob)) g.edges.push_back({u, v, 1.0});
        }
      }
    } while (!is_connected(n, g.edges));
    g.labels.resize(static_cast<std::size_t>(n));
    g.features = Eigen::MatrixXd::Zero(n, o.labels);
    for (int i = 0; i < n; ++i) {
      g.labels[static_cast<std::size_t>(i)] = uniform_int(rng, 0, o.labels - 1);
      g.features(i, g.labels[static_cast<std::size_t>(i)]) = 1.0;
    }
    ds.graphs.push_back(std::move(g));
  }
  ds.reindex();

  GedOptions ged;
  ged.node_budget = o.node_budget;
  const std::size_t n = ds.graphs.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = o.self_pairs ? i : i + 1; j < n; ++j) {
      const GedResult r = ged_exact(ds.graphs[i], ds.graphs[j], ged);
      ds.pairs.push_back({ds.graphs[i].id, ds.graphs[j].id, r.normalized_similarity});
    }
  }

  std::vector<std::string> ids;
  for (const Graph& g : ds.graphs) ids.push_back(g.id);
  shuffle(ids, rng);
  split_three(ids, 0.6, 0.2, ds.split.train, ds.split.val, ds.split.test);
  return ds;
}

Dataset gen_clone_dataset(const CloneDatasetOptions& o) {
  if (o.groups < 2 || o.variants < 1 || o.budget < 0 || o.min_nodes < 2 || o.min_nodes > o.max_nodes) {
    throw DatasetError("invalid clone dataset options");
  }
  Rng rng(o.seed);
  Dataset ds;
  ds.name = "clone-" + std::to_string(o.seed);
  std::vector<std::vector<std::string>> members(static_cast<std::size_t>(o.groups));
  char id[48];
  for (int f = 0; f < o.groups; ++f) {
    std::snprintf(id, sizeof(id), "f%03d", f);
    const std::string group = id;
    Graph seed = random_cfg(uniform_int(rng, o.min_nodes, o.max_nodes), rng);
    refresh_offspring(seed);
    for (int v = 0; v <= o.variants; ++v) {
      Graph g = seed;
      if (v > 0) {
        const int edits = uniform_int(rng, 0, o.budget);
        for (int done = 0; done < edits;) {
          if (try_edit(g, rng)) ++done;
        }
        refresh_offspring(g);
      }
      g = permute_nodes(g, random_permutation(g.num_nodes(), rng));
      std::snprintf(id, sizeof(id), "f%03d_v%d", f, v);
      g.id = id;
      g.group = group;
      validate(g);
      members[static_cast<std::size_t>(f)].push_back(g.id);
      ds.graphs.push_back(std::move(g));
    }
  }
  ds.reindex();

  std::vector<int> order(static_cast<std::size_t>(o.groups));
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<int> parts[3];
  split_three(order, 0.8, 0.1, parts[0], parts[1], parts[2]);
  std::vector<std::string>* split_ids[3] = {&ds.split.train, &ds.split.val, &ds.split.test};
  for (int s = 0; s < 3; ++s) {
    std::sort(parts[s].begin(), parts[s].end());
    for (int f : parts[s]) {
      for (const auto& gid : members[static_cast<std::size_t>(f)]) split_ids[s]->push_back(gid);
    }
    if (parts[s].size() < 2) continue;
    for (int f : parts[s]) {
      const auto& own = members[static_cast<std::size_t>(f)];
      for (std::size_t i = 0; i < own.size(); ++i) {
        std::size_t j = uniform_index(rng, own.size() - 1);
        if (j >= i) ++j;
        ds.pairs.push_back({own[i], own[j], 1.0});
        int other = f;
        while (other == f) other = parts[s][uniform_index(rng, parts[s].size())];
        const auto& theirs = members[static_cast<std::size_t>(other)];
        ds.pairs.push_back({own[i], theirs[uniform_index(rng, theirs.size())], -1.0});
      }
    }
  }
  return ds;
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace mgmn
