#pragma once

// On-disk layout (one JSON object per line, UTF-8):
//
//   graphs.jsonl  {"id", "group"?, "labels"?, "nodes": [[f, ...], ...], "edges": [[u, v], ...]}
//   pairs.jsonl   {"g1", "g2", "y"}
//   split.json    {"train": [ids], "val": [ids], "test": [ids]}

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mgmn/graph.hpp"

namespace mgmn {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Graph ids per split.
struct Split {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  std::vector<LabeledPair> pairs;
  Split split;

  /// Rebuilds the id lookup; call after editing `graphs`.
  void reindex();
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  /// Throws DatasetError naming the id when it is unknown.
  const Graph& graph(const std::string& id) const;
  int feature_dim() const { return graphs.empty() ? 0 : graphs.front().feature_dim(); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

struct DatasetPaths {
  std::filesystem::path graphs;
  std::filesystem::path pairs;
  std::filesystem::path split;  // optional; empty or missing means no split

  static DatasetPaths in(const std::filesystem::path& dir);
};

/// Validates every graph (duplicate edges are merged with a warning) and
/// every pair. Errors name the file and line.
Dataset load_dataset(const DatasetPaths& paths);
Dataset load_dataset(const std::filesystem::path& dir);

/// Reads and validates every record of a graphs.jsonl-format file.
std::vector<Graph> read_graphs(const std::filesystem::path& path);

/// Writes graphs.jsonl, pairs.jsonl and split.json with a stable key order.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Throws DatasetError if a graph id appears in more than one split, or a
/// group in classification data straddles splits.
void check_split_disjoint(const Dataset& dataset);

struct GedDatasetOptions {
  int graphs = 200;
  int min_nodes = 4;
  int max_nodes = 9;
  double edge_prob = 0.3;
  int labels = 4;  // one-hot feature width
  bool self_pairs = false;
  int node_budget = 10;
  std::uint64_t seed = 0;
};

/// Connected random graphs with one-hot node labels and the exact normalised
/// GED of every unordered pair. Split 60/20/20 by graph.
Dataset gen_ged_dataset(const GedDatasetOptions& options);

struct CloneDatasetOptions {
  int groups = 100;
  int variants = 4;  // perturbed copies per seed graph
  int budget = 3;    // each variant receives uniform{0..budget} edits
  int min_nodes = 6;
  int max_nodes = 16;
  std::uint64_t seed = 0;
};

/// CFG-like seed graphs with six block-count features, each grouped with
/// randomly edited, node-shuffled variants. Split 80/10/10 by group. The
/// pairs file holds one positive and one negative pair per graph, drawn
/// within each split.
Dataset gen_clone_dataset(const CloneDatasetOptions& options);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace mgmn
