#pragma once

// Multilevel graph matching: a shared GCN encoder feeding a node-graph
// matching branch (NGMN) and a graph-level siamese branch (SGNN), combined
// by a cosine (classification) or MLP + sigmoid (regression) head.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "mgmn/graph.hpp"
#include "mgmn/params.hpp"
#include "mgmn/rng.hpp"
#include "mgmn/tensor.hpp"

namespace mgmn {

enum class Mode { sgnn, ngmn, mgmn };
enum class Aggregator { max, fcmax, bilstm };

std::string_view to_string(Mode m);
std::string_view to_string(Aggregator a);
std::string_view to_string(Task t);
Mode parse_mode(std::string_view s);
Aggregator parse_aggregator(std::string_view s);
Task parse_task(std::string_view s);

struct ModelConfig {
  int input_dim = 0;  // dataset-determined feature width d
  int gcn_layers = 3;
  int gcn_dim = 100;
  int perspectives = 100;
  double dropout = 0.1;
  Aggregator ngmn_aggregator = Aggregator::bilstm;
  Aggregator sgnn_aggregator = Aggregator::bilstm;
  Task task = Task::regression;
  Mode mode = Mode::mgmn;
  // Divide attention rows by their sum before the weighted node sum.
  bool normalize_attention = false;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  bool uses_ngmn() const { return mode != Mode::sgnn; }
  bool uses_sgnn() const { return mode != Mode::ngmn; }
  /// Length of the per-graph vector fed to the prediction head.
  int graph_vector_dim() const;
};

/// Length of an aggregated graph vector over k-wide node rows.
int aggregated_dim(Aggregator a, int k);

/// Widths of the regression MLP: in, in/2, in/4, in/8, 1.
std::vector<int> head_widths(int input_dim);

class Model {
 public:
  /// Registers and initialises every parameter the configuration uses:
  /// Glorot-uniform matrices, zero biases, LSTM forget-gate bias 1.
  explicit Model(ModelConfig config, std::uint64_t init_seed = 0);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  ModelConfig config_;
  ParamStore params_;
};

/// A graph with its feature matrix and normalised adjacency as constants.
struct PreparedGraph {
  const Graph* graph = nullptr;
  Tensor features;
  Tensor adjacency;

  int num_nodes() const { return static_cast<int>(features.rows()); }
};

PreparedGraph prepare(const Graph& g);

/// relu(A ... relu(A X W0) ... W_{T-1}) with dropout after every layer.
Tensor gcn_forward(const PreparedGraph& g, const ParamStore& params, const ModelConfig& config,
                   bool training, Rng& rng);

struct CrossAttention {
  Tensor alpha;  // N x M, alpha(i, j) = cosine(h1_i, h2_j)
  Tensor beta;   // M x N, exactly alpha^T
};

CrossAttention cross_attention(const Tensor& h1, const Tensor& h2);

/// sum_j weights(j) * h2.row(j); weights is 1 x M (or K x M for K views).
Tensor attentive_graph_embedding(const Tensor& weights, const Tensor& h2);

/// out(k) = cosine(x1 * w_k, x2 * w_k) for each column w_k of wm.
Tensor multi_perspective_match(const Tensor& x1, const Tensor& x2, const Tensor& wm);

struct MatchedNodes {
  Tensor first;   // N x perspectives
  Tensor second;  // M x perspectives
};

/// Compares every node of one graph against the other graph's attentive
/// embedding from that node's point of view.
MatchedNodes node_graph_match(const Tensor& h1, const Tensor& h2, const Tensor& wm,
                              bool normalize_attention = false);

/// Collapses node rows into one graph vector. BiLSTM reads the rows in a
/// fresh random order when training and in index order otherwise.
Tensor aggregate(const Tensor& h, Aggregator aggregator, const ParamStore& params,
                 std::string_view prefix, bool training, Rng& rng);

/// Classification: cosine(ha, hb). Regression: sigmoid(MLP([ha ; hb])).
Tensor predict(const Tensor& ha, const Tensor& hb, Task task, const ParamStore& params);

struct GraphEncoding {
  Tensor node_embeddings;     // N x gcn_dim
  Tensor matched_embeddings;  // N x perspectives (NGMN)
  Tensor ngmn_graph_vector;
  Tensor sgnn_graph_vector;
  Tensor graph_vector;  // what the head consumes for this mode
};

struct PairEncoding {
  GraphEncoding first;
  GraphEncoding second;
};

PairEncoding encode_pair(const PreparedGraph& g1, const PreparedGraph& g2, const Model& model,
                         bool training, Rng& rng);

/// Similarity score (1 x 1) for a graph pair.
Tensor forward_pair(const PreparedGraph& g1, const PreparedGraph& g2, const Model& model,
                    bool training, Rng& rng);

/// (1/n) sum (prediction - target)^2 over scalar predictions.
Tensor loss_mse(std::span<const Tensor> predictions, std::span<const double> targets);

}  // namespace mgmn
