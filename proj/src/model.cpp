#include "mgmn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mgmn {
namespace {

Matrix glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = uniform(rng, -bound, bound);
  }
  return m;
}

std::string key(std::string_view prefix, std::string_view name) {
  std::string k(prefix);
  k += '.';
  k += name;
  return k;
}

// Gate layout along the 4k columns: input, forget, cell, output.
void add_lstm(ParamStore& params, const std::string& prefix, int k, Rng& rng) {
  params.add(key(prefix, "w_in"), glorot_uniform(k, 4 * k, rng));
  params.add(key(prefix, "w_hidden"), glorot_uniform(k, 4 * k, rng));
  Matrix bias = Matrix::Zero(1, 4 * k);
  bias.middleCols(k, k).setOnes();
  params.add(key(prefix, "bias"), std::move(bias));
}

void add_aggregator(ParamStore& params, const std::string& prefix, Aggregator a, int k,
                    Rng& rng) {
  switch (a) {
    case Aggregator::max:
      break;
    case Aggregator::fcmax:
      params.add(key(prefix, "weight"), glorot_uniform(k, k, rng));
      params.add(key(prefix, "bias"), Matrix::Zero(1, k));
      break;
    case Aggregator::bilstm:
      add_lstm(params, key(prefix, "fwd"), k, rng);
      add_lstm(params, key(prefix, "bwd"), k, rng);
      break;
  }
}

// Last hidden state of a unidirectional LSTM over the rows of `seq`.
Tensor lstm_last_hidden(const Tensor& seq, const ParamStore& params, const std::string& prefix) {
  const Tensor& w_hidden = params.at(key(prefix, "w_hidden"));
  const Index k = w_hidden.rows();
  const Tensor projected =
      add_rowwise(matmul(seq, params.at(key(prefix, "w_in"))), params.at(key(prefix, "bias")));
  Tensor h;
  Tensor c;
  for (Index t = 0; t < seq.rows(); ++t) {
    Tensor gates = row(projected, t);
    if (h.defined()) gates = add(gates, matmul(h, w_hidden));
    const Tensor in_gate = sigmoid(slice_cols(gates, 0, k));
    const Tensor cell_in = tanh(slice_cols(gates, 2 * k, k));
    const Tensor out_gate = sigmoid(slice_cols(gates, 3 * k, k));
    if (c.defined()) {
      const Tensor forget = sigmoid(slice_cols(gates, k, k));
      c = add(mul(forget, c), mul(in_gate, cell_in));
    } else {
      // Zero initial cell state: the forget term vanishes.
      c = mul(in_gate, cell_in);
    }
    h = mul(out_gate, tanh(c));
  }
  return h;
}

Tensor bilstm(const Tensor& h, const ParamStore& params, std::string_view prefix, bool training,
              Rng& rng) {
  Tensor seq = h;
  if (training && h.rows() > 1) {
    const std::vector<int> order = random_permutation(static_cast<int>(h.rows()), rng);
    seq = gather_rows(h, order);
  }
  std::vector<int> reversed(static_cast<std::size_t>(seq.rows()));
  std::iota(reversed.rbegin(), reversed.rend(), 0);
  const Tensor fwd = lstm_last_hidden(seq, params, key(prefix, "fwd"));
  const Tensor bwd = lstm_last_hidden(gather_rows(seq, reversed), params, key(prefix, "bwd"));
  return concat_cols({fwd, bwd});
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::sgnn: return "sgnn";
    case Mode::ngmn: return "ngmn";
    case Mode::mgmn: return "mgmn";
  }
  return "?";
}

std::string_view to_string(Aggregator a) {
  switch (a) {
    case Aggregator::max: return "max";
    case Aggregator::fcmax: return "fcmax";
    case Aggregator::bilstm: return "bilstm";
  }
  return "?";
}

std::string_view to_string(Task t) {
  return t == Task::classification ? "classification" : "regression";
}

Mode parse_mode(std::string_view s) {
  if (s == "sgnn") return Mode::sgnn;
  if (s == "ngmn") return Mode::ngmn;
  if (s == "mgmn") return Mode::mgmn;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected sgnn|ngmn|mgmn)");
}

Aggregator parse_aggregator(std::string_view s) {
  if (s == "max") return Aggregator::max;
  if (s == "fcmax") return Aggregator::fcmax;
  if (s == "bilstm") return Aggregator::bilstm;
  throw ConfigError("unknown aggregator '" + std::string(s) + "' (expected max|fcmax|bilstm)");
}

Task parse_task(std::string_view s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected classification|regression)");
}

void ModelConfig::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (gcn_layers < 1) throw ConfigError("gcn_layers must be >= 1");
  if (gcn_dim < 1) throw ConfigError("gcn_dim must be >= 1");
  if (perspectives < 1) throw ConfigError("perspectives must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

int aggregated_dim(Aggregator a, int k) { return a == Aggregator::bilstm ? 2 * k : k; }

int ModelConfig::graph_vector_dim() const {
  int dim = 0;
  if (uses_ngmn()) dim += aggregated_dim(ngmn_aggregator, perspectives);
  if (uses_sgnn()) dim += aggregated_dim(sgnn_aggregator, gcn_dim);
  return dim;
}

std::vector<int> head_widths(int input_dim) {
  return {input_dim, std::max(1, input_dim / 2), std::max(1, input_dim / 4),
          std::max(1, input_dim / 8), 1};
}

Model::Model(ModelConfig config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng(init_seed);
  for (int t = 0; t < config_.gcn_layers; ++t) {
    const int in = t == 0 ? config_.input_dim : config_.gcn_dim;
    params_.add("gcn." + std::to_string(t) + ".weight", glorot_uniform(in, config_.gcn_dim, rng));
  }
  if (config_.uses_ngmn()) {
    params_.add("match.weight", glorot_uniform(config_.gcn_dim, config_.perspectives, rng));
    add_aggregator(params_, "ngmn_agg", config_.ngmn_aggregator, config_.perspectives, rng);
  }
  if (config_.uses_sgnn()) {
    add_aggregator(params_, "sgnn_agg", config_.sgnn_aggregator, config_.gcn_dim, rng);
  }
  if (config_.task == Task::regression) {
    const std::vector<int> widths = head_widths(2 * config_.graph_vector_dim());
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::string p = "head." + std::to_string(l);
      params_.add(p + ".weight", glorot_uniform(widths[l], widths[l + 1], rng));
      params_.add(p + ".bias", Matrix::Zero(1, widths[l + 1]));
    }
  }
}

PreparedGraph prepare(const Graph& g) {
  PreparedGraph p;
  p.graph = &g;
  p.features = Tensor(g.features);
  p.adjacency = Tensor(normalized_adjacency(g).matrix);
  return p;
}

Tensor gcn_forward(const PreparedGraph& g, const ParamStore& params, const ModelConfig& config,
                   bool training, Rng& rng) {
  if (g.features.cols() != config.input_dim) {
    throw DimensionError("gcn_forward: graph has " + std::to_string(g.features.cols()) +
                         " feature columns, model expects " + std::to_string(config.input_dim));
  }
  Tensor h = g.features;
  for (int t = 0; t < config.gcn_layers; ++t) {
    const Tensor& w = params.at("gcn." + std::to_string(t) + ".weight");
    h = relu(matmul(g.adjacency, matmul(h, w)));
    h = dropout(h, config.dropout, training, rng);
  }
  return h;
}

CrossAttention cross_attention(const Tensor& h1, const Tensor& h2) {
  CrossAttention a;
  a.alpha = cosine_matrix(h1, h2);
  a.beta = transpose(a.alpha);
  return a;
}

Tensor attentive_graph_embedding(const Tensor& weights, const Tensor& h2) {
  if (weights.cols() != h2.rows()) {
    throw DimensionError("attentive_graph_embedding: " + std::to_string(weights.cols()) +
                         " weights for " + std::to_string(h2.rows()) + " nodes");
  }
  return matmul(weights, h2);
}

Tensor multi_perspective_match(const Tensor& x1, const Tensor& x2, const Tensor& wm) {
  return multi_perspective(x1, x2, wm);
}

MatchedNodes node_graph_match(const Tensor& h1, const Tensor& h2, const Tensor& wm,
                              bool normalize_attention) {
  if (h1.cols() != h2.cols()) throw DimensionError("node_graph_match: embedding widths differ");
  CrossAttention att = cross_attention(h1, h2);
  if (normalize_attention) {
    att.alpha = row_normalize(att.alpha);
    att.beta = row_normalize(att.beta);
  }
  // Row i of avg_for_first is the view of graph 2 from node i of graph 1.
  const Tensor avg_for_first = attentive_graph_embedding(att.alpha, h2);
  const Tensor avg_for_second = attentive_graph_embedding(att.beta, h1);
  return {multi_perspective_match(h1, avg_for_first, wm),
          multi_perspective_match(h2, avg_for_second, wm)};
}

Tensor aggregate(const Tensor& h, Aggregator aggregator, const ParamStore& params,
                 std::string_view prefix, bool training, Rng& rng) {
  if (h.rows() < 1) throw DimensionError("aggregate: graph has no nodes");
  switch (aggregator) {
    case Aggregator::max:
      return colwise_max(h);
    case Aggregator::fcmax:
      return colwise_max(add_rowwise(matmul(h, params.at(key(prefix, "weight"))),
                                     params.at(key(prefix, "bias"))));
    case Aggregator::bilstm:
      return bilstm(h, params, prefix, training, rng);
  }
  throw ConfigError("aggregate: unknown aggregator");
}

Tensor predict(const Tensor& ha, const Tensor& hb, Task task, const ParamStore& params) {
  if (ha.rows() != hb.rows() || ha.cols() != hb.cols()) {
    throw DimensionError("predict: graph vectors differ in shape");
  }
  if (task == Task::classification) return cosine(ha, hb);
  Tensor x = concat_cols({ha, hb});
  for (int l = 0; l < 4; ++l) {
    const std::string p = "head." + std::to_string(l);
    x = add_rowwise(matmul(x, params.at(p + ".weight")), params.at(p + ".bias"));
    if (l < 3) x = relu(x);
  }
  return sigmoid(x);
}

PairEncoding encode_pair(const PreparedGraph& g1, const PreparedGraph& g2, const Model& model,
                         bool training, Rng& rng) {
  const ModelConfig& cfg = model.config();
  const ParamStore& params = model.params();
  PairEncoding enc;
  enc.first.node_embeddings = gcn_forward(g1, params, cfg, training, rng);
  enc.second.node_embeddings = gcn_forward(g2, params, cfg, training, rng);
  if (cfg.uses_ngmn()) {
    MatchedNodes matched = node_graph_match(enc.first.node_embeddings, enc.second.node_embeddings,
                                            params.at("match.weight"), cfg.normalize_attention);
    enc.first.matched_embeddings = matched.first;
    enc.second.matched_embeddings = matched.second;
    enc.first.ngmn_graph_vector =
        aggregate(matched.first, cfg.ngmn_aggregator, params, "ngmn_agg", training, rng);
    enc.second.ngmn_graph_vector =
        aggregate(matched.second, cfg.ngmn_aggregator, params, "ngmn_agg", training, rng);
  }
  if (cfg.uses_sgnn()) {
    enc.first.sgnn_graph_vector = aggregate(enc.first.node_embeddings, cfg.sgnn_aggregator,
                                            params, "sgnn_agg", training, rng);
    enc.second.sgnn_graph_vector = aggregate(enc.second.node_embeddings, cfg.sgnn_aggregator,
                                             params, "sgnn_agg", training, rng);
  }
  for (GraphEncoding* e : {&enc.first, &enc.second}) {
    switch (cfg.mode) {
      case Mode::sgnn: e->graph_vector = e->sgnn_graph_vector; break;
      case Mode::ngmn: e->graph_vector = e->ngmn_graph_vector; break;
      case Mode::mgmn: e->graph_vector = concat_cols({e->ngmn_graph_vector, e->sgnn_graph_vector}); break;
    }
  }
  return enc;
}

Tensor forward_pair(const PreparedGraph& g1, const PreparedGraph& g2, const Model& model,
                    bool training, Rng& rng) {
  const PairEncoding enc = encode_pair(g1, g2, model, training, rng);
  return predict(enc.first.graph_vector, enc.second.graph_vector, model.config().task,
                 model.params());
}

Tensor loss_mse(std::span<const Tensor> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw DimensionError("loss_mse: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(targets.size()) + " targets");
  }
  if (predictions.empty()) throw ContractError("loss_mse: empty batch");
  Tensor total;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Tensor diff = sub(predictions[i], Tensor::scalar(targets[i]));
    const Tensor sq = mul(diff, diff);
    total = total.defined() ? add(total, sq) : sq;
  }
  return scale(total, 1.0 / static_cast<double>(predictions.size()));
}

}  // namespace mgmn
