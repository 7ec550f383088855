#include "mgmn/evaluation.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "mgmn/errors.hpp"
#include "mgmn/log.hpp"
#include "mgmn/tensor.hpp"
#include "mgmn/training.hpp"

namespace mgmn {
namespace {

const std::vector<std::string>& split_ids(const Dataset& ds, const std::string& name) {
  if (name == "train") return ds.split.train;
  if (name == "val") return ds.split.val;
  if (name == "test") return ds.split.test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::string pair_key(const std::string& a, const std::string& b) {
  return a < b ? a + '\n' + b : b + '\n' + a;
}

EvalReport evaluate_classification(const Model& model, const Dataset& ds, const EvalOptions& o) {
  const auto& ids = split_ids(ds, o.split);
  const std::unordered_set<std::string> in_split(ids.begin(), ids.end());
  std::vector<LabeledPair> pairs;
  for (const auto& p : ds.pairs) {
    if (in_split.count(p.g1) && in_split.count(p.g2)) pairs.push_back(p);
  }
  if (pairs.empty()) {
    Rng rng(0x9e3779b97f4a7c15ULL);
    pairs = sample_classification_pairs(function_groups(ds, ids), rng);
  }
  const Eigen::VectorXd scores = score_pairs(model, ds, pairs);
  Eigen::VectorXd labels(scores.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) labels(static_cast<Eigen::Index>(i)) = pairs[i].target;

  EvalReport r;
  r.task = Task::classification;
  r.pairs = pairs.size();
  r.metrics["auc"] = auc(scores, labels);
  return r;
}

EvalReport evaluate_regression(const Model& model, const Dataset& ds, const EvalOptions& o) {
  const auto& ids = split_ids(ds, o.split);
  std::vector<RankedQueryResult> queries;
  std::vector<LabeledPair> pairs;

  if (o.query_against_train) {
    std::unordered_map<std::string, double> truth;
    for (const auto& p : ds.pairs) truth.emplace(pair_key(p.g1, p.g2), p.target);
    std::size_t n_queries = ids.size();
    if (o.max_queries > 0) n_queries = std::min(n_queries, o.max_queries);
    for (std::size_t q = 0; q < n_queries; ++q) {
      RankedQueryResult query{ids[q], {}};
      for (const auto& c : ds.split.train) {
        const auto it = truth.find(pair_key(ids[q], c));
        if (it == truth.end()) {
          throw DatasetError("no ground truth for pair '" + ids[q] + "' / '" + c + "'");
        }
        query.candidates.push_back({c, 0.0, it->second});
        pairs.push_back({ids[q], c, it->second});
      }
      queries.push_back(std::move(query));
    }
  } else {
    const std::unordered_set<std::string> in_split(ids.begin(), ids.end());
    std::unordered_map<std::string, std::size_t> query_of;
    for (const auto& p : ds.pairs) {
      if (!in_split.count(p.g1) || !in_split.count(p.g2)) continue;
      const auto [it, fresh] = query_of.emplace(p.g1, queries.size());
      if (fresh) queries.push_back({p.g1, {}});
      queries[it->second].candidates.push_back({p.g2, 0.0, p.target});
      pairs.push_back(p);
    }
  }
  if (pairs.empty()) throw DatasetError("no evaluation pairs for split '" + o.split + "'");

  const Eigen::VectorXd pred = score_pairs(model, ds, pairs);
  Eigen::VectorXd truth(pred.size());
  std::size_t k = 0;
  for (auto& q : queries) {
    for (auto& c : q.candidates) {
      c.predicted = pred(static_cast<Eigen::Index>(k));
      truth(static_cast<Eigen::Index>(k)) = c.truth;
      ++k;
    }
  }

  EvalReport r;
  r.task = Task::regression;
  r.pairs = pairs.size();
  r.queries = queries.size();
  const double mse = mse_metric(pred, truth);
  r.metrics["mse"] = mse;
  r.metrics["mse_e-3"] = mse * 1e3;

  double rho_sum = 0.0;
  double tau_sum = 0.0;
  std::size_t ranked = 0;
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (const auto& q : queries) {
    smallest = std::min(smallest, q.candidates.size());
    Eigen::VectorXd p(static_cast<Eigen::Index>(q.candidates.size()));
    Eigen::VectorXd t(p.size());
    for (std::size_t i = 0; i < q.candidates.size(); ++i) {
      p(static_cast<Eigen::Index>(i)) = q.candidates[i].predicted;
      t(static_cast<Eigen::Index>(i)) = q.candidates[i].truth;
    }
    try {
      const double rho = spearman_rho(p, t);
      const double tau = kendall_tau(p, t);
      rho_sum += rho;
      tau_sum += tau;
      ++ranked;
    } catch (const MetricError&) {
    }
  }
  if (ranked < queries.size()) {
    log::warn(std::to_string(queries.size() - ranked) + " quer(ies) with constant scores left out of rho/tau");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.metrics["spearman_rho"] = ranked > 0 ? rho_sum / static_cast<double>(ranked) : nan;
  r.metrics["kendall_tau"] = ranked > 0 ? tau_sum / static_cast<double>(ranked) : nan;
  for (int kv : o.k_values) {
    if (static_cast<std::size_t>(kv) > smallest) {
      log::warn("p@" + std::to_string(kv) + " skipped: a query has only " + std::to_string(smallest) +
                " candidates");
      continue;
    }
    r.k_values.push_back(kv);
    r.metrics["p@" + std::to_string(kv)] = precision_at_k(queries, kv);
  }
  return r;
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["task"] = to_string(r.task);
  j["metrics"] = nlohmann::json::object();
  for (const auto& [name, value] : r.metrics) {
    j["metrics"][name] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(nullptr);
  }
  j["k_values"] = r.k_values;
  j["pairs"] = r.pairs;
  j["queries"] = r.queries;
  j["dataset_id"] = r.dataset_id;
  j["checkpoint_id"] = r.checkpoint_id;
  return j;
}

Eigen::VectorXd score_pairs(const Model& model, const Dataset& ds, const std::vector<LabeledPair>& pairs) {
  NoGradGuard no_grad;
  Rng unused(0);
  std::unordered_map<std::string, PreparedGraph> cache;
  auto get = [&](const std::string& id) -> const PreparedGraph& {
    auto it = cache.find(id);
    if (it == cache.end()) {
      const Graph& g = ds.graph(id);
      check_feature_width(g, model.config().input_dim);
      it = cache.emplace(id, prepare(g)).first;
    }
    return it->second;
  };
  Eigen::VectorXd out(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = forward_pair(get(pairs[i].g1), get(pairs[i].g2), model, false, unused).item();
  }
  return out;
}

EvalReport evaluate(const Model& model, const Dataset& ds, const EvalOptions& o) {
  EvalReport r = model.config().task == Task::classification ? evaluate_classification(model, ds, o)
                                                              : evaluate_regression(model, ds, o);
  r.dataset_id = ds.name;
  return r;
}

}  // namespace mgmn
