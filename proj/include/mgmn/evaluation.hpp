#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgmn/dataset.hpp"
#include "mgmn/metrics.hpp"
#include "mgmn/model.hpp"

namespace mgmn {

struct EvalOptions {
  std::string split = "test";
  std::vector<int> k_values = {10, 20};
  /// Regression: pair each query graph with every training graph. When
  /// false, score every stored pair with both ends in the split instead.
  bool query_against_train = true;
  std::size_t max_queries = 0;  // 0 = every graph in the split
};

struct EvalReport {
  Task task = Task::regression;
  std::map<std::string, double> metrics;
  std::vector<int> k_values;
  std::size_t pairs = 0;
  std::size_t queries = 0;
  std::string dataset_id;
  std::string checkpoint_id;
};

nlohmann::json to_json(const EvalReport& report);

/// Eval-mode scores, one per pair, without recording gradients.
Eigen::VectorXd score_pairs(const Model& model, const Dataset& dataset, const std::vector<LabeledPair>& pairs);

/// Classification: AUC over the split's stored pairs. Regression: mse (and
/// mse scaled by 1e3), per-query mean Spearman rho and Kendall tau, and p@k.
EvalReport evaluate(const Model& model, const Dataset& dataset, const EvalOptions& options = {});

}  // namespace mgmn
