#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgmn {

/// The metric is undefined for the given input (one class, constant list,
/// empty input, k too large).
class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Area under the ROC curve in its Mann-Whitney form: the probability that a
/// positive outscores a negative, ties counted as one half. Labels are -1/+1.
double auc(const VectorRef& scores, const VectorRef& labels);

/// Mean squared error. Tables report it multiplied by 1e3.
double mse_metric(const VectorRef& pred, const VectorRef& truth);

/// Average ranks (1-based), ties sharing the mean of their positions.
Eigen::VectorXd average_ranks(const VectorRef& values);

/// Pearson correlation of average ranks.
double spearman_rho(const VectorRef& pred, const VectorRef& truth);

/// Tie-corrected Kendall tau-b.
double kendall_tau(const VectorRef& pred, const VectorRef& truth);

struct RankedCandidate {
  std::string id;
  double predicted = 0.0;
  double truth = 0.0;
};

struct RankedQueryResult {
  std::string query_id;
  std::vector<RankedCandidate> candidates;
};

/// Mean over queries of |top-k by prediction intersect top-k by truth| / k.
/// Higher scores rank first; ties break by ascending candidate id.
double precision_at_k(std::span<const RankedQueryResult> results, int k);

}  // namespace mgmn
