#include "mgmn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mgmn {
namespace {

void require_same_length(const char* name, const VectorRef& a, const VectorRef& b) {
  if (a.size() != b.size()) {
    throw MetricError(std::string(name) + ": lengths differ (" + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

Eigen::VectorXd average_ranks(const VectorRef& values) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  Eigen::VectorXd ranks(n);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values(order[j + 1]) == values(order[i])) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks(order[t]) = r;
    i = j + 1;
  }
  return ranks;
}

double auc(const VectorRef& scores, const VectorRef& labels) {
  require_same_length("auc", scores, labels);
  double positives = 0.0;
  double negatives = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) == 1.0) {
      positives += 1.0;
    } else if (labels(i) == -1.0) {
      negatives += 1.0;
    } else {
      throw MetricError("auc: labels must be -1 or +1");
    }
  }
  if (positives == 0.0 || negatives == 0.0) {
    throw MetricError("auc: both classes must be present");
  }
  const Eigen::VectorXd ranks = average_ranks(scores);
  double positive_rank_sum = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) == 1.0) positive_rank_sum += ranks(i);
  }
  return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double mse_metric(const VectorRef& pred, const VectorRef& truth) {
  require_same_length("mse", pred, truth);
  if (pred.size() == 0) throw MetricError("mse: empty input");
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

double spearman_rho(const VectorRef& pred, const VectorRef& truth) {
  require_same_length("spearman_rho", pred, truth);
  if (pred.size() < 2) throw MetricError("spearman_rho: need at least two values");
  const Eigen::VectorXd rp = average_ranks(pred);
  const Eigen::VectorXd rt = average_ranks(truth);
  const Eigen::VectorXd cp = rp.array() - rp.mean();
  const Eigen::VectorXd ct = rt.array() - rt.mean();
  const double denom = std::sqrt(cp.squaredNorm() * ct.squaredNorm());
  if (denom == 0.0) throw MetricError("spearman_rho: undefined for constant input");
  return cp.dot(ct) / denom;
}

double kendall_tau(const VectorRef& pred, const VectorRef& truth) {
  require_same_length("kendall_tau", pred, truth);
  const Eigen::Index n = pred.size();
  if (n < 2) throw MetricError("kendall_tau: need at least two values");
  double concordant = 0.0;
  double discordant = 0.0;
  double ties_pred = 0.0;
  double ties_truth = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dp = pred(i) - pred(j);
      const double dt = truth(i) - truth(j);
      if (dp == 0.0) ties_pred += 1.0;
      if (dt == 0.0) ties_truth += 1.0;
      if (dp == 0.0 || dt == 0.0) continue;
      if ((dp > 0.0) == (dt > 0.0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double denom = std::sqrt((pairs - ties_pred) * (pairs - ties_truth));
  if (denom == 0.0) throw MetricError("kendall_tau: undefined for constant input");
  return (concordant - discordant) / denom;
}

double precision_at_k(std::span<const RankedQueryResult> results, int k) {
  if (results.empty()) throw MetricError("precision_at_k: no queries");
  if (k < 1) throw MetricError("precision_at_k: k must be positive");
  double total = 0.0;
  for (const RankedQueryResult& q : results) {
    if (static_cast<int>(q.candidates.size()) < k) {
      throw MetricError("precision_at_k: query '" + q.query_id + "' has " +
                        std::to_string(q.candidates.size()) + " candidates, k = " +
                        std::to_string(k));
    }
    auto top_k = [&](auto score) {
      std::vector<const RankedCandidate*> sorted;
      for (const auto& c : q.candidates) sorted.push_back(&c);
      std::sort(sorted.begin(), sorted.end(), [&](const RankedCandidate* a, const RankedCandidate* b) {
        const double sa = score(*a);
        const double sb = score(*b);
        if (sa != sb) return sa > sb;
        return a->id < b->id;
      });
      std::set<std::string> ids;
      for (int i = 0; i < k; ++i) ids.insert(sorted[static_cast<std::size_t>(i)]->id);
      return ids;
    };
    const auto by_pred = top_k([](const RankedCandidate& c) { return c.predicted; });
    const auto by_truth = top_k([](const RankedCandidate& c) { return c.truth; });
    int overlap = 0;
    for (const auto& id : by_pred) overlap += static_cast<int>(by_truth.count(id));
    total += static_cast<double>(overlap) / static_cast<double>(k);
  }
  return total / static_cast<double>(results.size());
}

}  // namespace mgmn
