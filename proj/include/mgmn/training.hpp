#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mgmn/adam.hpp"
#include "mgmn/dataset.hpp"
#include "mgmn/model.hpp"
#include "mgmn/rng.hpp"

namespace mgmn {

/// Raised when the loss stops being finite.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  Task task = Task::regression;
  std::optional<double> learning_rate;  // 0.5e-3 classification, 5e-3 regression
  int epochs = 100;                     // classification
  int pairs_per_side = 5;               // classification batch: 5 positive + 5 negative
  int iterations = 10000;               // regression
  int batch_size = 128;                 // regression
  int val_every = 100;                  // regression; classification validates every epoch
  std::size_t val_pair_limit = 0;       // 0 = every validation pair
  double clip_norm = 0.0;               // 0 = no clipping
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty = keep nothing on disk

  double resolved_learning_rate() const;
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct FunctionGroup {
  std::string id;
  std::vector<std::string> members;
};

/// Groups graphs by their group id, keeping only the listed ids. Order
/// follows first appearance in `ids`.
std::vector<FunctionGroup> function_groups(const Dataset& dataset, const std::vector<std::string>& ids);

/// For every graph: one positive partner drawn from its own group and one
/// negative partner drawn from the other groups. Graphs of singleton groups
/// get no positive (logged once per call). Graphs are visited in a fresh
/// random order; each contributes its positive, then its negative.
std::vector<LabeledPair> sample_classification_pairs(const std::vector<FunctionGroup>& groups, Rng& rng);

struct LogRecord {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double metric = 0.0;  // AUC (classification) or Spearman rho (regression)
  double best_val_loss = 0.0;
};

nlohmann::json to_json(const LogRecord& record);

struct TrainReport {
  std::vector<LogRecord> log;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::int64_t best_step = -1;
  std::int64_t steps = 0;
};

/// Owns the optimiser state of one training run. A step is one iteration
/// (regression) or one epoch (classification).
class Trainer {
 public:
  Trainer(Model& model, const Dataset& dataset, TrainConfig config);

  /// Runs until `total_steps` steps are done (default: the full schedule).
  TrainReport run(std::optional<std::int64_t> total_steps = std::nullopt);

  /// Mean loss over one batch, with gradients applied.
  double train_batch(const std::vector<LabeledPair>& batch);

  /// Validation mse and metric on the validation pairs (eval mode).
  std::pair<double, double> validate_model() const;

  std::int64_t step() const { return step_; }
  std::int64_t total_steps() const;
  const TrainReport& report() const { return report_; }
  const AdamState& optimizer() const { return adam_; }

  /// Everything needed to continue the run bit-exactly.
  void save_state(const std::filesystem::path& path) const;
  void load_state(const std::filesystem::path& path);

  /// Pairs used for validation; exposed for the split-hygiene checks.
  const std::vector<LabeledPair>& validation_pairs() const { return val_pairs_; }

 private:
  void run_step();
  void record_validation();
  void check_hygiene(const LabeledPair& p) const;
  const PreparedGraph& prepared(const std::string& id) const;

  Model& model_;
  const Dataset& dataset_;
  TrainConfig config_;
  AdamState adam_;
  Rng rng_;
  std::int64_t step_ = 0;
  TrainReport report_;
  double loss_sum_ = 0.0;  // train losses since the last validation
  std::int64_t loss_count_ = 0;
  std::vector<Tensor> params_;

  std::vector<PreparedGraph> prepared_;
  std::unordered_map<std::string, std::size_t> prepared_index_;
  std::unordered_map<std::string, int> split_of_;  // 0 train, 1 val, 2 test
  std::vector<FunctionGroup> train_groups_;
  std::vector<LabeledPair> train_pairs_;
  std::vector<LabeledPair> val_pairs_;
  std::vector<std::string> last_batch_ids_;
};

}  // namespace mgmn
