#include "mgmn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mgmn/checkpoint.hpp"
#include "mgmn/errors.hpp"
#include "mgmn/log.hpp"
#include "mgmn/metrics.hpp"

namespace mgmn {
namespace {

constexpr int kTrain = 0;
constexpr int kVal = 1;
constexpr int kTest = 2;

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or(const nlohmann::json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot append to " + path.string());
  os << line << '\n';
}

}  // namespace

double TrainConfig::resolved_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return task == Task::classification ? 0.5e-3 : 5e-3;
}

void TrainConfig::validate() const {
  if (resolved_learning_rate() < 0.0) throw ConfigError("learning rate must be non-negative");
  if (epochs < 0 || iterations < 0) throw ConfigError("schedule lengths must be non-negative");
  if (batch_size < 1 || pairs_per_side < 1) throw ConfigError("batch must hold at least one pair");
  if (val_every < 1) throw ConfigError("val_every must be positive");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["task"] = to_string(c.task);
  j["learning_rate"] = c.resolved_learning_rate();
  j["epochs"] = c.epochs;
  j["pairs_per_side"] = c.pairs_per_side;
  j["iterations"] = c.iterations;
  j["batch_size"] = c.batch_size;
  j["val_every"] = c.val_every;
  j["val_pair_limit"] = c.val_pair_limit;
  j["clip_norm"] = c.clip_norm;
  j["seed"] = c.seed;
  j["checkpoint_dir"] = c.checkpoint_dir.string();
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("pairs_per_side")) c.pairs_per_side = j.at("pairs_per_side").get<int>();
  if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("val_every")) c.val_every = j.at("val_every").get<int>();
  if (j.contains("val_pair_limit")) c.val_pair_limit = j.at("val_pair_limit").get<std::size_t>();
  if (j.contains("clip_norm")) c.clip_norm = j.at("clip_norm").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("checkpoint_dir")) c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
  return c;
}

nlohmann::json to_json(const LogRecord& r) {
  nlohmann::json j;
  j["step"] = r.step;
  j["train_loss"] = finite_or_null(r.train_loss);
  j["val_loss"] = finite_or_null(r.val_loss);
  j["metric"] = finite_or_null(r.metric);
  j["best_val_loss"] = finite_or_null(r.best_val_loss);
  return j;
}

std::vector<FunctionGroup> function_groups(const Dataset& dataset, const std::vector<std::string>& ids) {
  std::vector<FunctionGroup> groups;
  std::unordered_map<std::string, std::size_t> where;
  for (const auto& id : ids) {
    const Graph& g = dataset.graph(id);
    if (!g.group) throw DatasetError("graph '" + id + "' has no group id");
    const auto [it, fresh] = where.emplace(*g.group, groups.size());
    if (fresh) groups.push_back({*g.group, {}});
    groups[it->second].members.push_back(id);
  }
  return groups;
}

std::vector<LabeledPair> sample_classification_pairs(const std::vector<FunctionGroup>& groups, Rng& rng) {
  if (groups.size() < 2) throw DatasetError("classification sampling needs at least two groups");
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t m = 0; m < groups[g].members.size(); ++m) order.emplace_back(g, m);
  }
  shuffle(order, rng);
  std::vector<LabeledPair> pairs;
  pairs.reserve(2 * order.size());
  std::size_t skipped = 0;
  for (const auto& [g, m] : order) {
    const auto& own = groups[g].members;
    if (own.size() >= 2) {
      std::size_t j = uniform_index(rng, own.size() - 1);
      if (j >= m) ++j;
      pairs.push_back({own[m], own[j], 1.0});
    } else {
      ++skipped;
    }
    std::size_t other = uniform_index(rng, groups.size() - 1);
    if (other >= g) ++other;
    const auto& theirs = groups[other].members;
    pairs.push_back({own[m], theirs[uniform_index(rng, theirs.size())], -1.0});
  }
  if (skipped > 0) {
    log::info(std::to_string(skipped) + " graph(s) in singleton groups had no positive pair");
  }
  return pairs;
}

Trainer::Trainer(Model& model, const Dataset& dataset, TrainConfig config)
    : model_(model), dataset_(dataset), config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  if (config_.task != model_.config().task) {
    throw ConfigError("training task " + std::string(to_string(config_.task)) +
                      " does not match the model task " + std::string(to_string(model_.config().task)));
  }
  if (dataset_.split.train.empty()) throw DatasetError("dataset has no training split");
  adam_.options.learning_rate = config_.resolved_learning_rate();
  params_ = model_.params().tensors();

  for (const Graph& g : dataset_.graphs) {
    check_feature_width(g, model_.config().input_dim);
    prepared_index_.emplace(g.id, prepared_.size());
    prepared_.push_back(prepare(g));
  }
  const std::vector<std::string>* parts[] = {&dataset_.split.train, &dataset_.split.val, &dataset_.split.test};
  for (int s = kTrain; s <= kTest; ++s) {
    for (const auto& id : *parts[s]) split_of_[id] = s;
  }
  auto split = [&](const std::string& id) {
    const auto it = split_of_.find(id);
    return it == split_of_.end() ? -1 : it->second;
  };

  if (config_.task == Task::regression) {
    for (const auto& p : dataset_.pairs) {
      const int a = split(p.g1);
      const int b = split(p.g2);
      if (a == kTrain && b == kTrain) {
        train_pairs_.push_back(p);
      } else if ((a == kVal && b == kTrain) || (a == kTrain && b == kVal)) {
        val_pairs_.push_back(a == kVal ? p : LabeledPair{p.g2, p.g1, p.target});
      }
    }
    if (train_pairs_.empty()) throw DatasetError("no regression pairs inside the training split");
  } else {
    train_groups_ = function_groups(dataset_, dataset_.split.train);
    for (const auto& p : dataset_.pairs) {
      if (split(p.g1) == kVal && split(p.g2) == kVal) val_pairs_.push_back(p);
    }
    if (val_pairs_.empty() && !dataset_.split.val.empty()) {
      Rng val_rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
      const auto val_groups = function_groups(dataset_, dataset_.split.val);
      if (val_groups.size() >= 2) val_pairs_ = sample_classification_pairs(val_groups, val_rng);
    }
  }
  if (config_.val_pair_limit > 0 && val_pairs_.size() > config_.val_pair_limit) {
    Rng val_rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
    shuffle(val_pairs_, val_rng);
    val_pairs_.resize(config_.val_pair_limit);
  }
  if (val_pairs_.empty()) log::warn("no validation pairs; validation loss will be reported as null and best.ckpt follows the latest step");
}

std::int64_t Trainer::total_steps() const {
  return config_.task == Task::regression ? config_.iterations : config_.epochs;
}

const PreparedGraph& Trainer::prepared(const std::string& id) const {
  const auto it = prepared_index_.find(id);
  if (it == prepared_index_.end()) throw DatasetError("unknown graph id '" + id + "'");
  return prepared_[it->second];
}

void Trainer::check_hygiene(const LabeledPair& p) const {
  for (const auto* id : {&p.g1, &p.g2}) {
    const auto it = split_of_.find(*id);
    if (it == split_of_.end() || it->second != kTrain) {
      throw ContractError("split hygiene: graph '" + *id + "' is not in the training split");
    }
  }
}

double Trainer::train_batch(const std::vector<LabeledPair>& batch) {
  if (batch.empty()) throw ContractError("empty training batch");
  last_batch_ids_.clear();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& p : batch) {
    check_hygiene(p);
    last_batch_ids_.push_back(p.g1 + "/" + p.g2);
    const Tensor y = forward_pair(prepared(p.g1), prepared(p.g2), model_, true, rng_);
    const Tensor diff = sub(y, Tensor::scalar(p.target));
    const Tensor loss = scale(mul(diff, diff), inv_n);
    total += loss.item();
    backward(loss);
  }
  if (!std::isfinite(total)) {
    std::ostringstream os;
    os << "non-finite training loss at step " << step_ << " (parameter norm " << model_.params().norm()
       << "); last batch:";
    for (const auto& id : last_batch_ids_) os << ' ' << id;
    throw TrainingError(os.str());
  }
  if (config_.clip_norm > 0.0) clip_grad_norm(params_, config_.clip_norm);
  adam_step(params_, adam_);
  return total;
}

void Trainer::run_step() {
  if (config_.task == Task::regression) {
    std::vector<LabeledPair> batch;
    batch.reserve(static_cast<std::size_t>(config_.batch_size));
    for (int i = 0; i < config_.batch_size; ++i) {
      LabeledPair p = train_pairs_[uniform_index(rng_, train_pairs_.size())];
      if (bernoulli(rng_, 0.5)) std::swap(p.g1, p.g2);
      batch.push_back(std::move(p));
    }
    loss_sum_ += train_batch(batch);
    ++loss_count_;
  } else {
    const auto pairs = sample_classification_pairs(train_groups_, rng_);
    const std::size_t width = 2 * static_cast<std::size_t>(config_.pairs_per_side);
    for (std::size_t start = 0; start < pairs.size(); start += width) {
      const auto end = std::min(pairs.size(), start + width);
      loss_sum_ += train_batch({pairs.begin() + static_cast<std::ptrdiff_t>(start),
                                pairs.begin() + static_cast<std::ptrdiff_t>(end)});
      ++loss_count_;
    }
  }
  ++step_;
}

std::pair<double, double> Trainer::validate_model() const {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (val_pairs_.empty()) return {nan, nan};
  NoGradGuard no_grad;
  Rng unused(0);
  Eigen::VectorXd pred(static_cast<Eigen::Index>(val_pairs_.size()));
  Eigen::VectorXd truth(pred.size());
  for (std::size_t i = 0; i < val_pairs_.size(); ++i) {
    const auto& p = val_pairs_[i];
    pred(static_cast<Eigen::Index>(i)) = forward_pair(prepared(p.g1), prepared(p.g2), model_, false, unused).item();
    truth(static_cast<Eigen::Index>(i)) = p.target;
  }
  const double loss = mse_metric(pred, truth);
  double metric = nan;
  try {
    metric = config_.task == Task::classification ? auc(pred, truth) : spearman_rho(pred, truth);
  } catch (const MetricError&) {
  }
  return {loss, metric};
}

void Trainer::record_validation() {
  const auto [val_loss, metric] = validate_model();
  LogRecord r;
  r.step = step_;
  r.train_loss = loss_count_ > 0 ? loss_sum_ / static_cast<double>(loss_count_) : 0.0;
  r.val_loss = val_loss;
  r.metric = metric;
  loss_sum_ = 0.0;
  loss_count_ = 0;
  const bool improved = std::isfinite(val_loss) && val_loss < report_.best_val_loss;
  if (improved) {
    report_.best_val_loss = val_loss;
    report_.best_step = step_;
  }
  if ((improved || val_pairs_.empty()) && !config_.checkpoint_dir.empty()) {
    Checkpoint ck = make_checkpoint(model_);
    ck.extra["step"] = step_;
    ck.extra["val_loss"] = val_loss;
    write_checkpoint(config_.checkpoint_dir / "best.ckpt", ck);
  }
  r.best_val_loss = report_.best_val_loss;
  report_.log.push_back(r);
  if (!config_.checkpoint_dir.empty()) {
    append_line(config_.checkpoint_dir / "train_log.jsonl", to_json(r).dump());
  }
  std::ostringstream os;
  os << "step " << r.step << "  train " << r.train_loss << "  val " << r.val_loss << "  "
     << (config_.task == Task::classification ? "auc " : "rho ") << r.metric;
  log::info(os.str());
}

TrainReport Trainer::run(std::optional<std::int64_t> until) {
  const std::int64_t schedule = total_steps();
  const std::int64_t stop = std::min(until.value_or(schedule), schedule);
  if (!config_.checkpoint_dir.empty()) std::filesystem::create_directories(config_.checkpoint_dir);
  while (step_ < stop) {
    run_step();
    const bool due = config_.task == Task::classification || step_ % config_.val_every == 0;
    if (due || step_ == schedule) record_validation();
  }
  report_.steps = step_;
  if (!config_.checkpoint_dir.empty()) save_state(config_.checkpoint_dir / "last.ckpt");
  return report_;
}

void Trainer::save_state(const std::filesystem::path& path) const {
  Checkpoint ck = make_checkpoint(model_);
  const auto& entries = model_.params().entries();
  for (std::size_t i = 0; i < adam_.first_moment.size(); ++i) {
    ck.tensors.emplace_back("adam.m." + entries[i].first, adam_.first_moment[i]);
    ck.tensors.emplace_back("adam.v." + entries[i].first, adam_.second_moment[i]);
  }
  nlohmann::json t;
  t["step"] = step_;
  t["adam_step"] = adam_.step;
  t["rng"] = save_rng(rng_);
  t["best_val_loss"] = finite_or_null(report_.best_val_loss);
  t["best_step"] = report_.best_step;
  t["loss_sum"] = loss_sum_;
  t["loss_count"] = loss_count_;
  t["config"] = to_json(config_);
  t["log"] = nlohmann::json::array();
  for (const auto& r : report_.log) t["log"].push_back(to_json(r));
  ck.extra["trainer"] = std::move(t);
  write_checkpoint(path, ck);
}

void Trainer::load_state(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (!ck.extra.contains("trainer")) throw CheckpointError(path.string() + " holds no trainer state");
  restore_params(ck, model_);
  const auto& t = ck.extra.at("trainer");
  step_ = t.at("step").get<std::int64_t>();
  adam_.step = t.at("adam_step").get<std::int64_t>();
  rng_ = load_rng(t.at("rng").get<std::string>());
  report_ = {};
  report_.best_val_loss = number_or(t.at("best_val_loss"), std::numeric_limits<double>::infinity());
  report_.best_step = t.at("best_step").get<std::int64_t>();
  loss_sum_ = t.at("loss_sum").get<double>();
  loss_count_ = t.at("loss_count").get<std::int64_t>();
  for (const auto& j : t.at("log")) {
    LogRecord r;
    r.step = j.at("step").get<std::int64_t>();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.train_loss = number_or(j.at("train_loss"), nan);
    r.val_loss = number_or(j.at("val_loss"), nan);
    r.metric = number_or(j.at("metric"), nan);
    r.best_val_loss = number_or(j.at("best_val_loss"), std::numeric_limits<double>::infinity());
    report_.log.push_back(r);
  }
  report_.steps = step_;

  adam_.first_moment.clear();
  adam_.second_moment.clear();
  if (adam_.step == 0) return;
  auto find = [&](const std::string& name) -> const Matrix& {
    for (const auto& [n, m] : ck.tensors) {
      if (n == name) return m;
    }
    throw CheckpointError("checkpoint lacks optimiser tensor " + name);
  };
  for (const auto& [name, tensor] : model_.params().entries()) {
    adam_.first_moment.push_back(find("adam.m." + name));
    adam_.second_moment.push_back(find("adam.v." + name));
  }
}

}  // namespace mgmn
