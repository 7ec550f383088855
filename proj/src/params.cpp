#include "mgmn/params.hpp"

#include <cmath>

namespace mgmn {

Tensor& ParamStore::add(std::string name, Matrix init) {
  if (contains(name)) throw ContractError("ParamStore: duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), Tensor(std::move(init), true));
  return entries_.back().second;
}

bool ParamStore::contains(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

Tensor& ParamStore::at(std::string_view name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ContractError("ParamStore: unknown parameter '" + std::string(name) + "'");
}

const Tensor& ParamStore::at(std::string_view name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [n, t] : entries_) out.push_back(t);
  return out;
}

Index ParamStore::value_count() const {
  Index total = 0;
  for (const auto& [n, t] : entries_) total += t.size();
  return total;
}

double ParamStore::norm() const {
  double sq = 0.0;
  for (const auto& [n, t] : entries_) sq += t.value().squaredNorm();
  return std::sqrt(sq);
}

void ParamStore::zero_grad() {
  for (auto& [n, t] : entries_) t.zero_grad();
}

}  // namespace mgmn
