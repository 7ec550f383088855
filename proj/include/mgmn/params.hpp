#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgmn/tensor.hpp"

namespace mgmn {

/// Named trainable leaves in registration order. Names are dotted paths
/// such as "gcn.0.weight". Each entry owns one storage that every use in a
/// forward pass shares.
class ParamStore {
 public:
  Tensor& add(std::string name, Matrix init);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  /// Handles sharing storage with the store (order = registration order).
  std::vector<Tensor> tensors() const;

  std::size_t size() const { return entries_.size(); }
  Index value_count() const;
  double norm() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace mgmn
