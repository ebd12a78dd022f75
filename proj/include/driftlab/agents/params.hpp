#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/ad/tensor.hpp"

namespace driftlab::agents {

// Named learnable tensors in a fixed insertion order. The order defines the
// layout of every flattened value/gradient vector.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    ad::Tensor tensor;
  };

  void add(std::string name, ad::Tensor tensor);
  const ad::Tensor& get(std::string_view name) const;
  ad::Tensor& get(std::string_view name);
  bool contains(std::string_view name) const;

  std::span<const Entry> entries() const { return entries_; }
  std::span<Entry> entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t numel() const;
  std::vector<ad::Tensor> tensors() const;

  // Independent copy: mutating the clone never touches this store.
  ParamStore clone() const;
  void zero_grad();

  std::vector<double> flatten_values() const;
  // Missing grads flatten as zeros.
  std::vector<double> flatten_grads() const;
  void unflatten_values(std::span<const double> flat);

  // FNV-1a over names, shapes and raw value bytes.
  std::uint64_t content_hash() const;

  bool same_layout(const ParamStore& other) const;
  bool values_equal(const ParamStore& other) const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace driftlab::agents
