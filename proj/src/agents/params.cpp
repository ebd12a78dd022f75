#include "driftlab/agents/params.hpp"

#include <algorithm>
#include <cstring>

#include "driftlab/errors.hpp"

namespace driftlab::agents {

namespace {
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}
}  // namespace

void ParamStore::add(std::string name, ad::Tensor tensor) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  entries_.push_back(Entry{std::move(name), std::move(tensor)});
}

const ad::Tensor& ParamStore::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

ad::Tensor& ParamStore::get(std::string_view name) {
  return const_cast<ad::Tensor&>(std::as_const(*this).get(name));
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

std::vector<ad::Tensor> ParamStore::tensors() const {
  std::vector<ad::Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

ParamStore ParamStore::clone() const {
  ParamStore copy;
  for (const auto& e : entries_) copy.entries_.push_back(Entry{e.name, e.tensor.clone()});
  return copy;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<double> ParamStore::flatten_values() const {
  std::vector<double> flat;
  flat.reserve(numel());
  for (const auto& e : entries_) {
    auto d = e.tensor.data();
    flat.insert(flat.end(), d.begin(), d.end());
  }
  return flat;
}

std::vector<double> ParamStore::flatten_grads() const {
  std::vector<double> flat;
  flat.reserve(numel());
  for (const auto& e : entries_) {
    if (e.tensor.has_grad()) {
      auto g = e.tensor.grad();
      flat.insert(flat.end(), g.begin(), g.end());
    } else {
      flat.insert(flat.end(), e.tensor.numel(), 0.0);
    }
  }
  return flat;
}

void ParamStore::unflatten_values(std::span<const double> flat) {
  if (flat.size() != numel()) {
    throw DimensionError("unflatten_values: expected " + std::to_string(numel()) + " values, got " +
                         std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  for (auto& e : entries_) {
    auto d = e.tensor.data();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + d.size()), d.begin());
    offset += d.size();
  }
}

std::uint64_t ParamStore::content_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& e : entries_) {
    fnv_bytes(h, e.name.data(), e.name.size());
    for (std::size_t d : e.tensor.shape()) {
      auto d64 = static_cast<std::uint64_t>(d);
      fnv_bytes(h, &d64, sizeof d64);
    }
    auto data = e.tensor.data();
    fnv_bytes(h, data.data(), data.size() * sizeof(double));
  }
  return h;
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (entries_[i].tensor.shape() != other.entries_[i].tensor.shape()) return false;
  }
  return true;
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto a = entries_[i].tensor.data();
    auto b = other.entries_[i].tensor.data();
    if (!std::equal(a.begin(), a.end(), b.begin())) return false;
  }
  return true;
}

}  // namespace driftlab::agents
