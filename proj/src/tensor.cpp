#include "lcl/tensor.hpp"

#include <cstring>

#include "lcl/errors.hpp"

namespace lcl {

std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

std::size_t element_count(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Tensor::Tensor(Shape d, std::vector<double> v) : dims(std::move(d)), data(std::move(v)) {
  if (element_count(dims) != data.size()) {
    throw DimensionError("tensor of shape " + shape_string(dims) + " cannot hold " +
                         std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::zeros(Shape dims) {
  const std::size_t n = element_count(dims);
  return Tensor(std::move(dims), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.dims != b.dims || a.data.size() != b.data.size()) return false;
  return a.data.empty() ||
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

void ParamSet::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value), trainable});
}

bool ParamSet::contains(const std::string& name) const { return index_.count(name) != 0; }

const ParamSet::Entry& ParamSet::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

const Tensor& ParamSet::at(const std::string& name) const { return entry(name).value; }

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

void ParamSet::set_trainable(const std::string& name, bool trainable) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  entries_[it->second].trainable = trainable;
}

std::size_t ParamSet::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool bit_equal(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->name != ib->name || ia->trainable != ib->trainable) return false;
    if (!bit_equal(ia->value, ib->value)) return false;
  }
  return true;
}

}  // namespace lcl
