#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace lcl {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& dims);

/// Dense row-major tensor of 64-bit reals.
struct Tensor {
  Shape dims;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape dims, std::vector<double> data);

  static Tensor zeros(Shape dims);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return dims.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

std::size_t element_count(const Shape& dims);

/// Exact bitwise comparison of dims and payload (distinguishes -0.0 and NaN payloads).
bool bit_equal(const Tensor& a, const Tensor& b);

/// Ordered name -> tensor map with a per-entry trainable flag.
/// Iteration order is insertion order.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  void add(std::string name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Entry& entry(const std::string& name) const;
  void set_trainable(const std::string& name, bool trainable);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t total_values() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool bit_equal(const ParamSet& a, const ParamSet& b);

}  // namespace lcl
