#pragma once

#include <span>
#include <string>
#include <vector>

#include "lcl/autodiff.hpp"
#include "lcl/rng.hpp"

namespace lcl {

/// Fully connected stack. sizes = {input, hidden..., output}; parameters are
/// named "<prefix>.<layer>.weight" ([out x in]) and "<prefix>.<layer>.bias".
struct DenseStack {
  std::string prefix;
  std::vector<std::size_t> sizes;
  Activation hidden = Activation::tanh;
  Activation output = Activation::identity;

  std::size_t layers() const { return sizes.empty() ? 0 : sizes.size() - 1; }
  std::size_t input_size() const { return sizes.front(); }
  std::size_t output_size() const { return sizes.back(); }
  std::string weight_name(std::size_t layer) const;
  std::string bias_name(std::size_t layer) const;
};

/// Weights ~ N(0, 1/fan_in), biases zero.
void init_dense(ParamSet& params, const DenseStack& stack, Rng& rng);

Var dense_forward(Tape& tape, const ParamSet& params, const DenseStack& stack, Var x);

/// Tape-free evaluation of the same stack.
std::vector<double> dense_eval(const ParamSet& params, const DenseStack& stack,
                               std::span<const double> x);

std::vector<std::size_t> parse_sizes(const std::string& text);
std::string format_sizes(const std::vector<std::size_t>& sizes);

}  // namespace lcl
