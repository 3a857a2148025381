#include "lcl/nn.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "lcl/errors.hpp"

namespace lcl {

std::string DenseStack::weight_name(std::size_t layer) const {
  return prefix + "." + std::to_string(layer) + ".weight";
}

std::string DenseStack::bias_name(std::size_t layer) const {
  return prefix + "." + std::to_string(layer) + ".bias";
}

void init_dense(ParamSet& params, const DenseStack& stack, Rng& rng) {
  for (std::size_t l = 0; l < stack.layers(); ++l) {
    const std::size_t in = stack.sizes[l], out = stack.sizes[l + 1];
    if (in == 0 || out == 0) throw ConfigError("dense stack '" + stack.prefix + "' has a zero-width layer");
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w = Tensor::zeros({out, in});
    for (auto& v : w.data) v = gaussian(rng, s);
    params.add(stack.weight_name(l), std::move(w));
    params.add(stack.bias_name(l), Tensor::zeros({out}));
  }
}

Var dense_forward(Tape& tape, const ParamSet& params, const DenseStack& stack, Var x) {
  for (std::size_t l = 0; l < stack.layers(); ++l) {
    const Var w = tape.param(params, stack.weight_name(l));
    const Var b = tape.param(params, stack.bias_name(l));
    x = tape.affine(w, x, b);
    const Activation act = (l + 1 == stack.layers()) ? stack.output : stack.hidden;
    if (act != Activation::identity) x = tape.activation(act, x);
  }
  return x;
}

std::vector<double> dense_eval(const ParamSet& params, const DenseStack& stack,
                               std::span<const double> x) {
  if (x.size() != stack.input_size()) {
    throw DimensionError("dense stack '" + stack.prefix + "' expects input of length " +
                         std::to_string(stack.input_size()) + ", got " + std::to_string(x.size()));
  }
  std::vector<double> cur(x.begin(), x.end()), next;
  for (std::size_t l = 0; l < stack.layers(); ++l) {
    const Tensor& w = params.at(stack.weight_name(l));
    const Tensor& b = params.at(stack.bias_name(l));
    const std::size_t out = w.dims[0], in = w.dims[1];
    if (in != cur.size()) throw DimensionError("dense layer " + stack.weight_name(l) + " shape mismatch");
    next.assign(b.data.begin(), b.data.end());
    const Activation act = (l + 1 == stack.layers()) ? stack.output : stack.hidden;
    for (std::size_t i = 0; i < out; ++i) {
      const double* row = w.data.data() + i * in;
      double acc = 0.0;
      for (std::size_t j = 0; j < in; ++j) acc += row[j] * cur[j];
      next[i] = activate(act, next[i] + acc);
    }
    cur.swap(next);
  }
  return cur;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse layer size '" + item + "'");
    }
    while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
    if (pos != item.size() || v <= 0) throw ConfigError("invalid layer size '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string format_sizes(const std::vector<std::size_t>& sizes) {
  std::string s;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(sizes[i]);
  }
  return s;
}

}  // namespace lcl
