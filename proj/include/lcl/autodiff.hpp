#pragma once

// Minimal reverse-mode differentiation over rank-1/rank-2 tensors.
//
// A Tape records every primitive in execution order, so the node list is
// already a topological order and backward() is a single reverse sweep.
// Parameter leaves reference tensors owned by a ParamSet; that ParamSet must
// outlive the tape and must not be modified while the tape is alive.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lcl/tensor.hpp"

namespace lcl {

enum class Activation { identity, tanh, sigmoid, relu, exp };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation kind);
double activate(Activation kind, double x);

using GradMap = std::map<std::string, Tensor>;

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  Var constant(Tensor value);
  /// Leaf bound to params.at(name). Trainable entries receive gradients.
  Var param(const ParamSet& params, const std::string& name);

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var affine(Var W, Var x, Var b);
  Var activation(Activation kind, Var x);
  Var concat(Var a, Var b);
  Var slice(Var x, std::size_t offset, std::size_t length);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, double factor);
  Var sum(Var x);
  Var mse(Var pred, Var target);
  /// KL(N(mu, exp(logvar)) || N(0, I)) = 0.5 * sum(mu^2 + exp(logvar) - logvar - 1).
  Var gaussian_kl(Var mu, Var logvar);

  /// Gradients for every trainable leaf on this tape. Leaves that do not
  /// reach the loss get zeros of matching shape.
  GradMap backward(Var loss) const;
  /// Same as backward() but adds into an existing map (batch accumulation).
  void backward_into(Var loss, GradMap& grads) const;

 private:
  enum class Op { constant, param, affine, activation, concat, slice, add, mul, scale, sum, mse, kl };

  struct Node {
    Op op = Op::constant;
    std::size_t in[3] = {0, 0, 0};
    bool requires_grad = false;
    Activation act = Activation::identity;
    double factor = 0.0;
    std::size_t offset = 0;
    Tensor owned;
    const Tensor* ref = nullptr;
    std::string name;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check_rank1(Var v, const char* op) const;

  std::vector<Node> nodes_;
};

/// Adds every gradient in `from` into `into` (shapes must agree).
void accumulate(GradMap& into, const GradMap& from);
void scale(GradMap& grads, double factor);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates, keyed by parameter name.
struct AdamState {
  std::map<std::string, std::pair<Tensor, Tensor>> moments;
};

/// One bias-corrected Adam update; t is the 1-based step index.
void adam_step(ParamSet& params, const GradMap& grads, const AdamConfig& cfg, AdamState& state,
               std::size_t t);

}  // namespace lcl
