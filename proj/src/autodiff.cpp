#include "lcl/autodiff.hpp"

#include <cmath>

#include "lcl/errors.hpp"

namespace lcl {

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  if (name == "exp") return Activation::exp;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation kind) {
  switch (kind) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::exp: return "exp";
  }
  return "?";
}

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::identity: return x;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::exp: return std::exp(x);
  }
  return x;
}

namespace {

// Derivative expressed through the input x and output y of the activation.
double activation_slope(Activation kind, double x, double y) {
  switch (kind) {
    case Activation::identity: return 1.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::exp: return y;
  }
  return 1.0;
}

}  // namespace

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.ref ? *n.ref : n.owned;
}

void Tape::check_rank1(Var v, const char* op) const {
  if (value(v).rank() != 1) {
    throw DimensionError(std::string(op) + ": expected rank-1 operand, got " +
                         shape_string(value(v).dims));
  }
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::constant;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::param(const ParamSet& params, const std::string& name) {
  const auto& e = params.entry(name);
  Node n;
  n.op = e.trainable ? Op::param : Op::constant;
  n.ref = &e.value;
  n.requires_grad = e.trainable;
  n.name = name;
  return push(std::move(n));
}

Var Tape::affine(Var W, Var x, Var b) {
  const Tensor& w = value(W);
  const Tensor& xv = value(x);
  const Tensor& bv = value(b);
  if (w.rank() != 2 || xv.rank() != 1 || bv.rank() != 1 || w.dims[1] != xv.dims[0] ||
      w.dims[0] != bv.dims[0]) {
    throw DimensionError("affine: W " + shape_string(w.dims) + ", x " + shape_string(xv.dims) +
                         ", b " + shape_string(bv.dims) + " do not conform");
  }
  const std::size_t m = w.dims[0], k = w.dims[1];
  std::vector<double> out(bv.data);
  const double* wp = w.data.data();
  const double* xp = xv.data.data();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = wp + i * k;
    for (std::size_t j = 0; j < k; ++j) acc += row[j] * xp[j];
    out[i] += acc;
  }
  Node n;
  n.op = Op::affine;
  n.in[0] = W.id;
  n.in[1] = x.id;
  n.in[2] = b.id;
  n.requires_grad = node(W).requires_grad || node(x).requires_grad || node(b).requires_grad;
  n.owned = Tensor::vector(std::move(out));
  return push(std::move(n));
}

Var Tape::activation(Activation kind, Var x) {
  const Tensor& xv = value(x);
  Tensor out = xv;
  for (auto& v : out.data) v = activate(kind, v);
  Node n;
  n.op = Op::activation;
  n.act = kind;
  n.in[0] = x.id;
  n.requires_grad = node(x).requires_grad;
  n.owned = std::move(out);
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  check_rank1(a, "concat");
  check_rank1(b, "concat");
  std::vector<double> out(value(a).data);
  const auto& bd = value(b).data;
  out.insert(out.end(), bd.begin(), bd.end());
  Node n;
  n.op = Op::concat;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.owned = Tensor::vector(std::move(out));
  return push(std::move(n));
}

Var Tape::slice(Var x, std::size_t offset, std::size_t length) {
  check_rank1(x, "slice");
  const auto& xd = value(x).data;
  if (offset + length > xd.size()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") out of range for length " +
                         std::to_string(xd.size()));
  }
  Node n;
  n.op = Op::slice;
  n.in[0] = x.id;
  n.offset = offset;
  n.requires_grad = node(x).requires_grad;
  n.owned = Tensor::vector(std::vector<double>(xd.begin() + static_cast<std::ptrdiff_t>(offset),
                                               xd.begin() + static_cast<std::ptrdiff_t>(offset + length)));
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.dims != bv.dims) {
    throw DimensionError("add: " + shape_string(av.dims) + " vs " + shape_string(bv.dims));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  Node n;
  n.op = Op::add;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.owned = std::move(out);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.dims != bv.dims) {
    throw DimensionError("mul: " + shape_string(av.dims) + " vs " + shape_string(bv.dims));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Node n;
  n.op = Op::mul;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.owned = std::move(out);
  return push(std::move(n));
}

Var Tape::scale(Var x, double factor) {
  Tensor out = value(x);
  for (auto& v : out.data) v *= factor;
  Node n;
  n.op = Op::scale;
  n.in[0] = x.id;
  n.factor = factor;
  n.requires_grad = node(x).requires_grad;
  n.owned = std::move(out);
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  double acc = 0.0;
  for (double v : value(x).data) acc += v;
  Node n;
  n.op = Op::sum;
  n.in[0] = x.id;
  n.requires_grad = node(x).requires_grad;
  n.owned = Tensor({}, {acc});
  return push(std::move(n));
}

Var Tape::mse(Var pred, Var target) {
  const Tensor& p = value(pred);
  const Tensor& t = value(target);
  if (p.dims != t.dims) {
    throw DimensionError("mse: pred " + shape_string(p.dims) + " vs target " +
                         shape_string(t.dims));
  }
  if (p.size() == 0) throw DimensionError("mse: empty operands");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    acc += d * d;
  }
  Node n;
  n.op = Op::mse;
  n.in[0] = pred.id;
  n.in[1] = target.id;
  n.requires_grad = node(pred).requires_grad || node(target).requires_grad;
  n.owned = Tensor({}, {acc / static_cast<double>(p.size())});
  return push(std::move(n));
}

Var Tape::gaussian_kl(Var mu, Var logvar) {
  const Tensor& m = value(mu);
  const Tensor& lv = value(logvar);
  if (m.dims != lv.dims) {
    throw DimensionError("gaussian_kl: mu " + shape_string(m.dims) + " vs logvar " +
                         shape_string(lv.dims));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    acc += m[i] * m[i] + std::exp(lv[i]) - lv[i] - 1.0;
  }
  Node n;
  n.op = Op::kl;
  n.in[0] = mu.id;
  n.in[1] = logvar.id;
  n.requires_grad = node(mu).requires_grad || node(logvar).requires_grad;
  n.owned = Tensor({}, {0.5 * acc});
  return push(std::move(n));
}

GradMap Tape::backward(Var loss) const {
  GradMap out;
  backward_into(loss, out);
  return out;
}

void Tape::backward_into(Var loss, GradMap& out) const {
  if (value(loss).size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_string(value(loss).dims));
  }
  // Parameter leaves accumulate straight into the output map; every trainable
  // leaf on the tape gets an entry even if it never reaches the loss.
  std::vector<std::vector<double>*> sink(nodes_.size(), nullptr);
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.op != Op::param) continue;
    auto [it, fresh] = out.try_emplace(n.name, Tensor::zeros(n.ref->dims));
    if (it->second.dims != n.ref->dims) {
      throw DimensionError("backward: accumulator for '" + n.name + "' has shape " +
                           shape_string(it->second.dims));
    }
    sink[id] = &it->second.data;
  }
  std::vector<std::vector<double>> grad(nodes_.size());
  auto touch = [&](std::size_t id) -> std::vector<double>& {
    if (sink[id]) return *sink[id];
    auto& g = grad[id];
    if (g.empty()) {
      const Node& n = nodes_[id];
      g.assign((n.ref ? *n.ref : n.owned).size(), 0.0);
    }
    return g;
  };
  if (sink[loss.id]) throw ContractError("backward: loss cannot be a parameter leaf");
  touch(loss.id)[0] = 1.0;

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (n.op == Op::param || n.op == Op::constant) continue;
    if (grad[id].empty() || !n.requires_grad) continue;
    const std::vector<double>& g = grad[id];
    const Tensor& y = n.owned;
    auto wants = [&](std::size_t k) { return nodes_[n.in[k]].requires_grad; };

    switch (n.op) {
      case Op::constant:
      case Op::param:
        break;
      case Op::affine: {
        const Tensor& w = value(Var{n.in[0]});
        const Tensor& x = value(Var{n.in[1]});
        const std::size_t m = w.dims[0], k = w.dims[1];
        if (wants(0)) {
          auto& gw = touch(n.in[0]);
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            if (gi == 0.0) continue;
            double* row = gw.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) row[j] += gi * x[j];
          }
        }
        if (wants(1)) {
          auto& gx = touch(n.in[1]);
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            const double* row = w.data.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) gx[j] += row[j] * gi;
          }
        }
        if (wants(2)) {
          auto& gb = touch(n.in[2]);
          for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
        }
        break;
      }
      case Op::activation: {
        const Tensor& x = value(Var{n.in[0]});
        auto& gx = touch(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * activation_slope(n.act, x[i], y[i]);
        break;
      }
      case Op::concat: {
        const std::size_t na = value(Var{n.in[0]}).size();
        if (wants(0)) {
          auto& ga = touch(n.in[0]);
          for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
        }
        if (wants(1)) {
          auto& gb = touch(n.in[1]);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
        }
        break;
      }
      case Op::slice: {
        auto& gx = touch(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[n.offset + i] += g[i];
        break;
      }
      case Op::add: {
        for (int k = 0; k < 2; ++k) {
          if (!wants(k)) continue;
          auto& ga = touch(n.in[k]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        break;
      }
      case Op::mul: {
        const Tensor& a = value(Var{n.in[0]});
        const Tensor& b = value(Var{n.in[1]});
        if (wants(0)) {
          auto& ga = touch(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
        }
        if (wants(1)) {
          auto& gb = touch(n.in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        }
        break;
      }
      case Op::scale: {
        auto& gx = touch(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.factor;
        break;
      }
      case Op::sum: {
        auto& gx = touch(n.in[0]);
        for (auto& v : gx) v += g[0];
        break;
      }
      case Op::mse: {
        const Tensor& p = value(Var{n.in[0]});
        const Tensor& t = value(Var{n.in[1]});
        const double c = 2.0 * g[0] / static_cast<double>(p.size());
        if (wants(0)) {
          auto& gp = touch(n.in[0]);
          for (std::size_t i = 0; i < p.size(); ++i) gp[i] += c * (p[i] - t[i]);
        }
        if (wants(1)) {
          auto& gt = touch(n.in[1]);
          for (std::size_t i = 0; i < p.size(); ++i) gt[i] -= c * (p[i] - t[i]);
        }
        break;
      }
      case Op::kl: {
        const Tensor& m = value(Var{n.in[0]});
        const Tensor& lv = value(Var{n.in[1]});
        if (wants(0)) {
          auto& gm = touch(n.in[0]);
          for (std::size_t i = 0; i < m.size(); ++i) gm[i] += g[0] * m[i];
        }
        if (wants(1)) {
          auto& gl = touch(n.in[1]);
          for (std::size_t i = 0; i < lv.size(); ++i) gl[i] += g[0] * 0.5 * (std::exp(lv[i]) - 1.0);
        }
        break;
      }
    }
  }
}

void accumulate(GradMap& into, const GradMap& from) {
  for (const auto& [name, g] : from) {
    auto [it, fresh] = into.try_emplace(name, g);
    if (fresh) continue;
    if (it->second.dims != g.dims) {
      throw DimensionError("gradient '" + name + "': " + shape_string(it->second.dims) + " vs " +
                           shape_string(g.dims));
    }
    for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
  }
}

void scale(GradMap& grads, double factor) {
  for (auto& [name, g] : grads) {
    for (auto& v : g.data) v *= factor;
  }
}

void adam_step(ParamSet& params, const GradMap& grads, const AdamConfig& cfg, AdamState& state,
               std::size_t t) {
  if (t < 1) throw ContractError("adam_step: step index must be >= 1");
  for (const auto& e : params) {
    if (!e.trainable) continue;
    auto it = grads.find(e.name);
    if (it == grads.end()) throw ContractError("adam_step: missing gradient for '" + e.name + "'");
    if (it->second.dims != e.value.dims) {
      throw DimensionError("adam_step: gradient for '" + e.name + "' has shape " +
                           shape_string(it->second.dims) + ", parameter " +
                           shape_string(e.value.dims));
    }
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& e : params) {
    if (!e.trainable) continue;
    const Tensor& g = grads.at(e.name);
    auto [it, fresh] = state.moments.try_emplace(e.name, Tensor::zeros(e.value.dims),
                                                 Tensor::zeros(e.value.dims));
    auto& m = it->second.first.data;
    auto& v = it->second.second.data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      e.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace lcl
