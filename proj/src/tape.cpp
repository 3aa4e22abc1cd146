#include "nff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "nff/error.hpp"

namespace nff {

const Tensor3& Var::value() const {
  if (tape == nullptr) throw ContractError("Var is not bound to a tape");
  return tape->value(id);
}

Var Tape::constant(Tensor3 value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(const Param& p) {
  Node n;
  n.ref = &p.value;
  n.param = &p;
  n.needs_grad = p.trainable;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor3 value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  n.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                             [this](std::size_t i) { return nodes_[i].needs_grad; });
  if (n.needs_grad) n.backward = std::move(backward);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor3& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.ref != nullptr ? *n.ref : n.owned;
}

void Tape::accumulate(std::size_t id, Tensor3&& g) {
  if (!nodes_[id].needs_grad) return;
  Tensor3& acc = grads_[id];
  if (acc.empty()) {
    acc = std::move(g);
    return;
  }
  accumulate(id, static_cast<const Tensor3&>(g));
}

void Tape::accumulate(std::size_t id, const Tensor3& g) {
  if (!nodes_[id].needs_grad) return;
  Tensor3& acc = grads_[id];
  if (acc.empty()) {
    acc = g;
    return;
  }
  if (acc.shape() != g.shape()) {
    throw DimensionError("gradient shape " + g.shape().str() + " does not match node shape " +
                         acc.shape().str());
  }
  auto a = acc.data();
  auto b = g.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Tensor3 Tape::grad(Var v) const {
  if (v.id < grads_.size() && !grads_[v.id].empty()) return grads_[v.id];
  return Tensor3(value(v.id).shape());
}

GradientMap Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to a different tape");
  if (value(loss.id).shape() != Shape{1, 1, 1}) {
    throw ContractError("backward: loss must be scalar-shaped (1,1,1), got " +
                        value(loss.id).shape().str());
  }
  grads_.assign(nodes_.size(), Tensor3{});
  GradientMap out;
  if (!nodes_[loss.id].needs_grad) return out;
  grads_[loss.id] = Tensor3::scalar(1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (grads_[id].empty()) continue;
    if (n.backward) n.backward(*this, grads_[id]);
    if (n.param != nullptr) {
      auto [it, inserted] = out.try_emplace(n.param, grads_[id]);
      if (!inserted) {
        auto a = it->second.data();
        auto b = grads_[id].data();
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      }
    }
  }
  return out;
}

GradientMap backward(Tape& tape, Var loss) { return tape.backward(loss); }

void store_gradients(const GradientMap& grads, const std::vector<Param*>& params) {
  for (Param* p : params) {
    auto it = grads.find(p);
    if (it != grads.end()) {
      p->grad = it->second;
    } else {
      p->zero_grad();
    }
  }
}

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ContractError("Var is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw ContractError("operands live on different tapes");
  }
  return *a.tape;
}

// Calls f(out_flat, a_flat, b_flat) over the broadcast of sa and sb.
template <class F>
void for_each_broadcast(const Shape& so, const Shape& sa, const Shape& sb, F&& f) {
  const std::size_t a0 = sa.d0 == 1 ? 0 : sa.d1 * sa.d2;
  const std::size_t a1 = sa.d1 == 1 ? 0 : sa.d2;
  const std::size_t a2 = sa.d2 == 1 ? 0 : 1;
  const std::size_t b0 = sb.d0 == 1 ? 0 : sb.d1 * sb.d2;
  const std::size_t b1 = sb.d1 == 1 ? 0 : sb.d2;
  const std::size_t b2 = sb.d2 == 1 ? 0 : 1;
  std::size_t o = 0;
  for (std::size_t i = 0; i < so.d0; ++i) {
    for (std::size_t j = 0; j < so.d1; ++j) {
      const std::size_t abase = i * a0 + j * a1;
      const std::size_t bbase = i * b0 + j * b1;
      for (std::size_t k = 0; k < so.d2; ++k, ++o) f(o, abase + k * a2, bbase + k * b2);
    }
  }
}

}  // namespace

Var elementwise(UnaryOp op, Var a) {
  Tape& t = tape_of(a);
  const Tensor3& av = a.value();
  Tensor3 out(av.shape());
  auto x = av.data();
  auto y = out.data();
  switch (op) {
    case UnaryOp::Neg:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = -x[i];
      break;
    case UnaryOp::Exp:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
      break;
    case UnaryOp::Log:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::log(x[i]);
      break;
    case UnaryOp::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      break;
    case UnaryOp::Sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      }
      break;
    case UnaryOp::Square:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i];
      break;
  }
  const std::size_t ia = a.id;
  const std::size_t self = t.size();
  return t.record(std::move(out), {ia}, [op, ia, self](Tape& tp, const Tensor3& g) {
    const auto x = tp.value(ia).data();
    const auto y = tp.value(self).data();
    Tensor3 ga(tp.value(ia).shape());
    auto d = ga.data();
    auto gd = g.data();
    switch (op) {
      case UnaryOp::Neg:
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = -gd[i];
        break;
      case UnaryOp::Exp:
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = gd[i] * y[i];
        break;
      case UnaryOp::Log:
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = gd[i] / x[i];
        break;
      case UnaryOp::Tanh:
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = gd[i] * (1.0 - y[i] * y[i]);
        break;
      case UnaryOp::Sigmoid:
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = gd[i] * y[i] * (1.0 - y[i]);
        break;
      case UnaryOp::Square:
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = gd[i] * 2.0 * x[i];
        break;
    }
    tp.accumulate(ia, std::move(ga));
  });
}

Var elementwise(BinaryOp op, Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor3& av = a.value();
  const Tensor3& bv = b.value();
  const Shape so = broadcast_shape(av.shape(), bv.shape());
  Tensor3 out(so);
  {
    auto x = av.data();
    auto y = bv.data();
    auto o = out.data();
    switch (op) {
      case BinaryOp::Add:
        for_each_broadcast(so, av.shape(), bv.shape(),
                           [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] + y[ib]; });
        break;
      case BinaryOp::Sub:
        for_each_broadcast(so, av.shape(), bv.shape(),
                           [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] - y[ib]; });
        break;
      case BinaryOp::Mul:
        for_each_broadcast(so, av.shape(), bv.shape(),
                           [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] * y[ib]; });
        break;
    }
  }
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [op, ia, ib, so](Tape& tp, const Tensor3& g) {
    const Tensor3& av = tp.value(ia);
    const Tensor3& bv = tp.value(ib);
    auto gd = g.data();
    if (tp.needs_grad(ia)) {
      Tensor3 ga(av.shape());
      auto d = ga.data();
      auto y = bv.data();
      for_each_broadcast(so, av.shape(), bv.shape(),
                         [&](std::size_t i, std::size_t xa, std::size_t xb) {
                           d[xa] += op == BinaryOp::Mul ? gd[i] * y[xb] : gd[i];
                         });
      tp.accumulate(ia, std::move(ga));
    }
    if (tp.needs_grad(ib)) {
      Tensor3 gb(bv.shape());
      auto d = gb.data();
      auto x = av.data();
      for_each_broadcast(so, av.shape(), bv.shape(),
                         [&](std::size_t i, std::size_t xa, std::size_t xb) {
                           d[xb] += op == BinaryOp::Mul   ? gd[i] * x[xa]
                                    : op == BinaryOp::Sub ? -gd[i]
                                                          : gd[i];
                         });
      tp.accumulate(ib, std::move(gb));
    }
  });
}

Var add_scalar(Var a, double c) {
  Tape& t = tape_of(a);
  Tensor3 out = a.value();
  for (double& v : out.data()) v += c;
  const std::size_t ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, const Tensor3& g) { tp.accumulate(ia, g); });
}

Var scale(Var a, double c) {
  Tape& t = tape_of(a);
  Tensor3 out = a.value();
  for (double& v : out.data()) v *= c;
  const std::size_t ia = a.id;
  return t.record(std::move(out), {ia}, [ia, c](Tape& tp, const Tensor3& g) {
    Tensor3 ga = g;
    for (double& v : ga.data()) v *= c;
    tp.accumulate(ia, std::move(ga));
  });
}

Var clamp_min(Var a, double floor) {
  Tape& t = tape_of(a);
  Tensor3 out = a.value();
  for (double& v : out.data()) v = std::max(v, floor);
  const std::size_t ia = a.id;
  return t.record(std::move(out), {ia}, [ia, floor](Tape& tp, const Tensor3& g) {
    const auto x = tp.value(ia).data();
    Tensor3 ga = g;
    auto d = ga.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (x[i] < floor) d[i] = 0.0;
    }
    tp.accumulate(ia, std::move(ga));
  });
}

Var matmul_batched(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Tensor3 out = kernels::matmul(a.value(), b.value());
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Tensor3& g) {
    const Tensor3& av = tp.value(ia);
    const Tensor3& bv = tp.value(ib);
    if (tp.needs_grad(ia)) tp.accumulate(ia, kernels::matmul_grad_a(g, bv, av.shape()));
    if (tp.needs_grad(ib)) tp.accumulate(ib, kernels::matmul_grad_b(av, g, bv.shape()));
  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  Tensor3 out = a.value().reshaped(shape);
  const std::size_t ia = a.id;
  const Shape original = a.value().shape();
  return t.record(std::move(out), {ia}, [ia, original](Tape& tp, const Tensor3& g) {
    tp.accumulate(ia, g.reshaped(original));
  });
}

Var concat_last(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Shape sa = a.value().shape();
  const Shape sb = b.value().shape();
  if ((sb.d0 != sa.d0 && sb.d0 != 1) || (sb.d1 != sa.d1 && sb.d1 != 1)) {
    throw DimensionError("concat_last: cannot broadcast " + sb.str() + " against " + sa.str());
  }
  const std::size_t wa = sa.d2, wb = sb.d2, w = wa + wb;
  Tensor3 out({sa.d0, sa.d1, w});
  const Tensor3& av = a.value();
  const Tensor3& bv = b.value();
  for (std::size_t i = 0; i < sa.d0; ++i) {
    const std::size_t bi = sb.d0 == 1 ? 0 : i;
    for (std::size_t j = 0; j < sa.d1; ++j) {
      const std::size_t bj = sb.d1 == 1 ? 0 : j;
      for (std::size_t k = 0; k < wa; ++k) out(i, j, k) = av(i, j, k);
      for (std::size_t k = 0; k < wb; ++k) out(i, j, wa + k) = bv(bi, bj, k);
    }
  }
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib, sa, sb](Tape& tp, const Tensor3& g) {
    const std::size_t wa = sa.d2, wb = sb.d2;
    Tensor3 ga(sa), gb(sb);
    for (std::size_t i = 0; i < sa.d0; ++i) {
      const std::size_t bi = sb.d0 == 1 ? 0 : i;
      for (std::size_t j = 0; j < sa.d1; ++j) {
        const std::size_t bj = sb.d1 == 1 ? 0 : j;
        for (std::size_t k = 0; k < wa; ++k) ga(i, j, k) = g(i, j, k);
        for (std::size_t k = 0; k < wb; ++k) gb(bi, bj, k) += g(i, j, wa + k);
      }
    }
    if (tp.needs_grad(ia)) tp.accumulate(ia, std::move(ga));
    if (tp.needs_grad(ib)) tp.accumulate(ib, std::move(gb));
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id;
  const Shape sa = a.value().shape();
  return t.record(Tensor3::scalar(s), {ia}, [ia, sa](Tape& tp, const Tensor3& g) {
    tp.accumulate(ia, Tensor3(sa, g.item()));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var mse(Var prediction, Var target) {
  if (prediction.value().shape() != target.value().shape()) {
    throw DimensionError("mse: prediction " + prediction.value().shape().str() + " vs target " +
                         target.value().shape().str());
  }
  Tape& t = tape_of(prediction, target);
  const Tensor3& p = prediction.value();
  const Tensor3& y = target.value();
  const auto n = static_cast<double>(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - y[i];
    s += d * d;
  }
  const std::size_t ip = prediction.id, iy = target.id;
  return t.record(Tensor3::scalar(s / n), {ip, iy}, [ip, iy, n](Tape& tp, const Tensor3& g) {
    const Tensor3& p = tp.value(ip);
    const Tensor3& y = tp.value(iy);
    const double c = 2.0 * g.item() / n;
    Tensor3 gp(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) gp[i] = c * (p[i] - y[i]);
    if (tp.needs_grad(iy)) {
      Tensor3 gy = gp;
      for (double& v : gy.data()) v = -v;
      tp.accumulate(iy, std::move(gy));
    }
    if (tp.needs_grad(ip)) tp.accumulate(ip, std::move(gp));
  });
}

double grad_check(const std::function<Var(Tape&)>& loss, const std::vector<Param*>& params,
                  double h) {
  if (!(h > 0)) throw ContractError("grad_check: step h must be positive");
  GradientMap ad;
  {
    Tape tape;
    Var l = loss(tape);
    ad = tape.backward(l);
  }
  auto eval = [&]() {
    Tape tape;
    return loss(tape).value().item();
  };
  double worst = 0.0;
  for (Param* p : params) {
    if (!p->trainable) continue;
    const auto it = ad.find(p);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double up = eval();
      p->value[i] = orig - h;
      const double down = eval();
      p->value[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double g = it == ad.end() ? 0.0 : it->second[i];
      const double err = std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace nff
