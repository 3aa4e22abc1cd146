#include "nff/activations.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <sstream>

#include "nff/error.hpp"

namespace nff {

namespace {

struct NamedKind {
  ActivationKind kind;
  std::string_view name;
};

constexpr std::array<NamedKind, 8> kKinds{{
    {ActivationKind::ISLU0, "ISLU0"},
    {ActivationKind::ISLU1a, "ISLU1a"},
    {ActivationKind::ISLU1b, "ISLU1b"},
    {ActivationKind::ELU, "ELU"},
    {ActivationKind::SoftPlus0, "SOFTPLUS0"},
    {ActivationKind::SoftPlus1, "SOFTPLUS1"},
    {ActivationKind::Tanh, "TANH"},
    {ActivationKind::Swish, "SWISH"},
}};

// log(alpha + exp(u)) without overflow.
inline double log_alpha_exp(double u, double alpha) {
  return u >= 0 ? u + std::log1p(alpha * std::exp(-u)) : std::log(alpha) + std::log1p(std::exp(u) / alpha);
}

// exp(u) / (alpha + exp(u)).
inline double alpha_sigmoid(double u, double alpha) {
  if (u >= 0) return 1.0 / (1.0 + alpha * std::exp(-u));
  const double e = std::exp(u);
  return e / (alpha + e);
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_shape_params(double alpha, double beta) {
  if (!(alpha > 0) || !(beta > 0)) {
    std::ostringstream os;
    os << "ISLU requires alpha > 0 and beta > 0 (got alpha=" << alpha << ", beta=" << beta << ")";
    throw ParameterError(os.str());
  }
}

bool is_islu(ActivationKind k) {
  return k == ActivationKind::ISLU0 || k == ActivationKind::ISLU1a || k == ActivationKind::ISLU1b;
}

bool is_softplus(ActivationKind k) {
  return k == ActivationKind::SoftPlus0 || k == ActivationKind::SoftPlus1;
}

// f = (log(alpha + e^{beta x}) - shift) / beta along with df/dx and df/dbeta.
struct ShapedEval {
  double f, dx, dbeta;
};

// One exp and one log1p per element; dx = e^u / (alpha + e^u).
inline void shaped_value(double x, double alpha, double beta, double shift, double& f, double& dx) {
  const double u = beta * x;
  if (u >= 0) {
    const double e = std::exp(-u);
    f = (u + std::log1p(alpha * e) - shift) / beta;
    dx = 1.0 / (1.0 + alpha * e);
  } else {
    const double e = std::exp(u);
    f = (std::log(alpha) + std::log1p(e / alpha) - shift) / beta;
    dx = e / (alpha + e);
  }
}

inline ShapedEval shaped_eval(double x, double alpha, double beta, double shift) {
  double f = 0.0, s = 0.0;
  shaped_value(x, alpha, beta, shift, f, s);
  return {f, s, (x * s - f) / beta};
}

// ISLU / SoftPlus with a tape-tracked effective beta of shape (1,1,1) or (d0,1,1).
Var shaped_with_beta(Var x, Var beta, double alpha, double shift) {
  Tape& t = *x.tape;
  const Tensor3& xv = x.value();
  const Tensor3& bv = beta.value();
  const Shape sx = xv.shape();
  const Shape sb = bv.shape();
  if (sb.d1 != 1 || sb.d2 != 1 || (sb.d0 != 1 && sb.d0 != sx.d0)) {
    throw DimensionError("activation beta must be (1,1,1) or (" + std::to_string(sx.d0) +
                         ",1,1), got " + sb.str());
  }
  const std::size_t block = sx.d1 * sx.d2;
  Tensor3 out(sx);
  auto slope = std::make_shared<Tensor3>(sx);
  for (std::size_t m = 0; m < sx.d0; ++m) {
    const double b = bv[sb.d0 == 1 ? 0 : m];
    check_shape_params(alpha, b);
    for (std::size_t i = m * block; i < (m + 1) * block; ++i) shaped_value(xv[i], alpha, b, shift, out[i], (*slope)[i]);
  }
  const std::size_t ix = x.id, ib = beta.id;
  const std::size_t iout = t.size();
  return t.record(std::move(out), {ix, ib}, [ix, ib, iout, block, slope](Tape& tp, const Tensor3& g) {
    const Tensor3& xv = tp.value(ix);
    const Tensor3& bv = tp.value(ib);
    const Tensor3& fv = tp.value(iout);
    const Tensor3& sv = *slope;
    const std::size_t d0 = xv.shape().d0;
    Tensor3 gx(xv.shape());
    Tensor3 gb(bv.shape());
    for (std::size_t m = 0; m < d0; ++m) {
      const std::size_t bm = bv.shape().d0 == 1 ? 0 : m;
      const double b = bv[bm];
      double acc = 0.0;
      for (std::size_t i = m * block; i < (m + 1) * block; ++i) {
        gx[i] = g[i] * sv[i];
        acc += g[i] * (xv[i] * sv[i] - fv[i]);
      }
      gb[bm] += acc / b;
    }
    if (tp.needs_grad(ix)) tp.accumulate(ix, std::move(gx));
    if (tp.needs_grad(ib)) tp.accumulate(ib, std::move(gb));
  });
}

enum class Fixed { Shaped, Elu, Tanh, Swish };

Var fixed_activation(Var x, Fixed which, double alpha, double beta, double shift) {
  Tape& t = *x.tape;
  const Tensor3& xv = x.value();
  Tensor3 out(xv.shape());
  auto slope = std::make_shared<Tensor3>(xv.shape());
  Tensor3& d = *slope;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    switch (which) {
      case Fixed::Shaped: shaped_value(v, alpha, beta, shift, out[i], d[i]); break;
      case Fixed::Elu:
        if (v > 0) {
          out[i] = v;
          d[i] = 1.0;
        } else {
          out[i] = std::expm1(v);
          d[i] = out[i] + 1.0;
        }
        break;
      case Fixed::Tanh: {
        const double th = std::tanh(v);
        out[i] = th;
        d[i] = 1.0 - th * th;
        break;
      }
      case Fixed::Swish: {
        const double s = sigmoid(v);
        out[i] = v * s;
        d[i] = s + v * s * (1.0 - s);
        break;
      }
    }
  }
  const std::size_t ix = x.id;
  return t.record(std::move(out), {ix}, [ix, slope](Tape& tp, const Tensor3& g) {
    const Tensor3& d = *slope;
    Tensor3 gx(d.shape());
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] = g[i] * d[i];
    tp.accumulate(ix, std::move(gx));
  });
}

}  // namespace

ActivationSpec ActivationSpec::of(ActivationKind kind) {
  ActivationSpec s;
  s.kind = kind;
  switch (kind) {
    case ActivationKind::ISLU0:
      s.alpha = 0.5;
      break;
    case ActivationKind::ISLU1a:
      s.alpha = 0.5;
      s.beta_trainable = true;
      s.beta_parameterization = BetaParameterization::Direct;
      break;
    case ActivationKind::ISLU1b:
      s.alpha = 0.5;
      s.beta_trainable = true;
      s.beta_parameterization = BetaParameterization::OnePlusVar;
      break;
    case ActivationKind::ELU:
      s.alpha = 1.0;
      break;
    case ActivationKind::SoftPlus0:
      s.alpha = 1.0;
      break;
    case ActivationKind::SoftPlus1:
      s.alpha = 1.0;
      s.beta_trainable = true;
      s.beta_parameterization = BetaParameterization::OnePlusVar;
      break;
    case ActivationKind::Tanh:
    case ActivationKind::Swish:
      s.alpha = 1.0;
      break;
  }
  return s;
}

double ActivationSpec::initial_raw_beta() const {
  return beta_parameterization == BetaParameterization::OnePlusVar ? beta_init - 1.0 : beta_init;
}

void ActivationSpec::validate() const {
  if (is_islu(kind) || is_softplus(kind)) check_shape_params(alpha, beta_init);
  const bool fixed_kind = kind == ActivationKind::ISLU0 || kind == ActivationKind::SoftPlus0 ||
                          kind == ActivationKind::ELU || kind == ActivationKind::Tanh ||
                          kind == ActivationKind::Swish;
  if (fixed_kind && beta_trainable) {
    throw ParameterError(std::string(activation_name(kind)) + " has no trainable beta");
  }
}

std::string_view activation_name(ActivationKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "UNKNOWN";
}

const std::vector<std::string>& activation_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& k : kKinds) v.emplace_back(k.name);
    return v;
  }();
  return names;
}

ActivationKind parse_activation(std::string_view name) {
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  std::string valid;
  for (const auto& n : activation_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown activation '" + std::string(name) + "'; valid names: " + valid);
}

double islu(double x, double alpha, double beta) {
  check_shape_params(alpha, beta);
  return (log_alpha_exp(beta * x, alpha) - std::log1p(alpha)) / beta;
}

double islu_dx(double x, double alpha, double beta) {
  check_shape_params(alpha, beta);
  return alpha_sigmoid(beta * x, alpha);
}

double islu_dbeta(double x, double alpha, double beta) {
  check_shape_params(alpha, beta);
  return shaped_eval(x, alpha, beta, std::log1p(alpha)).dbeta;
}

double softplus(double x, double beta) {
  check_shape_params(1.0, beta);
  return log_alpha_exp(beta * x, 1.0) / beta;
}

double elu(double x) { return x > 0 ? x : std::expm1(x); }

double swish(double x) { return x * sigmoid(x); }

Tensor3 islu(const Tensor3& x, double alpha, double beta) {
  check_shape_params(alpha, beta);
  Tensor3 out(x.shape());
  const double shift = std::log1p(alpha);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (log_alpha_exp(beta * x[i], alpha) - shift) / beta;
  return out;
}

Tensor3 islu_dx(const Tensor3& x, double alpha, double beta) {
  check_shape_params(alpha, beta);
  Tensor3 out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha_sigmoid(beta * x[i], alpha);
  return out;
}

Var apply(const ActivationSpec& spec, Var x, std::optional<Var> beta_raw) {
  if (spec.beta_trainable != beta_raw.has_value()) {
    throw ContractError(std::string("activation ") + std::string(activation_name(spec.kind)) +
                        (spec.beta_trainable ? " requires" : " does not take") + " a beta parameter");
  }
  const double islu_shift = std::log1p(spec.alpha);
  switch (spec.kind) {
    case ActivationKind::ISLU0:
      check_shape_params(spec.alpha, spec.beta_init);
      return fixed_activation(x, Fixed::Shaped, spec.alpha, spec.beta_init, islu_shift);
    case ActivationKind::SoftPlus0:
      check_shape_params(1.0, spec.beta_init);
      return fixed_activation(x, Fixed::Shaped, 1.0, spec.beta_init, 0.0);
    case ActivationKind::ELU: return fixed_activation(x, Fixed::Elu, 1.0, 1.0, 0.0);
    case ActivationKind::Tanh: return fixed_activation(x, Fixed::Tanh, 1.0, 1.0, 0.0);
    case ActivationKind::Swish: return fixed_activation(x, Fixed::Swish, 1.0, 1.0, 0.0);
    case ActivationKind::ISLU1a:
    case ActivationKind::ISLU1b:
    case ActivationKind::SoftPlus1: {
      Var raw = *beta_raw;
      Var b = spec.beta_parameterization == BetaParameterization::OnePlusVar ? add_scalar(raw, 1.0) : raw;
      b = clamp_min(b, kBetaFloor);
      const bool islu_kind = spec.kind != ActivationKind::SoftPlus1;
      return shaped_with_beta(x, b, islu_kind ? spec.alpha : 1.0, islu_kind ? islu_shift : 0.0);
    }
  }
  throw ContractError("unhandled activation kind");
}

}  // namespace nff
