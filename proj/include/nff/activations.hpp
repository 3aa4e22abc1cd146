#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nff/tape.hpp"
#include "nff/tensor.hpp"

namespace nff {

enum class ActivationKind { ISLU0, ISLU1a, ISLU1b, ELU, SoftPlus0, SoftPlus1, Tanh, Swish };

enum class BetaParameterization {
  Direct,     // beta = raw
  OnePlusVar  // beta = 1 + raw
};

/// Lower bound applied to every trainable beta.
inline constexpr double kBetaFloor = 1e-3;

/// Activation kind with the ISLU/SoftPlus shape parameters.
///
/// `beta_init` is the *effective* initial beta; the raw trainable value is
/// derived through `beta_parameterization` (so ISLU1b starts at var = 0).
struct ActivationSpec {
  ActivationKind kind = ActivationKind::ISLU0;
  double alpha = 0.5;
  double beta_init = 1.0;
  bool beta_trainable = false;
  BetaParameterization beta_parameterization = BetaParameterization::Direct;

  /// Canonical settings for each kind (ISLU alpha = 0.5, ELU alpha = 1, ...).
  static ActivationSpec of(ActivationKind kind);

  /// Raw parameter value that yields `beta_init`.
  double initial_raw_beta() const;
  void validate() const;
};

/// Names used in configs and CSV output: ISLU0, ISLU1a, ISLU1b, ELU,
/// SOFTPLUS0, SOFTPLUS1, TANH, SWISH.
std::string_view activation_name(ActivationKind kind);
/// Throws ConfigError listing the valid names.
ActivationKind parse_activation(std::string_view name);
const std::vector<std::string>& activation_names();

// Scalar forms.
double islu(double x, double alpha, double beta);
double islu_dx(double x, double alpha, double beta);
/// d islu / d beta.
double islu_dbeta(double x, double alpha, double beta);
double softplus(double x, double beta);
double elu(double x);
double swish(double x);

/// log(alpha + exp(beta x))/beta - log(1 + alpha)/beta, elementwise.
/// Throws ParameterError unless alpha > 0 and beta > 0.
Tensor3 islu(const Tensor3& x, double alpha, double beta);
Tensor3 islu_dx(const Tensor3& x, double alpha, double beta);

/// Applies `spec` to `x` on the tape. `beta_raw` carries the trainable raw
/// beta, shaped (1,1,1) or (x.d0,1,1) for per-task generated values, and must
/// be present exactly when `spec.beta_trainable`.
Var apply(const ActivationSpec& spec, Var x, std::optional<Var> beta_raw = std::nullopt);

}  // namespace nff
