#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nff/activations.hpp"
#include "nff/error.hpp"

using namespace nff;
using nff::test::random_tensor;

TEST_CASE("islu closed form and identities") {
  // log(alpha + e^{beta x}) / beta - log(1 + alpha) / beta, evaluated naively.
  for (double alpha : {0.1, 0.5, 2.0}) {
    for (double beta : {0.3, 1.0, 4.0}) {
      for (double x : {-3.0, -0.4, 0.0, 0.7, 2.5}) {
        const double ref = (std::log(alpha + std::exp(beta * x)) - std::log(1.0 + alpha)) / beta;
        CHECK(islu(x, alpha, beta) == doctest::Approx(ref).epsilon(1e-13));
      }
      CHECK(std::abs(islu(0.0, alpha, beta)) <= 1e-15);
    }
  }
  // alpha = 1 is softplus shifted down by log 2 / beta.
  for (double x : {-5.0, 0.0, 3.0}) CHECK(islu(x, 1.0, 2.0) - softplus(x, 2.0) == doctest::Approx(-std::log(2.0) / 2.0));
}

TEST_CASE("islu asymptotes stay finite for large |beta x|") {
  CHECK(islu(800.0, 0.5, 1.0) == doctest::Approx(800.0 - std::log(1.5)));
  CHECK(islu(-800.0, 0.5, 1.0) == doctest::Approx(std::log(0.5) - std::log(1.5)));
  CHECK(std::isfinite(islu_dx(-800.0, 0.5, 1.0)));
  CHECK(islu_dx(800.0, 0.5, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("islu derivatives match central differences") {
  const double h = 1e-6;
  for (double alpha : {0.2, 0.5, 3.0}) {
    for (double beta : {0.5, 1.0, 2.5}) {
      for (double x : {-2.0, -0.1, 0.0, 0.8, 3.0}) {
        const double fx = (islu(x + h, alpha, beta) - islu(x - h, alpha, beta)) / (2 * h);
        const double fb = (islu(x, alpha, beta + h) - islu(x, alpha, beta - h)) / (2 * h);
        CHECK(islu_dx(x, alpha, beta) == doctest::Approx(fx).epsilon(1e-7));
        CHECK(islu_dbeta(x, alpha, beta) == doctest::Approx(fb).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("islu rejects invalid shape parameters") {
  CHECK_THROWS_AS(islu(1.0, 0.0, 1.0), ParameterError);
  CHECK_THROWS_AS(islu(1.0, 0.5, -1.0), ParameterError);
  CHECK_THROWS_AS(islu(1.0, NAN, 1.0), ParameterError);
}

TEST_CASE("elu and swish") {
  CHECK(elu(2.0) == 2.0);
  CHECK(elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(swish(0.0) == 0.0);
  CHECK(swish(2.0) == doctest::Approx(2.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("activation names round-trip and unknown names list the valid ones") {
  for (const auto& n : activation_names()) CHECK(activation_name(parse_activation(n)) == n);
  CHECK_THROWS_WITH_AS(parse_activation("RELU"), doctest::Contains("ISLU1b"), ConfigError);
}

TEST_CASE("canonical activation specs") {
  CHECK_FALSE(ActivationSpec::of(ActivationKind::ISLU0).beta_trainable);
  const auto a = ActivationSpec::of(ActivationKind::ISLU1a);
  const auto b = ActivationSpec::of(ActivationKind::ISLU1b);
  CHECK(a.beta_trainable);
  CHECK(b.beta_trainable);
  CHECK(a.initial_raw_beta() == 1.0);
  CHECK(b.initial_raw_beta() == 0.0);
  ActivationSpec bad = ActivationSpec::of(ActivationKind::ELU);
  bad.beta_trainable = true;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("tape activations: values and gradients") {
  Rng rng(3);
  Param x("x", random_tensor({2, 3, 4}, rng, -3.0, 3.0));
  for (ActivationKind k : {ActivationKind::ISLU0, ActivationKind::ELU, ActivationKind::SoftPlus0, ActivationKind::Tanh,
                           ActivationKind::Swish}) {
    const ActivationSpec spec = ActivationSpec::of(k);
    CAPTURE(activation_name(k));
    CHECK(grad_check([&](Tape& t) { return sum(square(apply(spec, t.leaf(x)))); }, {&x}, 1e-6) < 1e-7);
  }
  for (ActivationKind k : {ActivationKind::ISLU1a, ActivationKind::ISLU1b, ActivationKind::SoftPlus1}) {
    const ActivationSpec spec = ActivationSpec::of(k);
    CAPTURE(activation_name(k));
    Param shared("beta", Tensor3({1, 1, 1}, spec.initial_raw_beta() + 0.3));
    Param per_task("beta_t", Tensor3({2, 1, 1}, std::vector<double>{spec.initial_raw_beta() + 0.2,
                                                                   spec.initial_raw_beta() + 0.6}));
    CHECK(grad_check([&](Tape& t) { return sum(square(apply(spec, t.leaf(x), t.leaf(shared)))); }, {&x, &shared},
                     1e-6) < 1e-7);
    CHECK(grad_check([&](Tape& t) { return sum(square(apply(spec, t.leaf(x), t.leaf(per_task)))); },
                     {&x, &per_task}, 1e-6) < 1e-7);
  }
  // ISLU1b evaluates at beta = 1 + raw.
  Tape t;
  const ActivationSpec b = ActivationSpec::of(ActivationKind::ISLU1b);
  const Var out = apply(b, t.constant(Tensor3::scalar(0.7)), t.constant(Tensor3::scalar(0.5)));
  CHECK(out.value().item() == doctest::Approx(islu(0.7, b.alpha, 1.5)));
}

TEST_CASE("trainable beta is clamped at the floor") {
  const ActivationSpec spec = ActivationSpec::of(ActivationKind::ISLU1a);
  Tape t;
  const Var out = apply(spec, t.constant(Tensor3::scalar(0.7)), t.constant(Tensor3::scalar(-4.0)));
  CHECK(out.value().item() == doctest::Approx(islu(0.7, spec.alpha, kBetaFloor)));
}

TEST_CASE("beta presence must match the spec") {
  Tape t;
  const Var x = t.constant(Tensor3::scalar(1.0));
  CHECK_THROWS(apply(ActivationSpec::of(ActivationKind::ISLU1b), x));
  CHECK_THROWS(apply(ActivationSpec::of(ActivationKind::ISLU0), x, t.constant(Tensor3::scalar(1.0))));
}
