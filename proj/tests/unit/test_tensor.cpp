#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nff/error.hpp"
#include "nff/tape.hpp"
#include "nff/tensor.hpp"

using namespace nff;
using nff::test::random_tensor;

namespace {

// Triple-loop oracle with explicit d0 broadcasting.
Tensor3 naive_matmul(const Tensor3& a, const Tensor3& b) {
  const Shape sa = a.shape(), sb = b.shape();
  const std::size_t mb = std::max(sa.d0, sb.d0);
  Tensor3 out({mb, sa.d1, sb.d2});
  for (std::size_t m = 0; m < mb; ++m) {
    const std::size_t ma = sa.d0 == 1 ? 0 : m, mbi = sb.d0 == 1 ? 0 : m;
    for (std::size_t i = 0; i < sa.d1; ++i)
      for (std::size_t j = 0; j < sb.d2; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < sa.d2; ++k) s += a(ma, i, k) * b(mbi, k, j);
        out(m, i, j) = s;
      }
  }
  return out;
}

double loss_value(const std::function<Var(Tape&)>& f) {
  Tape t;
  return f(t).value().item();
}

}  // namespace

TEST_CASE("tensor construction and indexing") {
  Tensor3 t({2, 3, 4}, 1.5);
  CHECK(t.size() == 24);
  CHECK(t(1, 2, 3) == 1.5);
  t(1, 2, 3) = -2.0;
  CHECK(t[23] == -2.0);
  CHECK_THROWS_AS(Tensor3({1, 2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(t.reshaped({5, 5, 1}), DimensionError);
  CHECK(t.reshaped({4, 3, 2}).shape() == Shape{4, 3, 2});
  CHECK(Tensor3::scalar(3.0).item() == 3.0);
  CHECK_THROWS(t.item());
}

TEST_CASE("finiteness checks name the context") {
  Tensor3 t({1, 1, 3});
  CHECK(all_finite(t));
  t[1] = NAN;
  CHECK_FALSE(all_finite(t));
  CHECK_THROWS_WITH_AS(assert_finite(t, "probe"), doctest::Contains("probe"), NumericError);
}

TEST_CASE("broadcast_shape") {
  CHECK(broadcast_shape({4, 1, 3}, {1, 5, 3}) == Shape{4, 5, 3});
  CHECK(broadcast_shape({1, 1, 1}, {2, 3, 4}) == Shape{2, 3, 4});
  CHECK_THROWS_AS(broadcast_shape({2, 1, 3}, {3, 1, 3}), DimensionError);
}

TEST_CASE("matmul matches the triple-loop oracle, including d0 broadcast") {
  Rng rng(1);
  for (auto [sa, sb] : {std::pair{Shape{1, 3, 4}, Shape{1, 4, 5}}, std::pair{Shape{3, 2, 4}, Shape{3, 4, 6}},
                        std::pair{Shape{3, 7, 4}, Shape{1, 4, 2}}, std::pair{Shape{1, 7, 4}, Shape{5, 4, 2}}}) {
    const Tensor3 a = random_tensor(sa, rng), b = random_tensor(sb, rng);
    CHECK(max_abs_diff(kernels::matmul(a, b), naive_matmul(a, b)) < 1e-13);
  }
  CHECK_THROWS_AS(kernels::matmul(Tensor3({1, 2, 3}), Tensor3({1, 4, 2})), DimensionError);
  CHECK_THROWS_AS(kernels::matmul(Tensor3({2, 2, 3}), Tensor3({3, 3, 2})), DimensionError);
}

TEST_CASE("reduce_to sums broadcast dimensions") {
  Tensor3 g({2, 3, 4});
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(i);
  const Tensor3 r = kernels::reduce_to(g, {1, 3, 1});
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0;
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t k = 0; k < 4; ++k) s += g(m, j, k);
    CHECK(r(0, j, 0) == s);
  }
}

TEST_CASE("tape gradients match central differences for every op") {
  Rng rng(2);
  Param a("a", random_tensor({2, 3, 4}, rng, 0.2, 1.5));
  Param b("b", random_tensor({1, 3, 4}, rng, 0.2, 1.5));
  Param w("w", random_tensor({1, 4, 2}, rng));
  Param v("v", random_tensor({2, 1, 2}, rng));
  const std::vector<Param*> ps{&a, &b, &w, &v};

  const std::vector<std::pair<const char*, std::function<Var(Tape&)>>> cases{
      {"add", [&](Tape& t) { return sum(add(t.leaf(a), t.leaf(b))); }},
      {"sub", [&](Tape& t) { return sum(square(sub(t.leaf(a), t.leaf(b)))); }},
      {"mul", [&](Tape& t) { return sum(mul(t.leaf(a), t.leaf(b))); }},
      {"exp/log", [&](Tape& t) { return sum(mul(exp(t.leaf(a)), log(t.leaf(b)))); }},
      {"tanh/sigmoid", [&](Tape& t) { return sum(mul(tanh(t.leaf(a)), sigmoid(t.leaf(b)))); }},
      {"neg/scale", [&](Tape& t) { return mean(scale(neg(add_scalar(t.leaf(a), 2.0)), 3.0)); }},
      {"matmul", [&](Tape& t) { return sum(square(matmul_batched(t.leaf(a), t.leaf(w)))); }},
      {"concat", [&](Tape& t) { return sum(square(concat_last(matmul_batched(t.leaf(a), t.leaf(w)), t.leaf(v)))); }},
      {"reshape", [&](Tape& t) { return sum(square(reshape(t.leaf(a), {1, 6, 4}))); }},
      {"mse", [&](Tape& t) { return mse(t.leaf(a), add(t.leaf(b), scale(t.leaf(a), 0.5))); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    CHECK(grad_check(f, ps, 1e-6) < 1e-7);
  }
}

TEST_CASE("clamp_min passes gradient only above the floor") {
  Param p("p", Tensor3({1, 1, 3}, std::vector<double>{-1.0, 0.5, 2.0}));
  Tape t;
  const Var y = sum(clamp_min(t.leaf(p), 0.0));
  const GradientMap g = t.backward(y);
  CHECK(y.value().item() == 2.5);
  CHECK(g.at(&p)[0] == 0.0);
  CHECK(g.at(&p)[1] == 1.0);
  CHECK(g.at(&p)[2] == 1.0);
}

TEST_CASE("backward requires a scalar and accumulates shared uses") {
  Param p("p", Tensor3({1, 1, 2}, std::vector<double>{1.0, 2.0}));
  Tape t;
  const Var x = t.leaf(p);
  CHECK_THROWS_AS(t.backward(x), ContractError);
  const Var y = sum(add(mul(x, x), x));
  const GradientMap g = t.backward(y);
  CHECK(g.at(&p)[0] == doctest::Approx(3.0));
  CHECK(g.at(&p)[1] == doctest::Approx(5.0));
  CHECK(loss_value([&](Tape& tt) { return sum(tt.leaf(p)); }) == 3.0);
}

TEST_CASE("store_gradients zeroes params absent from the map") {
  Param p("p", Tensor3({1, 1, 1}, 1.0)), q("q", Tensor3({1, 1, 1}, 1.0));
  q.grad[0] = 7.0;
  Tape t;
  store_gradients(t.backward(sum(scale(t.leaf(p), 2.0))), {&p, &q});
  CHECK(p.grad[0] == 2.0);
  CHECK(q.grad[0] == 0.0);
}
