#include <doctest.h>

#include <cmath>
#include <random>

#include "emi/errors.hpp"
#include "emi/layers.hpp"
#include "support/oracles.hpp"

using namespace emi;

namespace {

Tensor<double> param(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = -2, double hi = 2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return Tensor<double>(std::move(m), true);
}

Matrix<double> rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix<double> m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : values) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  const auto t = Tensor<float>::zeros({3, 4, 5});
  CHECK(t.rank() == 3);
  CHECK(t.rows() == 12);
  CHECK(t.cols() == 5);
  CHECK(t.size() == numel(t.shape()));

  const auto s = Tensor<float>::scalar(2.5f);
  CHECK(s.rank() == 0);
  CHECK(s.item() == 2.5f);

  CHECK_THROWS_AS(Tensor<float>::zeros({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 3}, Matrix<float>::Zero(3, 2)), ShapeError);
}

TEST_CASE("matmul") {
  Tape<double> tape;
  SUBCASE("identity") {
    const Tensor<double> eye(Matrix<double>::Identity(2, 2));
    const Tensor<double> b(rows({{1, 2}, {3, 4}}));
    CHECK(matmul(tape, eye, b).value() == b.value());
  }
  SUBCASE("1x1 hand check") {
    const Tensor<double> a(rows({{1, 2}})), b(rows({{3}, {4}}));
    CHECK(matmul(tape, a, b).item() == 11.0);
  }
  SUBCASE("triple loop oracle") {
    const auto a = param(3, 4, 1), b = param(4, 2, 2);
    CHECK((matmul(tape, a, b).value() - oracle::matmul(a.value(), b.value())).cwiseAbs().maxCoeff() < 1e-12);

    Tape<float> ftape;
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index m = 1 + trial * 6, k = 64 - trial * 5, n = 3 + trial * 4;
      const Tensor<float> fa(Matrix<float>(param(m, k, 10 + trial).value().cast<float>()));
      const Tensor<float> fb(Matrix<float>(param(k, n, 20 + trial).value().cast<float>()));
      const Eigen::MatrixXd ref = oracle::matmul(fa.value().cast<double>(), fb.value().cast<double>());
      CHECK((matmul(ftape, fa, fb).value().cast<double>() - ref).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
  SUBCASE("shape mismatch names both shapes") {
    const auto a = Tensor<double>::zeros({2, 3}), b = Tensor<double>::zeros({2, 3});
    try {
      matmul(tape, a, b);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("[2,3] and [2,3]") != std::string::npos);
    }
  }
  SUBCASE("gradient") {
    const auto a = param(3, 4, 3), b = param(4, 2, 4);
    const auto g = oracle::check_gradients({{"a", a}, {"b", b}}, [&](Tape<double>& t) {
      return sum(t, mul(t, matmul(t, a, b), matmul(t, a, b)));
    });
    CHECK(g.worst < 1e-6);
  }
}

TEST_CASE("layer_norm") {
  Tape<double> tape;
  const LayerNorm<double> ln4(4, 1e-5);
  SUBCASE("constant row maps to zeros") {
    const Tensor<double> x(rows({{5, 5, 5, 5}}));
    CHECK(ln4(tape, x).value().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("unit variance row is unchanged") {
    const LayerNorm<double> ln2(2, 1e-12);
    const Tensor<double> x(rows({{1, -1}}));
    const auto y = ln2(tape, x).value();
    CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(y(0, 1) == doctest::Approx(-1.0).epsilon(1e-10));
  }
  SUBCASE("gradient on a random 4x8 input") {
    const auto x = param(4, 8, 5), gain = param(1, 8, 6), bias = param(1, 8, 7);
    const Tensor<double> g_vec(Shape{8}, gain.value(), true), b_vec(Shape{8}, bias.value(), true);
    const auto w = param(4, 8, 8).value();
    const auto g = oracle::check_gradients({{"x", x}, {"gain", g_vec}, {"bias", b_vec}}, [&](Tape<double>& t) {
      return sum(t, mul(t, layer_norm(t, x, g_vec, b_vec, 1e-5), Tensor<double>(w)));
    });
    CHECK(g.worst < 1e-4);
  }
  SUBCASE("rejects mismatched affine parameters") {
    CHECK_THROWS_AS(ln4(tape, Tensor<double>::zeros({2, 3})), ShapeError);
  }
}

TEST_CASE("gelu") {
  Tape<double> tape;
  const Tensor<double> x(rows({{0, 1, -10}}));
  const auto y = gelu(tape, x).value();
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == doctest::Approx(0.841345).epsilon(1e-6));
  CHECK(std::abs(y(0, 2)) < 1e-8);

  const auto p = param(3, 5, 9);
  CHECK(oracle::check_gradients({{"x", p}}, [&](Tape<double>& t) { return sum(t, gelu(t, p)); }).worst < 1e-4);
}

TEST_CASE("masked_softmax") {
  Tape<double> tape;
  SUBCASE("single unmasked position") {
    const Tensor<double> s(rows({{3, -7, 100}}));
    const auto y = masked_softmax(tape, s, {true, false, false}).value();
    CHECK(y(0, 0) == 1.0);
    CHECK(y(0, 1) == 0.0);
    CHECK(y(0, 2) == 0.0);
  }
  SUBCASE("symmetry") {
    const auto y = masked_softmax(tape, Tensor<double>(rows({{0, 0}})), {true, true}).value();
    CHECK(y(0, 0) == 0.5);
    CHECK(y(0, 1) == 0.5);
  }
  SUBCASE("two-way closed form") {
    const auto y = masked_softmax(tape, Tensor<double>(rows({{1, 2, 3}})), {true, true, false}).value();
    const double e = std::exp(1.0);
    CHECK(y(0, 0) == doctest::Approx(1 / (1 + e)).epsilon(1e-12));
    CHECK(y(0, 1) == doctest::Approx(e / (1 + e)).epsilon(1e-12));
    CHECK(y(0, 2) == 0.0);
  }
  SUBCASE("rank-1 scores") {
    const auto s = Tensor<double>::vector({0.5, 1.5, -1.0});
    const auto y = masked_softmax(tape, s, {true, true, true});
    CHECK(y.shape() == Shape{3});
    CHECK(y.value().sum() == doctest::Approx(1.0));
  }
  SUBCASE("all masked is degenerate") {
    CHECK_THROWS_AS(masked_softmax(tape, Tensor<double>(rows({{1, 2}})), {false, false}), DegenerateMaskError);
  }
  SUBCASE("probability vector restricted to the mask, shift invariant") {
    std::mt19937_64 rng(11);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 200; ++trial) {
      const auto s = param(1, 9, 100 + static_cast<std::uint64_t>(trial), -20, 20);
      Mask mask(9);
      for (std::size_t i = 0; i < 9; ++i) mask[i] = coin(rng);
      mask[static_cast<std::size_t>(trial) % 9] = true;
      const auto y = masked_softmax(tape, s, mask).value();
      CHECK(y.minCoeff() >= 0.0);
      CHECK(std::abs(y.sum() - 1.0) < 1e-6);
      for (std::size_t i = 0; i < 9; ++i) {
        if (!mask[i]) CHECK(y(0, static_cast<Eigen::Index>(i)) == 0.0);
      }
      const Tensor<double> shifted(Matrix<double>(s.value().array() + 37.5));
      CHECK((masked_softmax(tape, shifted, mask).value() - y).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("gradient") {
    const auto s = param(3, 6, 12);
    const auto w = param(3, 6, 13).value();
    const Mask mask{true, false, true, true, false, true};
    const auto g = oracle::check_gradients({{"s", s}}, [&](Tape<double>& t) {
      return sum(t, mul(t, masked_softmax(t, s, mask), Tensor<double>(w)));
    });
    CHECK(g.worst < 1e-4);
  }
}

TEST_CASE("dropout") {
  Tape<float> tape;
  Rng rng = make_stream(1, "dropout-test");
  const Tensor<float> x(Matrix<float>::Random(4, 5));
  CHECK(dropout(tape, x, 0.0, true, rng).same_storage(x));
  const auto eval = dropout(tape, x, 0.45, false, rng);
  CHECK(eval.value() == x.value());
  CHECK_THROWS_AS(dropout(tape, x, 1.0, true, rng), ConfigError);
  CHECK_THROWS_AS(dropout(tape, x, -0.1, true, rng), ConfigError);

  SUBCASE("law of large numbers") {
    const Tensor<float> ones(Matrix<float>::Ones(1000, 1000));
    Tape<float> t(Tape<float>::Mode::inference);
    const auto y = dropout(t, ones, 0.45, true, rng).value();
    const double zero_rate = static_cast<double>((y.array() == 0.0f).count()) / 1e6;
    CHECK(std::abs(zero_rate - 0.45) < 0.005);
    CHECK(std::abs(y.cast<double>().mean() - 1.0) < 0.01);
  }
}

TEST_CASE("concat") {
  Tape<float> tape;
  const auto a = Tensor<float>::zeros({384}), b = Tensor<float>::zeros({384}), c = Tensor<float>::zeros({384});
  CHECK(concat(tape, {a, b, c}).shape() == Shape{1152});
  CHECK(concat(tape, {a, b, c, Tensor<float>::zeros({128})}).shape() == Shape{1280});

  const auto x = Tensor<float>::vector({1, 2, 3});
  const auto single = concat(tape, {x});
  CHECK(single.shape() == x.shape());
  CHECK(single.value() == x.value());

  CHECK_THROWS_AS(concat(tape, {Tensor<float>::zeros({2, 3}), Tensor<float>::zeros({3, 3})}), ShapeError);

  Tape<double> dt;
  const auto p = param(2, 3, 14), q = param(2, 2, 15);
  const auto w = param(2, 5, 16).value();
  const auto g = oracle::check_gradients({{"p", p}, {"q", q}}, [&](Tape<double>& t) {
    return sum(t, mul(t, concat(t, {p, q}), Tensor<double>(w)));
  });
  CHECK(g.worst < 1e-6);
}

TEST_CASE("backward") {
  SUBCASE("linear gradient") {
    Tape<double> tape;
    const Tensor<double> w(rows({{0.5, -1, 2}}), true);
    const Tensor<double> x(rows({{3, 4, 5}}));
    tape.backward(sum(tape, mul(tape, w, x)));
    CHECK(w.grad() == x.value());
  }
  SUBCASE("twice without re-forward is an error") {
    Tape<double> tape;
    const Tensor<double> w(rows({{1, 2}}), true);
    const auto loss = sum(tape, mul(tape, w, w));
    tape.backward(loss);
    CHECK(tape.empty());
    CHECK_THROWS_AS(tape.backward(loss), ContractError);
  }
  SUBCASE("non-scalar loss is an error") {
    Tape<double> tape;
    const Tensor<double> w(rows({{1, 2}}), true);
    CHECK_THROWS_AS(tape.backward(mul(tape, w, w)), ContractError);
  }
  SUBCASE("gradients reach every parameter of a composite encoder") {
    Tape<double> tape;
    Linear<double> fc1(6, 5), fc2(5, 2);
    LayerNorm<double> norm(6, 1e-5);
    ParameterList<double> params;
    norm.collect("norm", ParamGroup::head, params);
    fc1.collect("fc1", ParamGroup::head, params);
    fc2.collect("fc2", ParamGroup::head, params);
    init_parameters(params, 3);
    const auto x = param(4, 6, 17);
    auto loss = [&](Tape<double>& t) { return sum(t, fc2(t, gelu(t, fc1(t, norm(t, x))))); };
    tape.backward(loss(tape));
    for (const auto& p : params) {
      CHECK(p.tensor.has_grad());
      CHECK(p.tensor.grad().rows() == p.tensor.rows());
      CHECK(p.tensor.grad().cols() == p.tensor.cols());
    }
    std::vector<std::pair<std::string, Tensor<double>>> named;
    for (const auto& p : params) named.emplace_back(p.name, p.tensor);
    CHECK(oracle::check_gradients(named, loss).worst < 1e-4);
  }
  SUBCASE("inference tape records nothing") {
    Tape<double> tape(Tape<double>::Mode::inference);
    const Tensor<double> w(rows({{1, 2}}), true);
    const auto y = sum(tape, mul(tape, w, w));
    CHECK(tape.empty());
    CHECK_FALSE(y.requires_grad());
  }
}

TEST_CASE("forward ops keep finite inputs finite") {
  Tape<float> tape;
  Rng rng = make_stream(2, "finite");
  const Tensor<float> x(Matrix<float>(Matrix<float>::Random(6, 8) * 50.0f));
  const LayerNorm<float> ln(8, 1e-5);
  Linear<float> lin(8, 4);
  ParameterList<float> params;
  lin.collect("lin", ParamGroup::head, params);
  init_parameters(params, 1);
  const auto y = dropout(tape, gelu(tape, lin(tape, ln(tape, x))), 0.45, true, rng);
  CHECK(y.value().allFinite());
  CHECK(masked_softmax(tape, x, Mask(8, true)).value().allFinite());
}
