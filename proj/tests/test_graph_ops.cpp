#include <doctest.h>

#include "dbcc/graph.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dbcc;
using gradcheck::random_tensor;

namespace {

TensorD tensor3(std::initializer_list<double> v, Shape s) {
  TensorD t(s);
  int i = 0;
  for (double x : v) t[i++] = x;
  return t;
}

}  // namespace

TEST_CASE("pointwise_conv single position dot product") {
  GraphD g;
  TensorD x = tensor3({2.0, -3.0}, Shape{1, 1, 2});
  TensorD w(Shape{1, 1, 2, 1});
  w[0] = 0.5;
  w[1] = 4.0;
  auto out = g.pointwise_conv(g.input(w), -1, g.input(x), 1);
  CHECK(g.value(out)[0] == doctest::Approx(2.0 * 0.5 + (-3.0) * 4.0));
}

TEST_CASE("pointwise_conv identity filter bank") {
  Rng rng(5);
  TensorD x = random_tensor(Shape{4, 4, 3}, rng);
  TensorD w = TensorD::zeros(Shape{1, 1, 3, 3});
  for (int c = 0; c < 3; ++c) w.at4(0, 0, c, c) = 1.0;
  GraphD g;
  auto out = g.pointwise_conv(g.input(w), -1, g.input(x), 1);
  CHECK(g.value(out) == x);
}

TEST_CASE("pointwise_conv matches oracle with stride 2 and bias") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + rng.next_int(7), l = 2 + rng.next_int(7);
    const int m = 1 + rng.next_int(5), f = 1 + rng.next_int(5);
    const int stride = 1 + rng.next_int(2);
    TensorD x = random_tensor(Shape{k, l, m}, rng);
    TensorD w = random_tensor(Shape{1, 1, m, f}, rng);
    TensorD b = random_tensor(Shape{f}, rng);
    GraphD g;
    auto out = g.pointwise_conv(g.input(w), g.input(b), g.input(x), stride);
    TensorD ref = oracle::pointwise_conv(w, &b, x, stride);
    REQUIRE(g.value(out).shape() == ref.shape());
    for (long long i = 0; i < ref.size(); ++i)
      CHECK(g.value(out)[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("pointwise_conv linearity") {
  Rng rng(13);
  TensorD x = random_tensor(Shape{6, 6, 3}, rng);
  TensorD y = random_tensor(Shape{6, 6, 3}, rng);
  TensorD w = random_tensor(Shape{1, 1, 3, 4}, rng);
  const double a = 1.7, b = -0.6;
  TensorD mix(x.shape());
  for (long long i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
  GraphD g;
  auto wl = g.input(w);
  auto conv_mix = g.value(g.pointwise_conv(wl, -1, g.input(mix), 2));
  auto conv_x = g.value(g.pointwise_conv(wl, -1, g.input(x), 2));
  auto conv_y = g.value(g.pointwise_conv(wl, -1, g.input(y), 2));
  for (long long i = 0; i < conv_mix.size(); ++i)
    CHECK(conv_mix[i] == doctest::Approx(a * conv_x[i] + b * conv_y[i]).epsilon(1e-10));
}

TEST_CASE("pointwise_conv validation") {
  GraphD g;
  auto x = g.input(TensorD::ones(Shape{2, 2, 3}));
  auto w = g.input(TensorD::ones(Shape{1, 1, 4, 2}));
  CHECK_THROWS_AS(g.pointwise_conv(w, -1, x, 1), ShapeError);  // channel mismatch
  auto w2 = g.input(TensorD::ones(Shape{1, 1, 3, 2}));
  CHECK_THROWS_AS(g.pointwise_conv(w2, -1, x, 0), ShapeError);  // stride 0
}

TEST_CASE("depthwise_conv 1x1 identity") {
  Rng rng(17);
  TensorD x = random_tensor(Shape{5, 4, 3}, rng);
  TensorD w = TensorD::ones(Shape{1, 1, 3, 1});
  GraphD g;
  auto out = g.depthwise_conv(g.input(w), g.input(x));
  CHECK(g.value(out) == x);
}

TEST_CASE("depthwise_conv 3x3 box filter interior") {
  TensorD x = TensorD::ones(Shape{5, 5, 1});
  TensorD w = TensorD::ones(Shape{3, 3, 1, 1});
  GraphD g;
  auto out = g.depthwise_conv(g.input(w), g.input(x));
  CHECK(g.value(out).at(2, 2, 0) == doctest::Approx(9.0));
  CHECK(g.value(out).at(0, 0, 0) == doctest::Approx(4.0));  // zero padding at the corner
}

TEST_CASE("depthwise_conv matches oracle and isolates channels") {
  Rng rng(19);
  TensorD x = random_tensor(Shape{5, 5, 2}, rng);
  TensorD w = random_tensor(Shape{3, 3, 2, 2}, rng);
  GraphD g;
  auto out = g.value(g.depthwise_conv(g.input(w), g.input(x)));
  TensorD ref = oracle::depthwise_conv(w, x);
  REQUIRE(out.shape() == ref.shape());
  for (long long i = 0; i < ref.size(); ++i)
    CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  // zeroing input channel 0 zeroes exactly output channels [0, m)
  TensorD x0 = x;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) x0.at(i, j, 0) = 0.0;
  GraphD g2;
  auto out0 = g2.value(g2.depthwise_conv(g2.input(w), g2.input(x0)));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      CHECK(out0.at(i, j, 0) == 0.0);
      CHECK(out0.at(i, j, 1) == 0.0);
      CHECK(out0.at(i, j, 2) == out.at(i, j, 2));  // channel 1 outputs untouched
      CHECK(out0.at(i, j, 3) == out.at(i, j, 3));
    }
}

TEST_CASE("avg_pool basics") {
  TensorD c = TensorD::full(Shape{4, 4, 2}, 3.25);
  GraphD g;
  CHECK(g.value(g.avg_pool2(g.input(c))) == TensorD::full(Shape{2, 2, 2}, 3.25));

  TensorD q = tensor3({1, 2, 3, 4}, Shape{2, 2, 1});
  GraphD g2;
  CHECK(g2.value(g2.avg_pool2(g2.input(q)))[0] == doctest::Approx(2.5));

  Rng rng(23);
  TensorD x = random_tensor(Shape{6, 8, 3}, rng);
  GraphD g3;
  auto pooled = g3.value(g3.avg_pool2(g3.input(x)));
  CHECK(sum(pooled) * 4.0 == doctest::Approx(sum(x)).epsilon(1e-12));

  GraphD g4;
  CHECK_THROWS_AS(g4.avg_pool2(g4.input(TensorD::ones(Shape{3, 4, 1}))), ShapeError);
}

TEST_CASE("spatial_sum") {
  GraphD g;
  CHECK(g.value(g.spatial_sum(g.input(TensorD::ones(Shape{4, 4, 2})))) ==
        TensorD::full(Shape{1, 1, 2}, 16.0));
  CHECK(g.value(g.spatial_sum(g.input(TensorD::zeros(Shape{3, 2, 4})))) ==
        TensorD::zeros(Shape{1, 1, 4}));

  Rng rng(29);
  TensorD x = random_tensor(Shape{7, 5, 6}, rng);
  TensorD ref = oracle::spatial_sum(x);
  auto got = g.value(g.spatial_sum(g.input(x)));
  for (int c = 0; c < 6; ++c) CHECK(got[c] == doctest::Approx(ref[c]).epsilon(1e-12));
}

TEST_CASE("group_depth_sum partition") {
  GraphD g;
  TensorD abc = tensor3({1.5, -2.0, 7.0}, Shape{1, 1, 3});
  CHECK(g.value(g.group_depth_sum(g.input(abc))) == abc);  // groups of one

  CHECK(g.value(g.group_depth_sum(g.input(TensorD::ones(Shape{1, 1, 6})))) ==
        TensorD::full(Shape{1, 1, 3}, 2.0));

  // K=128 -> group sizes (43,43,42), larger groups first
  auto bounds = depth_group_bounds(128);
  CHECK(bounds[1] - bounds[0] == 43);
  CHECK(bounds[2] - bounds[1] == 43);
  CHECK(bounds[3] - bounds[2] == 42);
  TensorD probe = TensorD::zeros(Shape{1, 1, 128});
  probe[42] = 1.0;   // last channel of group 0
  probe[43] = 1.0;   // first channel of group 1
  probe[86] = 1.0;   // first channel of group 2
  auto got = g.value(g.group_depth_sum(g.input(probe)));
  CHECK(got[0] == 1.0);
  CHECK(got[1] == 1.0);
  CHECK(got[2] == 1.0);

  CHECK_THROWS_AS(g.group_depth_sum(g.input(TensorD::ones(Shape{1, 1, 2}))), ShapeError);
}

TEST_CASE("conservation: spatial then depth reduction preserves the total") {
  Rng rng(37);
  TensorD x = random_tensor(Shape{8, 8, 10}, rng);
  GraphD g;
  auto reduced = g.value(g.group_depth_sum(g.spatial_sum(g.input(x))));
  CHECK(reduced[0] + reduced[1] + reduced[2] == doctest::Approx(sum(x)).epsilon(1e-12));
}

TEST_CASE("l2_normalize") {
  GraphD g;
  TensorD e1 = tensor3({1, 0, 0}, Shape{1, 1, 3});
  CHECK(g.value(g.l2_normalize(g.input(e1))) == e1);

  TensorD two = TensorD::full(Shape{1, 1, 3}, 2.0);
  auto sym = g.value(g.l2_normalize(g.input(two)));
  for (int i = 0; i < 3; ++i) CHECK(sym[i] == doctest::Approx(0.5773502691896258));

  TensorD pyth = tensor3({3, 4, 0}, Shape{1, 1, 3});
  auto got = g.value(g.l2_normalize(g.input(pyth)));
  CHECK(got[0] == doctest::Approx(0.6));
  CHECK(got[1] == doctest::Approx(0.8));
  CHECK(got[2] == doctest::Approx(0.0));

  CHECK_THROWS_AS(g.l2_normalize(g.input(TensorD::zeros(Shape{1, 1, 3}))), DegenerateEstimate);
}

TEST_CASE("l2_normalize is idempotent and unit-norm") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    TensorD v = random_tensor(Shape{1, 1, 3}, rng, -5.0, 5.0);
    if (std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) < 1e-6) continue;
    GraphD g;
    auto y = g.value(g.l2_normalize(g.input(v)));
    const double n = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
    CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
    GraphD g2;
    auto yy = g2.value(g2.l2_normalize(g2.input(y)));
    for (int i = 0; i < 3; ++i) CHECK(yy[i] == doctest::Approx(y[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward basics") {
  // loss = sum(x) -> gradient all ones
  GraphD g;
  Rng rng(43);
  auto x = g.param(random_tensor(Shape{3, 2, 2}, rng), "x");
  auto loss = g.sum_all(x);
  g.backward(loss);
  CHECK(g.grad(x) == TensorD::ones(Shape{3, 2, 2}));

  // loss = sum(relu(x)) at x = [-1, 2] -> gradient [0, 1]
  GraphD g2;
  TensorD v(Shape{2});
  v[0] = -1.0;
  v[1] = 2.0;
  auto xv = g2.param(v, "x");
  g2.backward(g2.sum_all(g2.relu(xv)));
  CHECK(g2.grad(xv)[0] == 0.0);
  CHECK(g2.grad(xv)[1] == 1.0);

  // relu subgradient at exactly zero is zero
  GraphD g3;
  auto xz = g3.param(TensorD::zeros(Shape{1}), "x");
  g3.backward(g3.sum_all(g3.relu(xz)));
  CHECK(g3.grad(xz)[0] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss and parameter-free graphs") {
  GraphD g;
  auto x = g.param(TensorD::ones(Shape{2}), "x");
  CHECK_THROWS_AS(g.backward(g.relu(x)), Error);

  GraphD g2;
  auto c = g2.input(TensorD::ones(Shape{1}));
  CHECK_THROWS_AS(g2.backward(c), Error);
}

TEST_CASE("mse_loss values") {
  GraphD g;
  TensorD a = tensor3({1, 0, 0}, Shape{1, 1, 3});
  TensorD b = tensor3({0, 1, 0}, Shape{1, 1, 3});
  CHECK(g.value(g.mse_loss(g.input(a), g.input(a)))[0] == 0.0);
  CHECK(g.value(g.mse_loss(g.input(a), g.input(b)))[0] == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(g.mse_loss(g.input(tensor3({1, 1, 0}, Shape{1, 1, 3})), g.input(a)), Error);
}

TEST_CASE("non-finite op output is reported with the op name") {
  GraphD g;
  TensorD big = TensorD::full(Shape{4}, 1e308);
  auto x = g.input(big);
  CHECK_THROWS_WITH_AS(g.add(x, x), doctest::Contains("add"), NumericError);
}
