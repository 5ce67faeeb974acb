#include <doctest.h>

#include "dbcc/model.hpp"
#include "gradcheck.hpp"

using namespace dbcc;
using gradcheck::random_tensor;

namespace {

using Id = GraphD::Id;
using Ids = std::vector<Id>;

void check_ok(const gradcheck::Result& r) {
  CHECK(r.max_rel_err < 1e-4);
  CHECK(r.checked > 0);
}

}  // namespace

TEST_CASE("gradcheck: elementwise and reduction ops") {
  Rng rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    const int h = 2 + rng.next_int(4), w = 2 + rng.next_int(4), c = 3 + rng.next_int(4);
    const Shape s{h, w, c};

    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.relu(in[0]); }, {random_tensor(s, rng)}, rng));
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.add(in[0], in[1]); },
        {random_tensor(s, rng), random_tensor(s, rng)}, rng));
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.mul(in[0], in[1]); },
        {random_tensor(s, rng), random_tensor(s, rng)}, rng));
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.scale(in[0], in[1]); },
        {random_tensor(s, rng), random_tensor(Shape{1}, rng)}, rng));
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.concat_depth(in[0], in[1]); },
        {random_tensor(s, rng), random_tensor(s, rng)}, rng));
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.spatial_sum(in[0]); }, {random_tensor(s, rng)},
        rng));
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.group_depth_sum(g.spatial_sum(in[0])); },
        {random_tensor(s, rng)}, rng));
  }
}

TEST_CASE("gradcheck: pooling") {
  Rng rng(103);
  for (int trial = 0; trial < 6; ++trial) {
    const int h = 2 * (1 + rng.next_int(3)), w = 2 * (1 + rng.next_int(3));
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.avg_pool2(in[0]); },
        {random_tensor(Shape{h, w, 1 + rng.next_int(4)}, rng)}, rng));
  }
  check_ok(gradcheck::check(
      [](GraphD& g, const Ids& in) { return g.avg_down(in[0], 4); },
      {random_tensor(Shape{8, 8, 3}, rng)}, rng));
}

TEST_CASE("gradcheck: convolutions") {
  Rng rng(107);
  for (int trial = 0; trial < 6; ++trial) {
    const int k = 2 + rng.next_int(5), l = 2 + rng.next_int(5);
    const int m = 1 + rng.next_int(4), f = 1 + rng.next_int(4);
    const int stride = 1 + rng.next_int(2);
    check_ok(gradcheck::check(
        [stride](GraphD& g, const Ids& in) {
          return g.pointwise_conv(in[0], in[1], in[2], stride);
        },
        {random_tensor(Shape{1, 1, m, f}, rng), random_tensor(Shape{f}, rng),
         random_tensor(Shape{k, l, m}, rng)},
        rng));

    const int mult = 1 + rng.next_int(2);
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.depthwise_conv(in[0], in[1]); },
        {random_tensor(Shape{3, 3, m, mult}, rng), random_tensor(Shape{k, l, m}, rng)}, rng));
  }

  for (int stride : {1, 2, 4}) {
    check_ok(gradcheck::check(
        [stride](GraphD& g, const Ids& in) { return g.conv2d(in[0], in[1], in[2], stride); },
        {random_tensor(Shape{3, 3, 2, 3}, rng), random_tensor(Shape{3}, rng),
         random_tensor(Shape{8, 8, 2}, rng)},
        rng));
  }
}

TEST_CASE("gradcheck: l2_normalize and mse_loss") {
  Rng rng(109);
  for (int trial = 0; trial < 10; ++trial) {
    TensorD v = random_tensor(Shape{1, 1, 3}, rng, 0.2, 2.0);
    check_ok(gradcheck::check(
        [](GraphD& g, const Ids& in) { return g.l2_normalize(in[0]); }, {v}, rng));

    TensorD gt = random_tensor(Shape{1, 1, 3}, rng, 0.2, 2.0);
    const double n = std::sqrt(gt[0] * gt[0] + gt[1] * gt[1] + gt[2] * gt[2]);
    for (int i = 0; i < 3; ++i) gt[i] /= n;
    // estimate passes through l2_normalize so the mse precondition holds
    check_ok(gradcheck::check(
        [&gt](GraphD& g, const Ids& in) {
          return g.mse_loss(g.l2_normalize(in[0]), g.input(gt, "gt"));
        },
        {v}, rng));
  }
}

TEST_CASE("mse gradient matches finite differences tightly") {
  // direct fp64 difference quotient on the (1/3)|e-g|^2 form
  Rng rng(113);
  TensorD e = random_tensor(Shape{1, 1, 3}, rng, -1.0, 1.0);
  double n = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
  for (int i = 0; i < 3; ++i) e[i] /= n;
  TensorD gt = random_tensor(Shape{1, 1, 3}, rng, 0.2, 1.0);
  n = std::sqrt(gt[0] * gt[0] + gt[1] * gt[1] + gt[2] * gt[2]);
  for (int i = 0; i < 3; ++i) gt[i] /= n;

  auto loss_of = [&](const TensorD& est) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (est[i] - gt[i]) * (est[i] - gt[i]);
    return s / 3.0;
  };
  GraphD g;
  auto en = g.param(e, "e");
  g.backward(g.mse_loss(en, g.input(gt)));
  for (int i = 0; i < 3; ++i) {
    TensorD up = e, dn = e;
    up[i] += 1e-7;
    dn[i] -= 1e-7;
    const double fd = (loss_of(up) - loss_of(dn)) / 2e-7;
    const double an = g.grad(en)[i];
    CHECK(std::fabs(fd - an) / std::max(1e-8, std::fabs(fd)) < 1e-6);
  }
}

TEST_CASE("gradcheck: composed blocks reach 1e-4 agreement") {
  // semantic o color unit composition, then the full head
  Rng rng(127);
  check_ok(gradcheck::check(
      [](GraphD& g, const Ids& in) {
        auto sem = g.avg_pool2(g.relu(g.depthwise_conv(in[0], in[2])));
        auto col = g.relu(g.pointwise_conv(in[1], -1, in[3], 2));
        return g.group_depth_sum(g.spatial_sum(g.mul(sem, col)));
      },
      {random_tensor(Shape{3, 3, 4, 1}, rng), random_tensor(Shape{1, 1, 4, 4}, rng),
       random_tensor(Shape{8, 8, 4}, rng), random_tensor(Shape{8, 8, 4}, rng)},
      rng));
}
