#include <cmath>

#include "doctest.h"
#include "mga/nn.hpp"
#include "mga/ops.hpp"
#include "mga/tensor.hpp"
#include "test_util.hpp"

using namespace mga;
using namespace mga::testutil;

TEST_CASE("matmul identity leaves the input unchanged") {
  Tensor a(Shape{2, 2}, {1.5, -2.0, 0.25, 7.0});
  Tensor eye(Shape{2, 2}, {1, 0, 0, 1});
  Tensor c = matmul(a, eye);
  CHECK(max_abs_diff(c, a) == 0.0);
}

TEST_CASE("matmul matches hand computation and the triple-loop reference") {
  Tensor a(Shape{2, 2}, {1, 2, 3, 4});
  Tensor b(Shape{2, 1}, {5, 6});
  Tensor c = matmul(a, b);
  CHECK(c.at({0, 0}) == doctest::Approx(17).epsilon(1e-12));
  CHECK(c.at({1, 0}) == doctest::Approx(39).epsilon(1e-12));

  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    int m = 1 + rng.uniform_int(6), k = 1 + rng.uniform_int(6),
        n = 1 + rng.uniform_int(6);
    Tensor x = random_tensor({m, k}, rng);
    Tensor y = random_tensor({k, n}, rng);
    CHECK(max_abs_diff(matmul(x, y), naive_matmul(x, y)) < 1e-12);
  }
}

TEST_CASE("matmul rejects mismatched inner extents naming both shapes") {
  Tensor a(Shape{2, 3});
  Tensor b(Shape{2, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       doctest::Contains("[2,3]"), DimensionError);
}

TEST_CASE("gradient of sum(A*B) wrt A matches finite differences") {
  Rng rng(7);
  Tensor a0 = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  double err = grad_check(
      [&](const Tensor& a) { return sum_all(matmul(a, b)); }, a0);
  CHECK(err <= 1e-3);
  Tensor a1 = random_tensor({3, 4}, rng);
  err = grad_check([&](const Tensor& bb) { return sum_all(matmul(a1, bb)); },
                   random_tensor({4, 2}, rng));
  CHECK(err <= 1e-3);
}

TEST_CASE("conv2d with a unit 1x1 kernel is the identity") {
  Rng rng(3);
  Tensor x = random_tensor({1, 4, 5}, rng);
  Tensor w(Shape{1, 1, 1, 1}, {1.0});
  CHECK(max_abs_diff(conv2d(x, w, 0, 0), x) == 0.0);
}

TEST_CASE("conv2d all-ones 3x3 kernel on the 3x3 ramp") {
  Tensor x(Shape{1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor w(Shape{1, 1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor y = conv2d(x, w, 1, 1);
  CHECK(y.at({0, 1, 1}) == doctest::Approx(45).epsilon(1e-12));
  CHECK(y.at({0, 0, 0}) == doctest::Approx(12).epsilon(1e-12));
  CHECK(max_abs_diff(y, naive_conv2d(x, w, 1, 1)) < 1e-12);
}

TEST_CASE("asymmetric 3x1 and 1x3 kernels preserve shape under their padding") {
  Rng rng(5);
  Tensor x = random_tensor({2, 6, 4}, rng);
  Tensor w31 = random_tensor({3, 2, 3, 1}, rng);
  Tensor w13 = random_tensor({3, 2, 1, 3}, rng);
  Tensor y31 = conv2d(x, w31, 1, 0);
  Tensor y13 = conv2d(x, w13, 0, 1);
  CHECK(y31.shape() == Shape{3, 6, 4});
  CHECK(y13.shape() == Shape{3, 6, 4});
}

TEST_CASE("conv2d equals the naive six-loop reference on random shapes") {
  Rng rng(17);
  for (int rep = 0; rep < 15; ++rep) {
    int ci = 1 + rng.uniform_int(3), co = 1 + rng.uniform_int(3);
    int t = 2 + rng.uniform_int(5), f = 2 + rng.uniform_int(5);
    int kh = 1 + 2 * rng.uniform_int(2), kw = 1 + 2 * rng.uniform_int(2);
    int ph = kh / 2, pw = kw / 2;
    Tensor x = random_tensor({ci, t, f}, rng);
    Tensor w = random_tensor({co, ci, kh, kw}, rng);
    CHECK(max_abs_diff(conv2d(x, w, ph, pw), naive_conv2d(x, w, ph, pw)) < 1e-9);
  }
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
  Tensor x(Shape{1, 2, 2});
  Tensor w(Shape{1, 1, 5, 5});
  CHECK_THROWS_AS(conv2d(x, w, 1, 1), DimensionError);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(23);
  Tensor x0 = random_tensor({2, 4, 4}, rng);
  Tensor w0 = random_tensor({3, 2, 3, 3}, rng);
  CHECK(grad_check([&](const Tensor& x) { return sum_all(conv2d(x, w0, 1, 1)); },
                   x0) <= 1e-3);
  CHECK(grad_check([&](const Tensor& w) { return sum_all(conv2d(x0, w, 1, 1)); },
                   w0) <= 1e-3);
}

TEST_CASE("batch_norm maps a constant channel to zeros before gamma/beta") {
  Tensor x(Shape{2, 3, 3}, std::vector<double>(18, 4.2));
  Tensor gamma(Shape{2}, {1, 1});
  Tensor beta(Shape{2}, {0, 0});
  Tensor rm(Shape{2});
  Tensor rv(Shape{2}, {1, 1});
  Tensor y = batch_norm(x, gamma, beta, rm, rv, true, 0.9, 1e-5);
  for (double v : y.values()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("batch_norm on standardized input is near-identity in train mode") {
  Rng rng(31);
  const double eps = 1e-5;
  Tensor x = random_normal_tensor({2, 4, 5}, rng, 1.7);
  // standardize each channel with the BN convention; iterating makes the
  // input a fixpoint of the normalizer up to rounding
  const int64_t tf = 20;
  for (int pass = 0; pass < 2; ++pass) {
    for (int c = 0; c < 2; ++c) {
      double m = 0.0;
      for (int64_t p = 0; p < tf; ++p) m += x.values()[c * tf + p];
      m /= static_cast<double>(tf);
      double v = 0.0;
      for (int64_t p = 0; p < tf; ++p) {
        double d = x.values()[c * tf + p] - m;
        v += d * d;
      }
      v /= static_cast<double>(tf);
      const double is = 1.0 / std::sqrt(v + eps);
      for (int64_t p = 0; p < tf; ++p)
        x.values()[c * tf + p] = (x.values()[c * tf + p] - m) * is;
    }
  }
  Tensor gamma(Shape{2}, {1, 1});
  Tensor beta(Shape{2});
  Tensor rm(Shape{2});
  Tensor rv(Shape{2}, {1, 1});
  Tensor y = batch_norm(x, gamma, beta, rm, rv, true, 0.9, eps);
  CHECK(max_abs_diff(y, x) <= 1e-6);
}

TEST_CASE("batch_norm train mode standardizes random channels") {
  Rng rng(37);
  Tensor x = random_normal_tensor({3, 6, 6}, rng, 2.0);
  Tensor gamma(Shape{3}, {1, 1, 1});
  Tensor beta(Shape{3});
  Tensor rm(Shape{3});
  Tensor rv(Shape{3}, {1, 1, 1});
  Tensor y = batch_norm(x, gamma, beta, rm, rv, true, 0.9, 1e-5);
  const int64_t tf = 36;
  for (int c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (int64_t p = 0; p < tf; ++p) m += y.values()[c * tf + p];
    m /= static_cast<double>(tf);
    for (int64_t p = 0; p < tf; ++p) {
      double d = y.values()[c * tf + p] - m;
      v += d * d;
    }
    v /= static_cast<double>(tf);
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::abs(v - 1.0) < 1e-5);
  }
}

TEST_CASE("batch_norm updates running stats with momentum and uses them in eval") {
  Tensor x(Shape{1, 2, 2}, {1, 2, 3, 4});
  Tensor gamma(Shape{1}, {1.0});
  Tensor beta(Shape{1});
  Tensor rm(Shape{1});
  Tensor rv(Shape{1}, {1.0});
  batch_norm(x, gamma, beta, rm, rv, true, 0.9, 1e-5);
  // batch mean 2.5, biased var 1.25
  CHECK(rm.values()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(rv.values()[0] == doctest::Approx(0.9 + 0.125).epsilon(1e-12));
  Tensor y = batch_norm(x, gamma, beta, rm, rv, false, 0.9, 1e-5);
  const double expect = (1.0 - 0.25) / std::sqrt(1.025 + 1e-5);
  CHECK(y.values()[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("batch_norm gradients match finite differences in both modes") {
  Rng rng(41);
  Tensor x0 = random_tensor({2, 3, 4}, rng);
  Tensor gamma(Shape{2}, {1.3, 0.7});
  Tensor beta(Shape{2}, {0.1, -0.2});
  for (bool train : {true, false}) {
    auto f = [&](const Tensor& x) {
      Tensor rm(Shape{2}, {0.05, -0.1});
      Tensor rv(Shape{2}, {1.1, 0.9});
      Tensor y = batch_norm(x, gamma, beta, rm, rv, train, 0.9, 1e-5);
      return sum_all(mul(y, y));
    };
    CHECK(grad_check(f, x0) <= 1e-3);
  }
  auto fg = [&](const Tensor& g) {
    Tensor rm(Shape{2});
    Tensor rv(Shape{2}, {1, 1});
    Tensor y = batch_norm(x0, g, beta, rm, rv, true, 0.9, 1e-5);
    return sum_all(mul(y, y));
  };
  CHECK(grad_check(fg, gamma) <= 1e-3);
}

TEST_CASE("gelu fixed points and asymptote") {
  Tensor x(Shape{2}, {0.0, 10.0});
  Tensor y = gelu(x);
  CHECK(y.values()[0] == 0.0);
  CHECK(std::abs(y.values()[1] - 10.0) <= 1e-4);
}

TEST_CASE("gelu gradient matches finite differences at probe points") {
  Tensor x(Shape{4}, {-2.0, -0.5, 0.5, 2.0});
  CHECK(grad_check([](const Tensor& t) { return sum_all(gelu(t)); }, x) <= 1e-3);
}

TEST_CASE("softmax of a uniform vector is 1/n") {
  Tensor x(Shape{1, 5}, std::vector<double>(5, 3.3));
  Tensor y = softmax(x, 1);
  for (double v : y.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax closed form for [0, ln 3]") {
  Tensor x(Shape{1, 2}, {0.0, std::log(3.0)});
  Tensor y = softmax(x, 1);
  CHECK(y.values()[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(y.values()[1] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("softmax slices sum to 1 and stay in [0,1] on random input") {
  Rng rng(43);
  for (int rep = 0; rep < 10; ++rep) {
    int m = 1 + rng.uniform_int(5), n = 1 + rng.uniform_int(6);
    Tensor x = random_tensor({m, n}, rng, -30.0, 30.0);
    for (int axis : {0, 1}) {
      Tensor y = softmax(x, axis);
      for (double v : y.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      const int lines = axis == 0 ? n : m;
      for (int l = 0; l < lines; ++l) {
        double s = 0.0;
        for (int k = 0; k < (axis == 0 ? m : n); ++k)
          s += axis == 0 ? y.at({k, l}) : y.at({l, k});
        CHECK(std::abs(s - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("avg_pool2d basics") {
  Tensor c(Shape{1, 4, 4}, std::vector<double>(16, 2.5));
  Tensor yc = avg_pool2d(c, 2, 2);
  CHECK(yc.shape() == Shape{1, 2, 2});
  for (double v : yc.values()) CHECK(v == doctest::Approx(2.5));

  Tensor x(Shape{1, 2, 2}, {1, 2, 3, 4});
  CHECK(avg_pool2d(x, 2, 2).item() == doctest::Approx(2.5).epsilon(1e-12));

  CHECK_THROWS_AS(avg_pool2d(Tensor(Shape{1, 3, 4}), 2, 2), DimensionError);
}

TEST_CASE("default pooling schedule reduces 496x64 to 124x1") {
  Tensor x(Shape{1, 496, 64}, std::vector<double>(496 * 64, 1.0));
  const int schedule[6][2] = {{2, 2}, {2, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}};
  Tensor y = x;
  for (auto [pt, pf] : schedule) y = avg_pool2d(y, pt, pf);
  CHECK(y.shape() == Shape{1, 124, 1});
}

TEST_CASE("backward of sum gives all-ones gradient") {
  Tensor x(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  x.set_tracked();
  Tape tape;
  Tensor loss = sum_all(x);
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum of squares gives 2x") {
  Tensor x(Shape{4}, {1, -2, 0.5, 3});
  x.set_tracked();
  Tape tape;
  Tensor loss = sum_all(mul(x, x));
  tape.backward(loss);
  for (int i = 0; i < 4; ++i)
    CHECK(x.grad()[i] == doctest::Approx(2 * x.values()[i]).epsilon(1e-12));
}

TEST_CASE("composite conv->BN->gelu->sum gradient matches finite differences") {
  Rng rng(47);
  Tensor x0 = random_tensor({1, 4, 4}, rng);
  Tensor w = random_tensor({2, 1, 3, 3}, rng);
  Tensor gamma(Shape{2}, {1, 1});
  Tensor beta(Shape{2});
  auto f = [&](const Tensor& x) {
    Tensor rm(Shape{2});
    Tensor rv(Shape{2}, {1, 1});
    return sum_all(gelu(batch_norm(conv2d(x, w, 1, 1), gamma, beta, rm, rv,
                                   true, 0.9, 1e-5)));
  };
  CHECK(grad_check(f, x0) <= 1e-3);
}

TEST_CASE("repeated backward without reset is a usage error") {
  Tensor x(Shape{2}, {1, 2});
  x.set_tracked();
  Tape tape;
  Tensor loss = sum_all(x);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), UsageError);
  tape.reset();
}

TEST_CASE("backward on an untracked tensor is a usage error") {
  Tensor x(Shape{2}, {1, 2});
  Tape tape;
  Tensor loss = sum_all(x);  // untracked input, nothing recorded
  CHECK_THROWS_AS(tape.backward(loss), UsageError);
}

TEST_CASE("grad_check is exact for sum and tight for sum of squares") {
  // integer values and a power-of-two step keep every sum representable,
  // so the central difference of a linear map carries no rounding at all
  Tensor xi(Shape{5}, {1, 2, 3, 4, 5});
  CHECK(grad_check([](const Tensor& t) { return sum_all(t); }, xi,
                   0x1.0p-13) == 0.0);
  Rng rng(53);
  Tensor x = random_tensor({5}, rng);
  CHECK(grad_check([](const Tensor& t) { return sum_all(mul(t, t)); }, x,
                   1e-4) <= 1e-6);
}

TEST_CASE("every op passes grad_check on random small shapes") {
  Rng rng(59);
  auto sq = [](const Tensor& t) { return sum_all(mul(t, t)); };

  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sq(add(t, b)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(sub(b, t)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(mul(t, b)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(add_scalar(t, 2.0)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(mul_scalar(t, -1.5)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(sigmoid(t)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(tanh_op(t)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(softmax(t, 1)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(transpose(t)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(reshape(t, {4, 3})); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(slice_cols(t, 1, 3)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(slice_rows(t, 0, 2)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(concat_rows({t, b})); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(concat_cols({b, t})); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return mean_all(mul(t, t)); }, a) <= 1e-3);

  Tensor r = random_tensor({4}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sq(add_rowvec(t, r)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(add_rowvec(b, t)); }, r) <= 1e-3);

  Tensor s = Tensor::scalar(0.7);
  CHECK(grad_check([&](const Tensor& t) { return sq(scale(t, s)); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(scale(a, t)); }, s) <= 1e-3);

  Tensor x3 = random_tensor({4, 3, 2}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sq(channels_last(t)); }, x3) <= 1e-3);
  Tensor y2 = random_tensor({6, 4}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sq(channels_first(t, 3, 2)); }, y2) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(global_avg_pool(t)); }, x3) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return sq(avg_pool2d(t, 3, 2)); },
                   random_tensor({2, 6, 4}, rng)) <= 1e-3);

  Tensor p = random_tensor({4, 7}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sq(rel_gather(t)); }, p) <= 1e-3);

  Tensor lg(Shape{4}, std::vector<double>{1.2, 0.4, -0.3, 0.9});
  Tensor ln_g(Shape{4}, {1.1, 0.9, 1.0, 1.2});
  Tensor ln_b(Shape{4}, {0.0, 0.1, -0.1, 0.2});
  CHECK(grad_check([&](const Tensor& t) { return sq(layer_norm(t, ln_g, ln_b)); },
                   random_tensor({5, 4}, rng)) <= 1e-3);

  Tensor probs = random_tensor({3, 4}, rng, 0.05, 0.95);
  Tensor labels(Shape{3, 4});
  for (double& v : labels.values()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  CHECK(grad_check([&](const Tensor& t) { return bce_mean(t, labels); }, probs) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return mse_mean(t, b); }, a) <= 1e-3);
  CHECK(grad_check([&](const Tensor& t) { return mse_mean(b, t); }, a) <= 1e-3);
}

TEST_CASE("dropout scales kept values and is deterministic per seed") {
  Tensor x(Shape{100}, std::vector<double>(100, 1.0));
  Rng r1(99), r2(99);
  Tensor y1 = dropout(x, 0.1, r1);
  Tensor y2 = dropout(x, 0.1, r2);
  CHECK(max_abs_diff(y1, y2) == 0.0);
  for (double v : y1.values())
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.9).epsilon(1e-12)));
}

TEST_CASE("forward ops keep finite inputs finite") {
  Rng rng(61);
  Tensor x = random_tensor({2, 5, 6}, rng, -50.0, 50.0);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor g(Shape{3}, {1, 1, 1});
  Tensor be(Shape{3});
  Tensor rm(Shape{3});
  Tensor rv(Shape{3}, {1, 1, 1});
  Tensor y = gelu(batch_norm(conv2d(x, w, 1, 1), g, be, rm, rv, true, 0.9, 1e-5));
  CHECK(y.all_finite());
}
