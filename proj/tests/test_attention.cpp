#include <cmath>

#include "doctest.h"
#include "mga/attention.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mga;
using namespace mga::testutil;

namespace {

Tensor reverse_rows(const Tensor& x) {
  const int t = x.extent(0), d = x.extent(1);
  Tensor out(x.shape());
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j)
      out.values()[static_cast<int64_t>(t - 1 - i) * d + j] =
          x.values()[static_cast<int64_t>(i) * d + j];
  return out;
}

MgaConfig tiny_cfg() {
  MgaConfig cfg;
  cfg.d = 6;
  cfg.heads = 2;
  cfg.context = 3;
  cfg.gru_hidden = 5;
  cfg.max_seq_len = 16;
  return cfg;
}

}  // namespace

TEST_CASE("gru_sequence gradients match finite differences, both directions") {
  Rng rng(193);
  const int t = 4, din = 3, h = 3;
  Tensor x0 = random_tensor({t, din}, rng);
  Tensor wi0 = random_tensor({din, 3 * h}, rng);
  Tensor wh0 = random_tensor({h, 3 * h}, rng);
  Tensor bi0 = random_tensor({3 * h}, rng);
  Tensor bh0 = random_tensor({3 * h}, rng);
  for (bool rev : {false, true}) {
    auto sq = [](const Tensor& y) { return sum_all(mul(y, y)); };
    CHECK(grad_check([&](const Tensor& x) {
            return sq(gru_sequence(x, wi0, wh0, bi0, bh0, rev));
          }, x0) <= 1e-3);
    CHECK(grad_check([&](const Tensor& w) {
            return sq(gru_sequence(x0, w, wh0, bi0, bh0, rev));
          }, wi0) <= 1e-3);
    CHECK(grad_check([&](const Tensor& w) {
            return sq(gru_sequence(x0, wi0, w, bi0, bh0, rev));
          }, wh0) <= 1e-3);
    CHECK(grad_check([&](const Tensor& b) {
            return sq(gru_sequence(x0, wi0, wh0, b, bh0, rev));
          }, bi0) <= 1e-3);
    CHECK(grad_check([&](const Tensor& b) {
            return sq(gru_sequence(x0, wi0, wh0, bi0, b, rev));
          }, bh0) <= 1e-3);
  }
}

TEST_CASE("global attention rows sum to 1") {
  Rng rng(197);
  ParamRegistry reg;
  GlobalContext gc("g", 8, 2, 16, rng, reg);
  Tensor x = random_tensor({7, 8}, rng);
  for (const Tensor& att : gc.attention_weights(x)) {
    REQUIRE(att.shape() == Shape{7, 7});
    for (int i = 0; i < 7; ++i) {
      double s = 0.0;
      for (int j = 0; j < 7; ++j) s += att.at({i, j});
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("global attention with a zero value map is the identity residual") {
  Rng rng(199);
  ParamRegistry reg;
  GlobalContext gc("g", 8, 2, 16, rng, reg);
  for (double& w : gc.wv.value.values()) w = 0.0;
  Tensor x = random_tensor({5, 8}, rng);
  CHECK(max_abs_diff(gc.forward(x), x) == 0.0);
}

TEST_CASE("uniform attention for identical tokens without position terms") {
  Rng rng(211);
  ParamRegistry reg;
  GlobalContext gc("g", 4, 1, 16, rng, reg);
  for (double& w : gc.rpe.value.values()) w = 0.0;
  for (double& w : gc.u.value.values()) w = 0.0;
  for (double& w : gc.v.value.values()) w = 0.0;
  Tensor x(Shape{6, 4});
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j)
      x.values()[static_cast<int64_t>(i) * 4 + j] = 0.3 * j - 0.1;
  auto weights = gc.attention_weights(x);
  REQUIRE(weights.size() == 1);
  for (double w : weights[0].values())
    CHECK(w == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("zero-RPE attention is permutation equivariant; RPE breaks it") {
  Rng rng(223);
  ParamRegistry reg;
  GlobalContext gc("g", 6, 2, 16, rng, reg);
  Tensor x = random_tensor({5, 6}, rng);

  // permutation = reversal
  Tensor rpe_backup = gc.rpe.value.clone();
  for (double& w : gc.rpe.value.values()) w = 0.0;
  Tensor y_perm_in = gc.forward(reverse_rows(x));
  Tensor y_perm_out = reverse_rows(gc.forward(x));
  CHECK(max_abs_diff(y_perm_in, y_perm_out) <= 1e-12);

  gc.rpe.value = rpe_backup;
  Tensor z_perm_in = gc.forward(reverse_rows(x));
  Tensor z_perm_out = reverse_rows(gc.forward(x));
  CHECK(max_abs_diff(z_perm_in, z_perm_out) > 1e-6);
}

TEST_CASE("sequences beyond the position table are rejected") {
  Rng rng(227);
  ParamRegistry reg;
  GlobalContext gc("g", 4, 1, 8, rng, reg);
  Tensor x = random_tensor({9, 4}, rng);
  CHECK_THROWS_AS(gc.forward(x), ConfigError);
}

TEST_CASE("global stage gradients match finite differences") {
  Rng rng(229);
  ParamRegistry reg;
  GlobalContext gc("g", 4, 2, 8, rng, reg);
  Tensor x0 = random_tensor({3, 4}, rng);
  auto f = [&](const Tensor& x) {
    Tensor y = gc.forward(x);
    return sum_all(mul(y, y));
  };
  CHECK(grad_check(f, x0) <= 1e-3);

  Tensor wq0 = gc.wq.value.clone();
  auto fq = [&](const Tensor& w) {
    gc.wq.value = w;
    Tensor y = gc.forward(x0);
    return sum_all(mul(y, y));
  };
  double err = grad_check(fq, wq0);
  gc.wq.value = wq0;
  CHECK(err <= 1e-3);

  Tensor rpe0 = gc.rpe.value.clone();
  auto fr = [&](const Tensor& w) {
    gc.rpe.value = w;
    Tensor y = gc.forward(x0);
    return sum_all(mul(y, y));
  };
  err = grad_check(fr, rpe0);
  gc.rpe.value = rpe0;
  CHECK(err <= 1e-3);
}

TEST_CASE("LDSA with context 1 degenerates to x*W3*Wo") {
  Rng rng(233);
  ParamRegistry reg;
  LocalContext lc("l", 5, 1, rng, reg);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor direct = matmul(matmul(x, lc.w3.value), lc.wo.value);
  CHECK(max_abs_diff(lc.ldsa(x), direct) <= 1e-12);
}

TEST_CASE("LDSA matches the per-frame loop oracle on a hand-set case") {
  ParamRegistry reg;
  Rng rng(239);
  LocalContext lc("l", 2, 3, rng, reg);
  lc.w1.value = Tensor(Shape{2, 2}, {0.5, -1.0, 2.0, 0.25});
  lc.w2.value = Tensor(Shape{2, 3}, {1.0, 0.0, -0.5, 0.5, 1.5, -1.0});
  lc.w3.value = Tensor(Shape{2, 2}, {1.0, 2.0, -1.0, 0.5});
  lc.wo.value = Tensor(Shape{2, 2}, {0.75, -0.25, 0.5, 1.0});
  Tensor x(Shape{4, 2}, {0.2, -0.4, 1.0, 0.3, -0.7, 0.9, 0.1, 0.6});

  // Rebuild the whole pipeline from the equations with test-local pieces.
  Tensor logits = naive_matmul(relu(naive_matmul(x, lc.w1.value)), lc.w2.value);
  Tensor att = softmax(logits, 1);
  Tensor val = naive_matmul(x, lc.w3.value);
  Tensor expect = naive_matmul(oracles::ldsa_combine_oracle(att, val), lc.wo.value);
  CHECK(max_abs_diff(lc.ldsa(x), expect) <= 1e-9);
}

TEST_CASE("LDSA equals the loop oracle for random sizes and windows") {
  Rng rng(241);
  for (int c : {1, 3, 5}) {
    for (int rep = 0; rep < 6; ++rep) {
      const int t = 1 + rng.uniform_int(8);
      const int d = 1 + rng.uniform_int(8);
      ParamRegistry reg;
      LocalContext lc("l", d, c, rng, reg);
      Tensor x = random_tensor({t, d}, rng);
      Tensor att = lc.attention_weights(x);
      Tensor h = lc.ln.forward(x);
      Tensor val = naive_matmul(h, lc.w3.value);
      Tensor expect =
          naive_matmul(oracles::ldsa_combine_oracle(att, val), lc.wo.value);
      CHECK(max_abs_diff(lc.ldsa(h), expect) <= 1e-9);
    }
  }
}

TEST_CASE("LDSA window weights are row-stochastic") {
  Rng rng(251);
  ParamRegistry reg;
  LocalContext lc("l", 6, 3, rng, reg);
  Tensor x = random_tensor({9, 6}, rng);
  Tensor att = lc.attention_weights(x);
  for (int i = 0; i < 9; ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += att.at({i, j});
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("local stage with zero LDSA weights is the identity residual") {
  Rng rng(257);
  ParamRegistry reg;
  LocalContext lc("l", 5, 3, rng, reg);
  for (Parameter* p : {&lc.w1, &lc.w2, &lc.w3, &lc.wo})
    for (double& v : p->value.values()) v = 0.0;
  Tensor x = random_tensor({6, 5}, rng);
  CHECK(max_abs_diff(lc.forward(x), x) == 0.0);
  for (int t : {1, 2, 7}) {
    Tensor z = random_tensor({t, 5}, rng);
    CHECK(lc.forward(z).shape() == z.shape());
  }
}

TEST_CASE("local stage gradients match finite differences") {
  Rng rng(263);
  ParamRegistry reg;
  LocalContext lc("l", 6, 3, rng, reg);
  Tensor x0 = random_tensor({5, 6}, rng);
  auto f = [&](const Tensor& x) {
    Tensor y = lc.forward(x);
    return sum_all(mul(y, y));
  };
  CHECK(grad_check(f, x0) <= 1e-3);

  Tensor w10 = lc.w1.value.clone();
  auto f1 = [&](const Tensor& w) {
    lc.w1.value = w;
    Tensor y = lc.forward(x0);
    return sum_all(mul(y, y));
  };
  double err = grad_check(f1, w10);
  lc.w1.value = w10;
  CHECK(err <= 1e-3);
}

TEST_CASE("frame stage with zero GRU and projection is Linear(ReLU(x))") {
  Rng rng(269);
  ParamRegistry reg;
  FrameContext fc("f", 4, 3, rng, reg);
  for (Parameter* p : {&fc.gru.fwd_wi, &fc.gru.fwd_wh, &fc.gru.fwd_bi,
                       &fc.gru.fwd_bh, &fc.gru.bwd_wi, &fc.gru.bwd_wh,
                       &fc.gru.bwd_bi, &fc.gru.bwd_bh, &fc.proj.w, &fc.proj.b})
    for (double& v : p->value.values()) v = 0.0;
  Tensor x = random_tensor({5, 4}, rng);
  Tensor expect = fc.out_linear.forward(relu(x));
  CHECK(max_abs_diff(fc.forward(x), expect) == 0.0);
}

TEST_CASE("reversing input and swapping directions reverses the BiGRU output") {
  Rng rng(271);
  ParamRegistry reg1, reg2;
  BiGru a("a", 4, 3, rng, reg1);
  BiGru b("b", 4, 3, rng, reg2);
  // b gets a's parameters with forward and backward swapped
  b.fwd_wi.value = a.bwd_wi.value.clone();
  b.fwd_wh.value = a.bwd_wh.value.clone();
  b.fwd_bi.value = a.bwd_bi.value.clone();
  b.fwd_bh.value = a.bwd_bh.value.clone();
  b.bwd_wi.value = a.fwd_wi.value.clone();
  b.bwd_wh.value = a.fwd_wh.value.clone();
  b.bwd_bi.value = a.fwd_bi.value.clone();
  b.bwd_bh.value = a.fwd_bh.value.clone();

  Tensor x = random_tensor({6, 4}, rng);
  Tensor ya = a.forward(x);                // [6, 6]: [fwd | bwd]
  Tensor yb = b.forward(reverse_rows(x));  // [6, 6]: [bwd' | fwd']
  const int t = 6, h = 3;
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < h; ++j) {
      CHECK(yb.at({i, j}) == ya.at({t - 1 - i, h + j}));
      CHECK(yb.at({i, h + j}) == ya.at({t - 1 - i, j}));
    }
}

TEST_CASE("frame stage gradients match finite differences") {
  Rng rng(277);
  ParamRegistry reg;
  FrameContext fc("f", 6, 5, rng, reg);
  Tensor x0 = random_tensor({4, 6}, rng);
  auto f = [&](const Tensor& x) {
    Tensor y = fc.forward(x);
    return sum_all(mul(y, y));
  };
  CHECK(grad_check(f, x0) <= 1e-3);
}

TEST_CASE("disabling every stage is rejected; one stage reduces to it") {
  MgaConfig cfg = tiny_cfg();
  cfg.stage_global = cfg.stage_local = cfg.stage_frame = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  Rng rng(281);
  MgaConfig only_local = tiny_cfg();
  only_local.stage_global = false;
  only_local.stage_frame = false;
  ParamRegistry reg;
  MgaModule m("m", only_local, rng, reg);
  Tensor x = random_tensor({5, 6}, rng);
  CHECK(max_abs_diff(m.forward(x), m.local.forward(x)) == 0.0);
}

TEST_CASE("Coarse-Fine and Fine-Coarse orders differ on random parameters") {
  MgaConfig cf = tiny_cfg();
  MgaConfig fc = tiny_cfg();
  fc.order = MgaOrder::FINE_COARSE;
  Rng rng_a(283), rng_b(283);
  ParamRegistry reg_a, reg_b;
  MgaModule ma("m", cf, rng_a, reg_a);
  MgaModule mb("m", fc, rng_b, reg_b);
  Rng rng(293);
  Tensor x = random_tensor({6, 6}, rng);
  CHECK(max_abs_diff(ma.forward(x), mb.forward(x)) > 1e-9);
}

TEST_CASE("four stacked modules preserve [T,144]") {
  MgaConfig cfg;  // full-scale defaults: d=144, 4 heads, gru 512
  cfg.max_seq_len = 8;
  Rng rng(307);
  ParamRegistry reg;
  std::vector<MgaModule> stack;
  for (int i = 0; i < 4; ++i)
    stack.emplace_back("mga." + std::to_string(i), cfg, rng, reg);
  Tensor x = random_tensor({6, 144}, rng);
  Tensor h = x;
  for (const MgaModule& m : stack) h = m.forward(h);
  CHECK(h.shape() == Shape{6, 144});
}

TEST_CASE("class token rows bypass the frame stage untouched") {
  MgaConfig cfg = tiny_cfg();
  cfg.stage_global = false;
  cfg.stage_local = false;
  Rng rng(311);
  ParamRegistry reg;
  MgaModule m("m", cfg, rng, reg);
  Tensor x = random_tensor({5, 6}, rng);
  Tensor y = m.forward(x, /*token_rows=*/1);
  for (int j = 0; j < 6; ++j) CHECK(y.at({0, j}) == x.at({0, j}));
  Tensor rest = m.frame.forward(slice_rows(x, 1, 5));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) CHECK(y.at({i + 1, j}) == rest.at({i, j}));
}

TEST_CASE("full module gradients match finite differences") {
  MgaConfig cfg = tiny_cfg();
  Rng rng(313);
  ParamRegistry reg;
  MgaModule m("m", cfg, rng, reg);
  Tensor x0 = random_tensor({4, 6}, rng);
  auto f = [&](const Tensor& x) {
    Tensor y = m.forward(x, 1);
    return sum_all(mul(y, y));
  };
  CHECK(grad_check(f, x0) <= 1e-3);
}
