#include <cmath>

#include "doctest.h"
#include "mga/model.hpp"
#include "test_util.hpp"

using namespace mga;
using namespace mga::testutil;

namespace {

// tiny preset shrunk onto an 8x8 feature map (pooling still flattens
// frequency to 1)
ModelConfig tiny_8x8() {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.encoder.pooling = {{2, 4}, {2, 2}};
  cfg.encoder.dropout = 0.0;
  cfg.n_classes = 3;
  cfg.n_mga = 2;
  cfg.mga.max_seq_len = 8;
  return cfg;
}

}  // namespace

TEST_CASE("tiny preset on a 10 s feature matrix emits strong [124,10], weak [10]") {
  MgaNet net(ModelConfig::tiny(), 1);
  Rng rng(331);
  Tensor feats = random_tensor({496, 64}, rng);
  ModelOutput out = net.forward(feats, FwdCtx::eval());
  CHECK(out.strong.shape() == Shape{124, 10});
  CHECK(out.weak.shape() == Shape{10});
  for (double p : out.strong.values()) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  for (double p : out.weak.values()) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("wrong feature shape raises a dimension error") {
  MgaNet net(tiny_8x8(), 1);
  Rng rng(337);
  CHECK_THROWS_AS(net.forward(random_tensor({7, 9}, rng), FwdCtx::eval()),
                  DimensionError);
}

TEST_CASE("tiny end-to-end gradients on an 8x8 feature map") {
  MgaNet net(tiny_8x8(), 2);
  Rng rng(347);
  Tensor f0 = random_tensor({8, 8}, rng);
  auto f = [&](const Tensor& feats) {
    ModelOutput out = net.forward(feats, FwdCtx{true, nullptr});
    return add(sum_all(mul(out.strong, out.strong)),
               sum_all(mul(out.weak, out.weak)));
  };
  CHECK(grad_check(f, f0) <= 1e-3);
}

TEST_CASE("same seed builds bit-identical parameters; seeds differ") {
  MgaNet a(tiny_8x8(), 42), b(tiny_8x8(), 42), c(tiny_8x8(), 43);
  REQUIRE(a.params().all().size() == b.params().all().size());
  double diff_ab = 0.0, diff_ac = 0.0;
  for (size_t i = 0; i < a.params().all().size(); ++i) {
    diff_ab = std::max(diff_ab, max_abs_diff(a.params().all()[i].value,
                                             b.params().all()[i].value));
    diff_ac = std::max(diff_ac, max_abs_diff(a.params().all()[i].value,
                                             c.params().all()[i].value));
  }
  CHECK(diff_ab == 0.0);
  CHECK(diff_ac > 0.0);
}

TEST_CASE("full preset trainable count matches the symbolic oracle") {
  ModelConfig cfg = ModelConfig::full();
  MgaNet net(cfg, 7);

  auto block_count = [](int ci, int co) {
    int64_t n = 3 * ci * co + 3 * ci * co;  // 1x3 + 3x1
    n += 2 * co;                            // bn1
    n += 9 * static_cast<int64_t>(co) * co + 2 * co;  // conv2 + bn2
    if (ci != co) n += static_cast<int64_t>(ci) * co + 2 * co;  // projection
    return n;
  };
  int64_t expect = 0;
  int ci = 1;
  for (int co : {16, 32, 64, 128, 144, 144}) {
    expect += block_count(ci, co);
    ci = co;
  }
  const int64_t c = 144, d = 144, h = 512, cls = 10, ctx = 3;
  expect += c * 3 * c + 3 * c;  // shift expand
  expect += 3 * c * 3 + 3;      // shift weigh
  expect += d;                  // class token
  const int64_t per_mga =
      (2 * d + 4 * d * d + (2 * 125 - 1) * d + 2 * d) +        // global + rpe
      (2 * d + d * d + d * ctx + d * d + d * d) +              // local
      (2 * d + 2 * (d * 3 * h + h * 3 * h + 6 * h) +           // frame: bigru
       (2 * h * d + d) + (d * d + d));                         // proj + out
  expect += 4 * per_mga;
  expect += 2 * (d * cls + cls);  // heads

  CHECK(net.params().trainable_elements() == expect);
  // regression constant pinned at first build
  CHECK(net.params().trainable_elements() == 10457559);
}

TEST_CASE("eval forward is deterministic; train differs only through dropout") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.n_classes = 3;
  MgaNet net(cfg, 3);
  Rng rng(353);
  Tensor feats = random_tensor({8, 64}, rng);
  ModelOutput a = net.forward(feats, FwdCtx::eval());
  ModelOutput b = net.forward(feats, FwdCtx::eval());
  CHECK(max_abs_diff(a.strong, b.strong) == 0.0);
  CHECK(max_abs_diff(a.weak, b.weak) == 0.0);

  Rng d1(5), d2(5), d3(6);
  FwdCtx t1{true, &d1}, t2{true, &d2}, t3{true, &d3};
  ModelOutput c = net.forward(feats, t1);
  ModelOutput d = net.forward(feats, t2);
  ModelOutput e = net.forward(feats, t3);
  CHECK(max_abs_diff(c.strong, d.strong) == 0.0);
  CHECK(max_abs_diff(c.strong, e.strong) > 0.0);
}

TEST_CASE("interleaved eval calls match per-clip evaluation") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.n_classes = 3;
  MgaNet net(cfg, 9);
  Rng rng(359);
  Tensor f1 = random_tensor({8, 64}, rng);
  Tensor f2 = random_tensor({8, 64}, rng);
  ModelOutput first = net.forward(f1, FwdCtx::eval());
  net.forward(f2, FwdCtx::eval());
  ModelOutput again = net.forward(f1, FwdCtx::eval());
  CHECK(max_abs_diff(first.strong, again.strong) == 0.0);
  CHECK(max_abs_diff(first.weak, again.weak) == 0.0);
}

TEST_CASE("zeroing attention value maps isolates the weak head on the token") {
  ModelConfig cfg = tiny_8x8();
  MgaNet net(cfg, 11);
  for (MgaModule& m : net.mga_stack) {
    for (double& v : m.global.wv.value.values()) v = 0.0;
    for (double& v : m.local.w3.value.values()) v = 0.0;
  }
  Rng rng(367);
  ModelOutput a = net.forward(random_tensor({8, 8}, rng), FwdCtx::eval());
  ModelOutput b = net.forward(random_tensor({8, 8}, rng), FwdCtx::eval());
  CHECK(max_abs_diff(a.weak, b.weak) == 0.0);
  CHECK(max_abs_diff(a.strong, b.strong) > 0.0);
}

TEST_CASE("checkpoints round-trip through save and load") {
  TempDir dir("ckpt");
  ModelConfig cfg = tiny_8x8();
  MgaNet a(cfg, 21);
  MgaNet b(cfg, 22);
  Rng rng(373);
  Tensor feats = random_tensor({8, 8}, rng);
  ModelOutput ya = a.forward(feats, FwdCtx::eval());

  save_checkpoint(dir.file("m.mgac"), a.params());
  load_checkpoint(dir.file("m.mgac"), b.params());
  ModelOutput yb = b.forward(feats, FwdCtx::eval());
  CHECK(max_abs_diff(ya.strong, yb.strong) == 0.0);
  CHECK(max_abs_diff(ya.weak, yb.weak) == 0.0);
}

TEST_CASE("checkpoint loader validates names and shapes against the config") {
  TempDir dir("ckpt_bad");
  MgaNet a(tiny_8x8(), 31);
  save_checkpoint(dir.file("a.mgac"), a.params());

  ModelConfig other = tiny_8x8();
  other.n_classes = 4;  // head shapes differ
  MgaNet b(other, 31);
  CHECK_THROWS_AS(load_checkpoint(dir.file("a.mgac"), b.params()), IoError);

  ModelConfig fewer = tiny_8x8();
  fewer.mga.stage_frame = false;  // checkpoint has params this model lacks
  MgaNet c(fewer, 31);
  CHECK_THROWS_AS(load_checkpoint(dir.file("a.mgac"), c.params()), IoError);
}
