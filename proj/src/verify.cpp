#include "mga/verify.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "mga/attention.hpp"
#include "mga/conv_blocks.hpp"
#include "mga/eval.hpp"
#include "mga/features.hpp"
#include "mga/model.hpp"
#include "mga/spatial_shift.hpp"

namespace mga::verify {

namespace {

constexpr double kGradTol = 1e-3;
constexpr double kGradStep = 1e-4;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

CheckResult grad_result(const std::string& name, double err) {
  std::ostringstream os;
  os << "max rel err " << err << " (tol " << kGradTol << ")";
  return {name, err <= kGradTol, os.str()};
}

Tensor sq(const Tensor& t) { return sum_all(mul(t, t)); }

// Reference shifts, re-derived from the slice-assignment equations and
// independent of both the production code and the unit-test oracles.
Tensor reference_shift(const Tensor& x, bool swapped) {
  const int c = x.extent(0), t = x.extent(1), f = x.extent(2);
  const int g = c / 4;
  Tensor out = x.clone();
  for (int ci = 0; ci < c; ++ci) {
    int group = ci / g;
    if (swapped) group = (group + 2) % 4;
    for (int ti = 0; ti < t; ++ti)
      for (int fi = 0; fi < f; ++fi) {
        int src_t = ti, src_f = fi;
        bool write = false;
        switch (group) {
          case 0: write = ti >= 1; src_t = ti - 1; break;
          case 1: write = ti <= t - 2; src_t = ti + 1; break;
          case 2: write = fi >= 1; src_f = fi - 1; break;
          case 3: write = fi <= f - 2; src_f = fi + 1; break;
        }
        if (write)
          out.values()[(static_cast<int64_t>(ci) * t + ti) * f + fi] =
              x.values()[(static_cast<int64_t>(ci) * t + src_t) * f + src_f];
      }
  }
  return out;
}

Tensor reference_matmul(const Tensor& a, const Tensor& b) {
  const int m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor out(Shape{m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a.at({i, p}) * b.at({p, j});
      out.values()[static_cast<int64_t>(i) * n + j] = acc;
    }
  return out;
}

Tensor reference_ldsa(const Tensor& x, const Tensor& w1, const Tensor& w2,
                      const Tensor& w3, const Tensor& wo) {
  const int t = x.extent(0), d = x.extent(1), c = w2.extent(1);
  Tensor pre = reference_matmul(x, w1);
  for (double& v : pre.values()) v = v > 0.0 ? v : 0.0;
  Tensor logits = reference_matmul(pre, w2);
  Tensor att(Shape{t, c});
  for (int i = 0; i < t; ++i) {
    double mx = logits.at({i, 0});
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at({i, j}));
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(logits.at({i, j}) - mx);
    for (int j = 0; j < c; ++j)
      att.values()[static_cast<int64_t>(i) * c + j] =
          std::exp(logits.at({i, j}) - mx) / z;
  }
  Tensor val = reference_matmul(x, w3);
  Tensor y(Shape{t, d});
  for (int i = 0; i < t; ++i)
    for (int k = 0; k < d; ++k) {
      double acc = 0.0;
      for (int j = 0; j < c; ++j) {
        const int s = i + j - c / 2;
        if (s < 0 || s >= t) continue;
        acc += att.at({i, j}) * val.at({s, k});
      }
      y.values()[static_cast<int64_t>(i) * d + k] = acc;
    }
  return reference_matmul(y, wo);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.values().size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace

std::vector<CheckResult> gradient_suite() {
  std::vector<CheckResult> results;
  Rng rng(2024);

  auto check = [&](const std::string& name,
                   const std::function<Tensor(const Tensor&)>& f,
                   const Tensor& x0) {
    results.push_back(grad_result(name, grad_check(f, x0, kGradStep)));
  };

  // primitive ops on random small shapes
  {
    Tensor a = random_tensor({4, 5}, rng), b = random_tensor({4, 5}, rng);
    check("op.add", [&](const Tensor& t) { return sq(add(t, b)); }, a);
    check("op.mul", [&](const Tensor& t) { return sq(mul(t, b)); }, a);
    Tensor mm_rhs = random_tensor({5, 3}, rng);
    check("op.matmul", [&](const Tensor& t) { return sq(matmul(t, mm_rhs)); }, a);
    check("op.gelu", [](const Tensor& t) { return sq(gelu(t)); },
          random_tensor({3, 4}, rng, -2.0, 2.0));
    check("op.relu", [](const Tensor& t) { return sq(relu(t)); },
          random_tensor({3, 4}, rng, -2.0, 2.0));
    check("op.sigmoid", [](const Tensor& t) { return sq(sigmoid(t)); },
          random_tensor({3, 4}, rng, -2.0, 2.0));
    check("op.tanh", [](const Tensor& t) { return sq(tanh_op(t)); },
          random_tensor({3, 4}, rng, -2.0, 2.0));
    check("op.softmax", [](const Tensor& t) { return sq(softmax(t, 1)); },
          random_tensor({3, 5}, rng, -3.0, 3.0));
    check("op.avg_pool2d", [](const Tensor& t) { return sq(avg_pool2d(t, 2, 3)); },
          random_tensor({2, 4, 6}, rng));
    Tensor conv_w = random_tensor({3, 2, 3, 3}, rng);
    check("op.conv2d", [&](const Tensor& t) { return sq(conv2d(t, conv_w, 1, 1)); },
          random_tensor({2, 5, 5}, rng));
    Tensor gamma(Shape{4}, std::vector<double>(4, 1.0));
    Tensor beta(Shape{4});
    check("op.layer_norm", [&](const Tensor& t) {
      return sq(layer_norm(t, gamma, beta));
    }, random_tensor({5, 4}, rng));
    check("op.batch_norm", [&](const Tensor& t) {
      Tensor g2(Shape{2}, {1.1, 0.9});
      Tensor b2(Shape{2}, {0.0, 0.1});
      Tensor rm(Shape{2});
      Tensor rv(Shape{2}, {1, 1});
      return sq(batch_norm(t, g2, b2, rm, rv, true, 0.9, 1e-5));
    }, random_tensor({2, 4, 4}, rng));
    Tensor ldsa_v = random_tensor({6, 4}, rng);
    check("op.ldsa_combine", [&](const Tensor& t) {
      return sq(ldsa_combine(softmax(t, 1), ldsa_v));
    }, random_tensor({6, 3}, rng));
    check("op.rel_gather", [](const Tensor& t) { return sq(rel_gather(t)); },
          random_tensor({4, 7}, rng));
    Tensor wi = random_tensor({3, 9}, rng), wh = random_tensor({3, 9}, rng);
    Tensor bi = random_tensor({9}, rng), bh = random_tensor({9}, rng);
    check("op.gru_forward_dir", [&](const Tensor& t) {
      return sq(gru_sequence(t, wi, wh, bi, bh, false));
    }, random_tensor({4, 3}, rng));
    check("op.gru_reverse_dir", [&](const Tensor& t) {
      return sq(gru_sequence(t, wi, wh, bi, bh, true));
    }, random_tensor({4, 3}, rng));
    check("op.bce_mean", [&](const Tensor& t) {
      Tensor y(Shape{3, 2}, {1, 0, 0, 1, 1, 1});
      return bce_mean(t, y);
    }, random_tensor({3, 2}, rng, 0.05, 0.95));
    check("op.mse_mean", [&](const Tensor& t) { return mse_mean(t, b); }, a);
  }

  // conv block variants
  for (auto [variant, name] :
       {std::pair{ConvBlockVariant::V_CONV, "block.v_conv"},
        std::pair{ConvBlockVariant::RV_CONV, "block.rv_conv"},
        std::pair{ConvBlockVariant::RA_CONV, "block.ra_conv"},
        std::pair{ConvBlockVariant::RH_CONV, "block.rh_conv"}}) {
    ParamRegistry reg;
    ConvBlock block("b", variant, 2, 3, rng, reg);
    check(name, [&](const Tensor& t) { return sq(block.forward(t, FwdCtx{true, nullptr, true})); },
          random_tensor({2, 5, 5}, rng));
  }

  // spatial shift module
  {
    ParamRegistry reg;
    SpatialShiftModule ss("ss", 4, rng, reg);
    check("module.spatial_shift",
          [&](const Tensor& t) { return sq(ss.forward(t)); },
          random_tensor({4, 3, 3}, rng));
  }

  // attention stages
  {
    ParamRegistry reg;
    GlobalContext gc("g", 6, 2, 12, rng, reg);
    check("module.rpe_attention",
          [&](const Tensor& t) { return sq(gc.forward(t)); },
          random_tensor({4, 6}, rng));
  }
  {
    ParamRegistry reg;
    LocalContext lc("l", 6, 3, rng, reg);
    check("module.ldsa", [&](const Tensor& t) { return sq(lc.forward(t)); },
          random_tensor({5, 6}, rng));
  }
  {
    ParamRegistry reg;
    FrameContext fc("f", 6, 5, rng, reg);
    check("module.bigru_stage",
          [&](const Tensor& t) { return sq(fc.forward(t)); },
          random_tensor({4, 6}, rng));
  }

  // full tiny model end to end
  {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.encoder.pooling = {{2, 4}, {2, 2}};
    cfg.encoder.dropout = 0.0;
    cfg.n_classes = 3;
    cfg.mga.max_seq_len = 8;
    MgaNet net(cfg, 5);
    check("model.tiny_end_to_end", [&](const Tensor& t) {
      ModelOutput out = net.forward(t, FwdCtx{true, nullptr});
      return add(sq(out.strong), sq(out.weak));
    }, random_tensor({8, 8}, rng));
  }

  return results;
}

std::vector<CheckResult> shift_oracle_suite() {
  std::vector<CheckResult> results;
  Rng rng(4096);
  int failures = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int c = rng.uniform_int(2) == 0 ? 4 : 8;
    const int t = 1 + rng.uniform_int(6);
    const int f = 1 + rng.uniform_int(6);
    Tensor x = random_tensor({c, t, f}, rng);
    const double d1 = max_abs_diff(shift1(x), reference_shift(x, false));
    const double d2 = max_abs_diff(shift2(x), reference_shift(x, true));
    worst = std::max(worst, std::max(d1, d2));
    if (d1 != 0.0 || d2 != 0.0) ++failures;
  }
  std::ostringstream os;
  os << "100 random tensors, worst deviation " << worst << " (bit-exact required)";
  results.push_back({"shift.permutation_oracle", failures == 0, os.str()});

  Tensor tiny = random_tensor({4, 1, 1}, rng);
  const bool id_ok = max_abs_diff(shift1(tiny), tiny) == 0.0 &&
                     max_abs_diff(shift2(tiny), tiny) == 0.0;
  results.push_back({"shift.identity_at_1x1", id_ok, "T=1,F=1 keeps input"});
  return results;
}

std::vector<CheckResult> ldsa_oracle_suite() {
  std::vector<CheckResult> results;
  Rng rng(8192);
  double worst = 0.0;
  for (int c : {1, 3, 5}) {
    for (int rep = 0; rep < 10; ++rep) {
      const int t = 1 + rng.uniform_int(8);
      const int d = 1 + rng.uniform_int(8);
      ParamRegistry reg;
      LocalContext lc("l", d, c, rng, reg);
      Tensor x = random_tensor({t, d}, rng);
      Tensor expect = reference_ldsa(x, lc.w1.value, lc.w2.value, lc.w3.value,
                                     lc.wo.value);
      worst = std::max(worst, max_abs_diff(lc.ldsa(x), expect));
    }
  }
  std::ostringstream os;
  os << "worst deviation " << worst << " (tol 1e-9)";
  results.push_back({"ldsa.loop_oracle", worst <= 1e-9, os.str()});
  return results;
}

std::vector<CheckResult> shape_pipeline_suite() {
  std::vector<CheckResult> results;

  // 10 s 16 kHz test tone
  std::vector<double> samples(160000);
  for (size_t i = 0; i < samples.size(); ++i)
    samples[i] = 0.3 * std::sin(2.0 * M_PI * 440.0 * i / 16000.0);
  SpectrogramConfig fcfg;
  MelSpectrogram mel = log_mel(samples, fcfg, "probe");
  const bool feat_ok = mel.values.shape() == Shape{496, 64};
  results.push_back({"pipeline.features_496x64", feat_ok,
                     "got " + shape_str(mel.values.shape())});

  ModelConfig cfg = ModelConfig::full();
  MgaNet net(cfg, 1);
  ModelOutput out = net.forward(normalize_features(mel.values), FwdCtx::eval());
  const bool strong_ok = out.strong.shape() == Shape{124, 10};
  const bool weak_ok = out.weak.shape() == Shape{10};
  results.push_back({"pipeline.strong_124x10", strong_ok,
                     "got " + shape_str(out.strong.shape())});
  results.push_back({"pipeline.weak_10", weak_ok,
                     "got " + shape_str(out.weak.shape())});

  bool in_range = true;
  for (double p : out.strong.values())
    if (!(p > 0.0 && p < 1.0)) in_range = false;
  for (double p : out.weak.values())
    if (!(p > 0.0 && p < 1.0)) in_range = false;
  results.push_back({"pipeline.probabilities_open_unit_interval", in_range, ""});

  // attention normalization on the real sequence length
  Rng rng(11);
  double worst_row = 0.0;
  {
    ParamRegistry reg;
    GlobalContext gc("g", 16, 2, 130, rng, reg);
    Tensor x = random_tensor({125, 16}, rng);
    for (const Tensor& att : gc.attention_weights(x)) {
      for (int i = 0; i < att.extent(0); ++i) {
        double s = 0.0;
        for (int j = 0; j < att.extent(1); ++j) s += att.at({i, j});
        worst_row = std::max(worst_row, std::abs(s - 1.0));
      }
    }
  }
  std::ostringstream os;
  os << "worst |row sum - 1| = " << worst_row;
  results.push_back({"pipeline.attention_rows_stochastic", worst_row <= 1e-9,
                     os.str()});
  return results;
}

std::vector<CheckResult> metric_fixture_suite() {
  std::vector<CheckResult> results;
  EvalConfig cfg;

  struct Case {
    std::string name;
    std::vector<Event> refs, preds;
    std::vector<std::string> classes;
    double macro;
  };
  const std::vector<Case> cases = {
      {"collar_match", {{"c", 1.00, 2.00, "Dog"}}, {{"c", 1.10, 2.05, "Dog"}},
       {"Dog"}, 1.0},
      {"onset_miss", {{"c", 1.00, 2.00, "Dog"}}, {{"c", 1.30, 2.00, "Dog"}},
       {"Dog"}, 0.0},
      {"exact_onset_collar", {{"c", 1.00, 3.00, "Dog"}}, {{"c", 1.20, 3.00, "Dog"}},
       {"Dog"}, 1.0},
      {"exact_offset_collar", {{"c", 5.00, 6.00, "Dog"}}, {{"c", 5.00, 6.20, "Dog"}},
       {"Dog"}, 1.0},
      {"pct_offset_collar", {{"c", 0.00, 10.00, "Dog"}}, {{"c", 0.10, 8.10, "Dog"}},
       {"Dog"}, 1.0},
      {"one_to_one", {{"c", 1.00, 2.00, "Dog"}},
       {{"c", 1.02, 2.02, "Dog"}, {"c", 1.05, 2.05, "Dog"}}, {"Dog"}, 2.0 / 3.0},
      {"empty_refs_and_preds", {}, {}, {"Dog"}, 0.0},
      {"empty_preds", {{"c", 1.0, 2.0, "Dog"}}, {}, {"Dog"}, 0.0},
      {"exact_equality", {{"c", 1.0, 2.0, "Dog"}}, {{"c", 1.0, 2.0, "Dog"}},
       {"Dog"}, 1.0},
      {"class_isolation", {{"c", 1.0, 2.0, "Dog"}}, {{"c", 1.0, 2.0, "Cat"}},
       {"Cat", "Dog"}, 0.0},
  };
  for (const Case& cs : cases) {
    const double macro = event_based_f1(cs.refs, cs.preds, cs.classes, cfg).macro_f1;
    std::ostringstream os;
    os << "macro " << macro << " expected " << cs.macro;
    results.push_back({"metric." + cs.name, std::abs(macro - cs.macro) <= 1e-9,
                       os.str()});
  }
  return results;
}

std::vector<CheckResult> run_all() {
  std::vector<CheckResult> all;
  for (auto suite : {gradient_suite, shift_oracle_suite, ldsa_oracle_suite,
                     shape_pipeline_suite, metric_fixture_suite}) {
    auto results = suite();
    all.insert(all.end(), results.begin(), results.end());
  }
  return all;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace mga::verify
