#include "mga/attention.hpp"

#include <cmath>

namespace mga {

MgaOrder mga_order_from_string(const std::string& s) {
  if (s == "coarse_fine") return MgaOrder::COARSE_FINE;
  if (s == "fine_coarse") return MgaOrder::FINE_COARSE;
  throw ConfigError("unknown stage order: " + s +
                    " (want coarse_fine|fine_coarse)");
}

std::string to_string(MgaOrder o) {
  return o == MgaOrder::COARSE_FINE ? "coarse_fine" : "fine_coarse";
}

void MgaConfig::validate() const {
  if (d <= 0 || heads <= 0 || d % heads != 0)
    throw ConfigError("attention width " + std::to_string(d) +
                      " must divide evenly across " + std::to_string(heads) +
                      " heads");
  if (context < 1 || context % 2 == 0)
    throw ConfigError("context width must be odd and >= 1, got " +
                      std::to_string(context));
  if (gru_hidden <= 0) throw ConfigError("gru_hidden must be positive");
  if (max_seq_len < 1) throw ConfigError("max_seq_len must be positive");
  if (!stage_global && !stage_local && !stage_frame)
    throw ConfigError("at least one attention stage must be enabled");
}

GlobalContext::GlobalContext(const std::string& name, int d_, int heads_,
                             int max_seq_len_, Rng& rng, ParamRegistry& reg)
    : d(d_), heads(heads_), max_seq_len(max_seq_len_) {
  ln = LayerNorm(name + ".ln", d, reg);
  auto init_map = [&](Parameter& p, const std::string& n) {
    p.value = Tensor(Shape{d, d});
    p.name = n;
    init_fanin_uniform(p.value, d, rng);
    p.value.set_tracked();
    reg.add(p);
  };
  init_map(wq, name + ".wq");
  init_map(wk, name + ".wk");
  init_map(wv, name + ".wv");
  init_map(wo, name + ".wo");
  rpe.value = Tensor(Shape{2 * max_seq_len - 1, d});
  rpe.name = name + ".rpe";
  init_normal(rpe.value, 0.02, rng);
  rpe.value.set_tracked();
  reg.add(rpe);
  u.value = Tensor(Shape{1, d});
  u.name = name + ".u";
  u.value.set_tracked();
  reg.add(u);
  v.value = Tensor(Shape{1, d});
  v.name = name + ".v";
  v.value.set_tracked();
  reg.add(v);
}

Tensor GlobalContext::attend(const Tensor& h,
                             std::vector<Tensor>* weights_out) const {
  const int t = h.extent(0);
  if (t > max_seq_len)
    throw ConfigError("sequence length " + std::to_string(t) +
                      " exceeds the relative-position table (max " +
                      std::to_string(max_seq_len) + ")");
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = matmul(h, wq.value);
  Tensor k = matmul(h, wk.value);
  Tensor val = matmul(h, wv.value);
  // offsets i-j in [-(t-1), t-1] sit centered in the table
  Tensor r = slice_rows(rpe.value, max_seq_len - t, max_seq_len + t - 1);

  std::vector<Tensor> head_outs;
  head_outs.reserve(heads);
  for (int hd = 0; hd < heads; ++hd) {
    const int c0 = hd * dh, c1 = (hd + 1) * dh;
    Tensor qh = slice_cols(q, c0, c1);
    Tensor kh = slice_cols(k, c0, c1);
    Tensor vh = slice_cols(val, c0, c1);
    Tensor rh = slice_cols(r, c0, c1);
    Tensor qu = add_rowvec(qh, slice_cols(u.value, c0, c1));
    Tensor qv = add_rowvec(qh, slice_cols(v.value, c0, c1));
    Tensor content = matmul(qu, transpose(kh));             // [T,T]
    Tensor position = rel_gather(matmul(qv, transpose(rh)));  // [T,T]
    Tensor att = softmax(mul_scalar(add(content, position), scale), 1);
    if (weights_out) weights_out->push_back(att);
    head_outs.push_back(matmul(att, vh));
  }
  return matmul(concat_cols(head_outs), wo.value);
}

Tensor GlobalContext::forward(const Tensor& x) const {
  return add(attend(ln.forward(x), nullptr), x);
}

std::vector<Tensor> GlobalContext::attention_weights(const Tensor& x) const {
  std::vector<Tensor> weights;
  attend(ln.forward(x), &weights);
  return weights;
}

LocalContext::LocalContext(const std::string& name, int d_, int context_,
                           Rng& rng, ParamRegistry& reg)
    : d(d_), context(context_) {
  ln = LayerNorm(name + ".ln", d, reg);
  auto init_map = [&](Parameter& p, const std::string& n, int rows, int cols) {
    p.value = Tensor(Shape{rows, cols});
    p.name = n;
    init_fanin_uniform(p.value, rows, rng);
    p.value.set_tracked();
    reg.add(p);
  };
  init_map(w1, name + ".w1", d, d);
  init_map(w2, name + ".w2", d, context);
  init_map(w3, name + ".w3", d, d);
  init_map(wo, name + ".wo", d, d);
}

Tensor LocalContext::ldsa(const Tensor& h) const {
  Tensor att = softmax(matmul(relu(matmul(h, w1.value)), w2.value), 1);  // [T,c]
  Tensor val = matmul(h, w3.value);                                     // [T,d]
  return matmul(ldsa_combine(att, val), wo.value);
}

Tensor LocalContext::forward(const Tensor& x) const {
  return add(ldsa(ln.forward(x)), x);
}

Tensor LocalContext::attention_weights(const Tensor& x) const {
  Tensor h = ln.forward(x);
  return softmax(matmul(relu(matmul(h, w1.value)), w2.value), 1);
}

BiGru::BiGru(const std::string& name, int input_, int hidden_, Rng& rng,
             ParamRegistry& reg)
    : input(input_), hidden(hidden_) {
  auto init_gru = [&](Parameter& wi, Parameter& wh, Parameter& bi,
                      Parameter& bh, const std::string& dir) {
    wi.value = Tensor(Shape{input, 3 * hidden});
    wi.name = name + "." + dir + ".wi";
    init_fanin_uniform(wi.value, input, rng);
    wi.value.set_tracked();
    reg.add(wi);
    wh.value = Tensor(Shape{hidden, 3 * hidden});
    wh.name = name + "." + dir + ".wh";
    init_fanin_uniform(wh.value, hidden, rng);
    wh.value.set_tracked();
    reg.add(wh);
    bi.value = Tensor(Shape{3 * hidden});
    bi.name = name + "." + dir + ".bi";
    bi.value.set_tracked();
    reg.add(bi);
    bh.value = Tensor(Shape{3 * hidden});
    bh.name = name + "." + dir + ".bh";
    bh.value.set_tracked();
    reg.add(bh);
  };
  init_gru(fwd_wi, fwd_wh, fwd_bi, fwd_bh, "fwd");
  init_gru(bwd_wi, bwd_wh, bwd_bi, bwd_bh, "bwd");
}

Tensor BiGru::forward(const Tensor& x) const {
  Tensor f = gru_sequence(x, fwd_wi.value, fwd_wh.value, fwd_bi.value,
                          fwd_bh.value, false);
  Tensor b = gru_sequence(x, bwd_wi.value, bwd_wh.value, bwd_bi.value,
                          bwd_bh.value, true);
  return concat_cols({f, b});
}

FrameContext::FrameContext(const std::string& name, int d, int hidden,
                           Rng& rng, ParamRegistry& reg) {
  ln = LayerNorm(name + ".ln", d, reg);
  gru = BiGru(name + ".bigru", d, hidden, rng, reg);
  proj = Linear(name + ".proj", 2 * hidden, d, rng, reg);
  out_linear = Linear(name + ".out", d, d, rng, reg);
}

Tensor FrameContext::forward(const Tensor& x) const {
  Tensor recur = proj.forward(gru.forward(ln.forward(x)));
  return out_linear.forward(relu(add(recur, x)));
}

MgaModule::MgaModule(const std::string& name, const MgaConfig& cfg_, Rng& rng,
                     ParamRegistry& reg)
    : cfg(cfg_) {
  cfg.validate();
  if (cfg.stage_global)
    global = GlobalContext(name + ".global", cfg.d, cfg.heads, cfg.max_seq_len,
                           rng, reg);
  if (cfg.stage_local)
    local = LocalContext(name + ".local", cfg.d, cfg.context, rng, reg);
  if (cfg.stage_frame)
    frame = FrameContext(name + ".frame", cfg.d, cfg.gru_hidden, rng, reg);
}

Tensor MgaModule::frame_with_bypass(const Tensor& x, int token_rows) const {
  if (token_rows == 0) return frame.forward(x);
  const int t = x.extent(0);
  Tensor tok = slice_rows(x, 0, token_rows);
  Tensor rest = frame.forward(slice_rows(x, token_rows, t));
  return concat_rows({tok, rest});
}

Tensor MgaModule::forward(const Tensor& x, int token_rows) const {
  Tensor h = x;
  if (cfg.order == MgaOrder::COARSE_FINE) {
    if (cfg.stage_global) h = global.forward(h);
    if (cfg.stage_local) h = local.forward(h);
    if (cfg.stage_frame) h = frame_with_bypass(h, token_rows);
  } else {
    if (cfg.stage_frame) h = frame_with_bypass(h, token_rows);
    if (cfg.stage_local) h = local.forward(h);
    if (cfg.stage_global) h = global.forward(h);
  }
  return h;
}

}  // namespace mga
