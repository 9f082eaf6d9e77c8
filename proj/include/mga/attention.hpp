#pragma once

#include <string>
#include <vector>

#include "mga/nn.hpp"

namespace mga {

enum class MgaOrder { COARSE_FINE, FINE_COARSE };

MgaOrder mga_order_from_string(const std::string& s);
std::string to_string(MgaOrder o);

struct MgaConfig {
  int d = 144;
  int heads = 4;
  int context = 3;  // LDSA window width c
  int gru_hidden = 512;
  int max_seq_len = 125;  // bound for the relative-position table
  MgaOrder order = MgaOrder::COARSE_FINE;
  bool stage_global = true;
  bool stage_local = true;
  bool stage_frame = true;

  void validate() const;
};

/// Multi-head self-attention with learned relative-position embeddings and
/// global content/position bias vectors (Transformer-XL factorization):
///   logit[i,j] = ((q_i+u)·k_j + (q_i+v)·r_{i-j}) / sqrt(d_head)
/// Stage output is RA(LN(x)) + x.
class GlobalContext {
 public:
  GlobalContext() = default;
  GlobalContext(const std::string& name, int d, int heads, int max_seq_len,
                Rng& rng, ParamRegistry& reg);

  Tensor forward(const Tensor& x) const;

  /// Post-softmax attention matrices, one [T,T] tensor per head.
  std::vector<Tensor> attention_weights(const Tensor& x) const;

  LayerNorm ln;
  Parameter wq, wk, wv, wo;
  Parameter rpe;   // [2*max_seq_len-1, d], row m holds offset m-(max_seq_len-1)
  Parameter u, v;  // [1, d] content / position biases
  int d = 0, heads = 0, max_seq_len = 0;

 private:
  Tensor attend(const Tensor& h, std::vector<Tensor>* weights_out) const;
};

/// Local dense synthesizer attention over a window of width `context`:
/// weights come from the current frame's features, not dot products.
/// Stage output is LDSA(LN(x)) + x.
class LocalContext {
 public:
  LocalContext() = default;
  LocalContext(const std::string& name, int d, int context, Rng& rng,
               ParamRegistry& reg);

  Tensor forward(const Tensor& x) const;
  Tensor ldsa(const Tensor& h) const;

  /// The synthesized window weights [T,c] (row-stochastic).
  Tensor attention_weights(const Tensor& x) const;

  LayerNorm ln;
  Parameter w1, w2, w3, wo;
  int d = 0, context = 0;
};

class BiGru {
 public:
  BiGru() = default;
  BiGru(const std::string& name, int input, int hidden, Rng& rng,
        ParamRegistry& reg);

  Tensor forward(const Tensor& x) const;  // [T,input] -> [T,2*hidden]

  Parameter fwd_wi, fwd_wh, fwd_bi, fwd_bh;
  Parameter bwd_wi, bwd_wh, bwd_bi, bwd_bh;
  int input = 0, hidden = 0;
};

/// Frame stage: Linear(ReLU(proj(BiGRU(LN(x))) + x)). The BiGRU output is
/// projected back to d before the residual add.
class FrameContext {
 public:
  FrameContext() = default;
  FrameContext(const std::string& name, int d, int hidden, Rng& rng,
               ParamRegistry& reg);

  Tensor forward(const Tensor& x) const;

  LayerNorm ln;
  BiGru gru;
  Linear proj;        // 2*hidden -> d
  Linear out_linear;  // d -> d
};

/// One multi-grained attention module: global / local / frame stages in
/// Coarse-Fine or Fine-Coarse order, each stage skippable for ablations.
/// `token_rows` leading rows (the class token) bypass the frame stage.
class MgaModule {
 public:
  MgaModule() = default;
  MgaModule(const std::string& name, const MgaConfig& cfg, Rng& rng,
            ParamRegistry& reg);

  Tensor forward(const Tensor& x, int token_rows = 0) const;

  MgaConfig cfg;
  GlobalContext global;
  LocalContext local;
  FrameContext frame;

 private:
  Tensor frame_with_bypass(const Tensor& x, int token_rows) const;
};

}  // namespace mga
