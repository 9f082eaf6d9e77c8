#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mga/ops.hpp"
#include "mga/tensor.hpp"

namespace mga {

/// A named learnable tensor. `trainable=false` marks state buffers
/// (BN running stats) that are checkpointed and EMA-averaged but never
/// touched by the optimizer.
struct Parameter {
  Tensor value;
  std::string name;
  bool trainable = true;
};

/// Flat, ordered view over every Parameter of a model. Entries alias the
/// modules' tensors (Tensor is a shared handle), so they stay valid when
/// module objects move. Construction order is deterministic, so seeded
/// init and checkpoints line up across runs.
class ParamRegistry {
 public:
  void add(const Parameter& p);

  const std::vector<Parameter>& all() const { return params_; }
  std::vector<const Parameter*> trainable() const;

  const Parameter* find(const std::string& name) const;

  int64_t total_elements() const;
  int64_t trainable_elements() const;
  void clear_grads() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, size_t> by_name_;
};

/// Init helpers consume `rng` in registration order; same seed, same model.
void init_fanin_uniform(Tensor& w, int fan_in, Rng& rng);
void init_normal(Tensor& w, double sigma, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng, ParamRegistry& reg);

  Tensor forward(const Tensor& x) const;  // x [T,in] -> [T,out]

  Parameter w, b;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels, ParamRegistry& reg,
              double momentum = 0.9, double eps = 1e-5);

  Tensor forward(const Tensor& x, const struct FwdCtx& ctx);

  Parameter gamma, beta;
  Parameter running_mean, running_var;  // buffers
  double momentum = 0.9;
  double eps = 1e-5;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim, ParamRegistry& reg);

  Tensor forward(const Tensor& x) const;

  Parameter gamma, beta;
};

/// Forward-pass mode. Training uses per-clip batch statistics, updates BN
/// running stats, and applies dropout. Inference also normalizes with the
/// clip's own statistics (each clip is its own batch here, so running
/// averages do not describe any individual clip) but is side-effect free
/// and deterministic. Eval is the plain running-stats path.
struct FwdCtx {
  bool train = false;
  Rng* rng = nullptr;
  bool clip_stats = false;  // BN normalizes with this input's statistics

  static FwdCtx eval() { return FwdCtx{false, nullptr, false}; }
  static FwdCtx training(Rng& rng) { return FwdCtx{true, &rng, true}; }
  static FwdCtx inference() { return FwdCtx{false, nullptr, true}; }
};

/// Inverted dropout applied only when ctx.train.
Tensor maybe_dropout(const Tensor& x, double rate, const FwdCtx& ctx);

}  // namespace mga
