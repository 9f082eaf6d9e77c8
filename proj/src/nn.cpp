#include "mga/nn.hpp"

#include <cmath>

namespace mga {

void ParamRegistry::add(const Parameter& p) {
  if (by_name_.count(p.name))
    throw ConfigError("duplicate parameter name: " + p.name);
  by_name_[p.name] = params_.size();
  params_.push_back(p);
}

std::vector<const Parameter*> ParamRegistry::trainable() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : params_)
    if (p.trainable) out.push_back(&p);
  return out;
}

const Parameter* ParamRegistry::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &params_[it->second];
}

int64_t ParamRegistry::total_elements() const {
  int64_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

int64_t ParamRegistry::trainable_elements() const {
  int64_t n = 0;
  for (const Parameter& p : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

void ParamRegistry::clear_grads() const {
  for (const Parameter& p : params_) {
    Tensor t = p.value;
    t.clear_grad();
  }
}

void init_fanin_uniform(Tensor& w, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
}

void init_normal(Tensor& w, double sigma, Rng& rng) {
  for (double& v : w.values()) v = rng.normal(0.0, sigma);
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng,
               ParamRegistry& reg) {
  w.value = Tensor(Shape{in, out});
  w.name = name + ".w";
  init_fanin_uniform(w.value, in, rng);
  w.value.set_tracked();
  b.value = Tensor(Shape{out});
  b.name = name + ".b";
  b.value.set_tracked();
  reg.add(w);
  reg.add(b);
}

Tensor Linear::forward(const Tensor& x) const {
  return add_rowvec(matmul(x, w.value), b.value);
}

BatchNorm2d::BatchNorm2d(const std::string& name, int channels,
                         ParamRegistry& reg, double momentum_, double eps_)
    : momentum(momentum_), eps(eps_) {
  gamma.value = Tensor(Shape{channels}, std::vector<double>(channels, 1.0));
  gamma.name = name + ".gamma";
  gamma.value.set_tracked();
  beta.value = Tensor(Shape{channels});
  beta.name = name + ".beta";
  beta.value.set_tracked();
  running_mean.value = Tensor(Shape{channels});
  running_mean.name = name + ".running_mean";
  running_mean.trainable = false;
  running_var.value = Tensor(Shape{channels}, std::vector<double>(channels, 1.0));
  running_var.name = name + ".running_var";
  running_var.trainable = false;
  reg.add(gamma);
  reg.add(beta);
  reg.add(running_mean);
  reg.add(running_var);
}

Tensor BatchNorm2d::forward(const Tensor& x, const FwdCtx& ctx) {
  const bool clip_stats = ctx.train || ctx.clip_stats;
  return batch_norm(x, gamma.value, beta.value, running_mean.value,
                    running_var.value, clip_stats, momentum, eps,
                    /*update_running=*/ctx.train);
}

LayerNorm::LayerNorm(const std::string& name, int dim, ParamRegistry& reg) {
  gamma.value = Tensor(Shape{dim}, std::vector<double>(dim, 1.0));
  gamma.name = name + ".gamma";
  gamma.value.set_tracked();
  beta.value = Tensor(Shape{dim});
  beta.name = name + ".beta";
  beta.value.set_tracked();
  reg.add(gamma);
  reg.add(beta);
}

Tensor LayerNorm::forward(const Tensor& x) const {
  return layer_norm(x, gamma.value, beta.value);
}

Tensor maybe_dropout(const Tensor& x, double rate, const FwdCtx& ctx) {
  if (!ctx.train || rate <= 0.0) return x;
  if (!ctx.rng) throw UsageError("train-mode forward needs an RNG for dropout");
  return dropout(x, rate, *ctx.rng);
}

}  // namespace mga
