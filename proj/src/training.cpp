#include "mga/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mga/features.hpp"

namespace mga {

void TrainingConfig::validate() const {
  if (!(ema_alpha >= 0.0 && ema_alpha < 1.0))
    throw ConfigError("ema_alpha must lie in [0,1)");
  if (consistency_max_weight < 0.0 || noise_sigma < 0.0)
    throw ConfigError("weights must be non-negative");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (batch_strong < 1 || batch_weak < 0 || batch_unlabeled < 0)
    throw ConfigError("batch composition needs at least one strong clip");
  if (ramp_epochs < 1) throw ConfigError("ramp_epochs must be >= 1");
  if (warmup_steps < 1) throw ConfigError("warmup_steps must be >= 1");
}

double consistency_weight(const TrainingConfig& cfg, int epoch) {
  const double progress =
      std::min(1.0, static_cast<double>(epoch) / cfg.ramp_epochs);
  const double ramp = std::exp(-5.0 * (1.0 - progress) * (1.0 - progress));
  return cfg.consistency_max_weight * ramp;
}


LossBreakdown BatchLoss::breakdown() const {
  LossBreakdown b;
  b.strong_bce = strong_bce.item();
  b.weak_bce = weak_bce.item();
  b.consistency_mse = consistency_mse.item();
  b.total = total.item();
  return b;
}

BatchLoss compute_loss(const std::vector<ClipLossInputs>& clips,
                       double consistency_w) {
  if (clips.empty()) throw DataError("compute_loss: empty batch");

  Tensor strong_loss = Tensor::scalar(0.0);
  int strong_clips = 0;
  Tensor weak_loss = Tensor::scalar(0.0);
  int weak_clips = 0;
  Tensor consistency = Tensor::scalar(0.0);
  int teacher_clips = 0;

  for (const ClipLossInputs& clip : clips) {
    if (clip.strong_target) {
      strong_loss = add(strong_loss,
                        bce_mean(clip.student.strong, *clip.strong_target));
      ++strong_clips;
    }
    if (clip.weak_target) {
      weak_loss = add(weak_loss, bce_mean(clip.student.weak, *clip.weak_target));
      ++weak_clips;
    }
    if (clip.has_teacher) {
      // teacher outputs are plain constants: no gradient flows into them
      const int flat = clip.student.strong.extent(0) *
                       clip.student.strong.extent(1);
      const int nc = clip.student.weak.extent(0);
      Tensor s = concat_rows({reshape(clip.student.strong, {flat, 1}),
                              reshape(clip.student.weak, {nc, 1})});
      Tensor t = concat_rows({reshape(clip.teacher.strong, {flat, 1}),
                              reshape(clip.teacher.weak, {nc, 1})});
      consistency = add(consistency, mse_mean(s, t));
      ++teacher_clips;
    }
  }
  if (strong_clips > 0) strong_loss = mul_scalar(strong_loss, 1.0 / strong_clips);
  if (weak_clips > 0) weak_loss = mul_scalar(weak_loss, 1.0 / weak_clips);
  if (teacher_clips > 0)
    consistency = mul_scalar(consistency, 1.0 / teacher_clips);

  BatchLoss loss;
  loss.strong_bce = strong_loss;
  loss.weak_bce = weak_loss;
  loss.consistency_mse = consistency;
  loss.total = add(add(strong_loss, weak_loss),
                   mul_scalar(consistency, consistency_w));
  if (!std::isfinite(loss.total.item())) {
    std::ostringstream os;
    os << "non-finite loss: strong=" << strong_loss.item()
       << " weak=" << weak_loss.item()
       << " consistency=" << consistency.item() << " w=" << consistency_w;
    throw NumericError(os.str());
  }
  return loss;
}

void ema_update(const ParamRegistry& teacher, const ParamRegistry& student,
                double alpha) {
  const auto& tp = teacher.all();
  const auto& sp = student.all();
  if (tp.size() != sp.size())
    throw ConfigError("EMA: registries differ in size (" +
                      std::to_string(tp.size()) + " vs " +
                      std::to_string(sp.size()) + ")");
  for (size_t i = 0; i < tp.size(); ++i) {
    if (tp[i].name != sp[i].name || tp[i].value.shape() != sp[i].value.shape())
      throw ConfigError("EMA: registry mismatch at '" + tp[i].name + "' vs '" +
                        sp[i].name + "'");
    Tensor tv = tp[i].value;
    const auto& sv = sp[i].value.values();
    auto& t = tv.values();
    for (size_t k = 0; k < t.size(); ++k)
      t[k] = alpha * t[k] + (1.0 - alpha) * sv[k];
  }
}

AdamOptimizer::AdamOptimizer(double lr, int warmup_steps, double beta1,
                             double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      warmup_steps_(warmup_steps) {}

void AdamOptimizer::step(const ParamRegistry& params) {
  ++t_;
  const double warm =
      std::min(1.0, static_cast<double>(t_) / static_cast<double>(warmup_steps_));
  const double lr = lr_ * warm;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const Parameter* p : params.trainable()) {
    auto& [m, v] = state_[p->name];
    if (m.empty()) {
      m.assign(p->value.size(), 0.0);
      v.assign(p->value.size(), 0.0);
    }
    Tensor value = p->value;
    const bool has_grad = value.has_grad();
    auto& val = value.values();
    for (size_t i = 0; i < val.size(); ++i) {
      const double g = has_grad ? value.grad()[i] : 0.0;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void DatasetSplit::validate_disjoint() const {
  std::set<std::string> seen;
  auto check = [&](const std::vector<std::string>& ids, const char* split) {
    for (const std::string& id : ids)
      if (!seen.insert(id).second)
        throw DataError("clip '" + id + "' appears in more than one split (" +
                        split + ")");
  };
  check(strong_ids, "strong");
  check(weak_ids, "weak");
  check(unlabeled_ids, "unlabeled");
}

Tensor rasterize_events(const std::vector<Event>& clip_events,
                        const std::vector<std::string>& classes,
                        int out_frames, double hop_seconds) {
  Tensor target(Shape{out_frames, static_cast<int>(classes.size())});
  for (const Event& e : clip_events) {
    auto it = std::find(classes.begin(), classes.end(), e.label);
    if (it == classes.end())
      throw DataError("event label '" + e.label + "' not in the class set");
    const int c = static_cast<int>(it - classes.begin());
    for (int k = 0; k < out_frames; ++k) {
      const double f0 = k * hop_seconds, f1 = (k + 1) * hop_seconds;
      const double overlap = std::min(e.offset, f1) - std::max(e.onset, f0);
      if (overlap >= 0.5 * hop_seconds)
        target.values()[static_cast<int64_t>(k) * classes.size() + c] = 1.0;
    }
  }
  return target;
}

Tensor weak_target_from_events(const std::vector<Event>& clip_events,
                               const std::vector<std::string>& classes) {
  Tensor target(Shape{static_cast<int>(classes.size())});
  for (const Event& e : clip_events) {
    auto it = std::find(classes.begin(), classes.end(), e.label);
    if (it == classes.end())
      throw DataError("event label '" + e.label + "' not in the class set");
    target.values()[it - classes.begin()] = 1.0;
  }
  return target;
}

namespace {

std::vector<std::string> read_id_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open clip list: " + path);
  std::vector<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line == "filename") continue;
    ids.push_back(line);
  }
  return ids;
}

Tensor load_normalized_features(const std::string& features_dir,
                                const std::string& clip_id) {
  const std::string path =
      (std::filesystem::path(features_dir) / (clip_id + ".mgaf")).string();
  return normalize_features(read_features(path));
}

}  // namespace

TrainDataset load_train_dataset(const std::string& corpus_dir,
                                const std::string& features_dir,
                                const std::vector<std::string>& classes,
                                int out_frames, double clip_seconds) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(features_dir))
    throw IoError("features directory not found: " + features_dir);
  if (!fs::is_directory(corpus_dir))
    throw IoError("corpus directory not found: " + corpus_dir);

  TrainDataset data;
  data.class_names = classes;
  const double hop = clip_seconds / out_frames;

  auto strong_events = read_event_tsv((fs::path(corpus_dir) / "strong.tsv").string());
  std::map<std::string, std::vector<Event>> by_clip;
  for (const Event& e : strong_events) by_clip[e.clip_id].push_back(e);
  for (auto& [clip, events] : by_clip) {
    data.split.strong_ids.push_back(clip);
    data.strong_targets[clip] = rasterize_events(events, classes, out_frames, hop);
    data.weak_targets[clip] = weak_target_from_events(events, classes);
  }

  for (const WeakLabels& row :
       read_weak_tsv((fs::path(corpus_dir) / "weak.tsv").string())) {
    data.split.weak_ids.push_back(row.clip_id);
    Tensor target(Shape{static_cast<int>(classes.size())});
    for (const std::string& label : row.labels) {
      auto it = std::find(classes.begin(), classes.end(), label);
      if (it == classes.end())
        throw DataError("weak label '" + label + "' not in the class set");
      target.values()[it - classes.begin()] = 1.0;
    }
    data.weak_targets[row.clip_id] = target;
  }

  data.split.unlabeled_ids =
      read_id_list((fs::path(corpus_dir) / "unlabeled.tsv").string());
  data.split.validate_disjoint();

  auto load_all = [&](const std::vector<std::string>& ids) {
    for (const std::string& id : ids)
      data.features[id] = load_normalized_features(features_dir, id);
  };
  load_all(data.split.strong_ids);
  load_all(data.split.weak_ids);
  load_all(data.split.unlabeled_ids);
  return data;
}

Trainer::Trainer(const ModelConfig& model_cfg, const TrainingConfig& train_cfg,
                 TrainDataset data, uint64_t model_seed)
    : cfg_(train_cfg),
      data_(std::move(data)),
      student_(std::make_unique<MgaNet>(model_cfg, model_seed)),
      teacher_(std::make_unique<MgaNet>(model_cfg, model_seed)),
      opt_(train_cfg.lr, train_cfg.warmup_steps) {
  cfg_.validate();
  data_.split.validate_disjoint();
  if (data_.split.strong_ids.empty())
    throw DataError("training needs at least one strongly labeled clip");
}

int Trainer::steps_per_epoch() const {
  const int n = static_cast<int>(data_.split.strong_ids.size());
  return (n + cfg_.batch_strong - 1) / cfg_.batch_strong;
}

Trainer::Batch Trainer::sample_batch(int step,
                                     const std::vector<std::string>& strong_order,
                                     Rng& rng) const {
  Batch batch;
  const int n_strong = static_cast<int>(strong_order.size());
  for (int i = 0; i < cfg_.batch_strong; ++i)
    batch.strong.push_back(
        strong_order[(step * cfg_.batch_strong + i) % n_strong]);
  const auto& weak = data_.split.weak_ids;
  for (int i = 0; i < cfg_.batch_weak && !weak.empty(); ++i)
    batch.weak.push_back(weak[rng.uniform_int(static_cast<int>(weak.size()))]);
  const auto& unlabeled = data_.split.unlabeled_ids;
  for (int i = 0; i < cfg_.batch_unlabeled && !unlabeled.empty(); ++i)
    batch.unlabeled.push_back(
        unlabeled[rng.uniform_int(static_cast<int>(unlabeled.size()))]);
  return batch;
}

std::vector<LossBreakdown> Trainer::run_epoch(int epoch) {
  Rng order_rng(cfg_.seed, 0x0a11ce00ULL + static_cast<uint64_t>(epoch));
  // independent streams so dropping the teacher path cannot disturb the
  // student's draws
  Rng student_noise_rng(cfg_.seed, 0xb0b00000ULL + static_cast<uint64_t>(epoch));
  Rng teacher_noise_rng(cfg_.seed, 0xfeed0000ULL + static_cast<uint64_t>(epoch));
  Rng student_rng(cfg_.seed, 0xcafe0000ULL + static_cast<uint64_t>(epoch));
  Rng teacher_rng(cfg_.seed, 0xdead0000ULL + static_cast<uint64_t>(epoch));

  std::vector<std::string> order = data_.split.strong_ids;
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[order_rng.uniform_int(static_cast<int>(i))]);

  std::vector<LossBreakdown> losses;
  const int steps = steps_per_epoch();
  for (int s = 0; s < steps; ++s) {
    Batch batch = sample_batch(s, order, order_rng);
    losses.push_back(train_step(batch, epoch, student_noise_rng,
                                 teacher_noise_rng, student_rng, teacher_rng));
  }
  return losses;
}

LossBreakdown Trainer::train_step(const Batch& batch, int epoch,
                                  Rng& student_noise_rng, Rng& teacher_noise_rng,
                                  Rng& student_rng, Rng& teacher_rng) {
  const double w = cfg_.use_mean_teacher ? consistency_weight(cfg_, epoch) : 0.0;

  std::vector<std::string> all_ids;
  std::vector<int> kinds;  // 0 strong, 1 weak, 2 unlabeled
  for (const auto& id : batch.strong) {
    all_ids.push_back(id);
    kinds.push_back(0);
  }
  for (const auto& id : batch.weak) {
    all_ids.push_back(id);
    kinds.push_back(1);
  }
  for (const auto& id : batch.unlabeled) {
    all_ids.push_back(id);
    kinds.push_back(2);
  }

  auto noisy = [&](const Tensor& feats, Rng& rng) {
    if (cfg_.noise_sigma <= 0.0) return feats;
    Tensor out = feats.clone();
    for (double& v : out.values()) v += rng.normal(0.0, cfg_.noise_sigma);
    return out;
  };

  student_->params().clear_grads();

  Tape tape;
  FwdCtx student_ctx = FwdCtx::training(student_rng);

  std::vector<ClipLossInputs> clips;
  clips.reserve(all_ids.size());
  for (size_t i = 0; i < all_ids.size(); ++i) {
    const std::string& id = all_ids[i];
    const Tensor& feats = data_.features.at(id);
    ClipLossInputs clip;
    clip.student = student_->forward(noisy(feats, student_noise_rng), student_ctx);
    if (cfg_.use_mean_teacher) {
      NoGrad ng;  // teacher runs outside the tape: no gradient can reach it
      FwdCtx teacher_ctx = FwdCtx::training(teacher_rng);
      clip.teacher = teacher_->forward(noisy(feats, teacher_noise_rng), teacher_ctx);
      clip.has_teacher = true;
    }
    if (kinds[i] == 0) clip.strong_target = &data_.strong_targets.at(id);
    if (kinds[i] != 2) clip.weak_target = &data_.weak_targets.at(id);
    clips.push_back(std::move(clip));
  }

  BatchLoss loss = compute_loss(clips, w);
  LossBreakdown breakdown = loss.breakdown();
  breakdown.consistency_weight = w;

  tape.backward(loss.total);
  opt_.step(student_->params());
  if (cfg_.use_mean_teacher)
    ema_update(teacher_->params(), student_->params(), cfg_.ema_alpha);
  return breakdown;
}

std::vector<Event> predict_events(MgaNet& model, const Tensor& features,
                                  const std::string& clip_id,
                                  const std::vector<std::string>& classes,
                                  const EvalConfig& eval_cfg) {
  ModelOutput out = model.forward(features, FwdCtx::inference());
  auto active = binarize_and_filter(out.strong, eval_cfg);
  return decode_events(active, clip_id, classes, eval_cfg);
}

ScoreReport evaluate_model(MgaNet& model,
                           const std::map<std::string, Tensor>& features,
                           const std::vector<std::string>& clip_ids,
                           const std::vector<Event>& refs,
                           const std::vector<std::string>& classes,
                           const EvalConfig& eval_cfg) {
  std::vector<Event> preds;
  for (const std::string& id : clip_ids) {
    auto it = features.find(id);
    if (it == features.end())
      throw DataError("no features for clip '" + id + "'");
    auto events = predict_events(model, it->second, id, classes, eval_cfg);
    preds.insert(preds.end(), events.begin(), events.end());
  }
  return event_based_f1(refs, preds, classes, eval_cfg);
}

}  // namespace mga
