#pragma once

#include <map>
#include <string>
#include <vector>

#include "mga/eval.hpp"
#include "mga/model.hpp"

namespace mga {

struct TrainingConfig {
  double lr = 0.001;
  int batch_strong = 4;
  int batch_weak = 4;
  int batch_unlabeled = 8;
  int epochs = 100;
  double ema_alpha = 0.999;
  double consistency_max_weight = 2.0;
  int ramp_epochs = 30;
  double noise_sigma = 0.05;
  int warmup_steps = 1000;
  uint64_t seed = 7;
  bool use_mean_teacher = true;  // off: plain supervised training

  void validate() const;
};

struct LossBreakdown {
  double strong_bce = 0.0;
  double weak_bce = 0.0;
  double consistency_mse = 0.0;
  double consistency_weight = 0.0;
  double total = 0.0;
};

/// w(epoch) = max_weight * exp(-5 (1 - min(1, epoch/ramp))^2).
double consistency_weight(const TrainingConfig& cfg, int epoch);

/// One clip's contribution to the batch loss. Targets may be absent
/// (unlabeled / weak-only clips); the teacher output is absent in plain
/// supervised training.
struct ClipLossInputs {
  ModelOutput student;
  ModelOutput teacher;
  const Tensor* strong_target = nullptr;  // [out_frames, n_classes]
  const Tensor* weak_target = nullptr;    // [n_classes]
  bool has_teacher = false;
};

/// Classification + consistency loss over a batch. Strong BCE averages
/// over strongly labeled clips, weak BCE over clips with clip-level
/// labels, and the consistency MSE (student vs teacher, both heads,
/// teacher treated as constant) over every clip. total() is the tracked
/// scalar: strong + weak + w * consistency.
struct BatchLoss {
  Tensor strong_bce;
  Tensor weak_bce;
  Tensor consistency_mse;
  Tensor total;
  LossBreakdown breakdown() const;
};

/// Throws NumericError naming each term when the total is not finite.
BatchLoss compute_loss(const std::vector<ClipLossInputs>& clips,
                       double consistency_w);

/// theta_t <- alpha * theta_t + (1-alpha) * theta_s over every registry
/// entry, BN running stats included. Registries must be congruent.
void ema_update(const ParamRegistry& teacher, const ParamRegistry& student,
                double alpha);

/// Adam with linear LR warmup over the first `warmup_steps` steps.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, int warmup_steps, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step(const ParamRegistry& params);
  int64_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int warmup_steps_;
  int64_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> state_;
};

// ---------------------------------------------------------------------------
// Data plumbing
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<std::string> strong_ids;
  std::vector<std::string> weak_ids;
  std::vector<std::string> unlabeled_ids;

  void validate_disjoint() const;
};

/// Everything the trainer touches, already featurized and rasterized.
struct TrainDataset {
  std::map<std::string, Tensor> features;        // normalized [frames, mels]
  std::map<std::string, Tensor> strong_targets;  // [out_frames, n_classes]
  std::map<std::string, Tensor> weak_targets;    // [n_classes]
  DatasetSplit split;
  std::vector<std::string> class_names;
};

/// Frame-level 0/1 targets on the strong-head grid; a frame is positive
/// when the event covers at least half of it.
Tensor rasterize_events(const std::vector<Event>& clip_events,
                        const std::vector<std::string>& classes,
                        int out_frames, double hop_seconds);

/// Clip-level any-frame-presence target.
Tensor weak_target_from_events(const std::vector<Event>& clip_events,
                               const std::vector<std::string>& classes);

/// Reads corpus annotations + extracted features into trainer form.
TrainDataset load_train_dataset(const std::string& corpus_dir,
                                const std::string& features_dir,
                                const std::vector<std::string>& classes,
                                int out_frames, double clip_seconds);

// ---------------------------------------------------------------------------
// Mean Teacher loop
// ---------------------------------------------------------------------------

class Trainer {
 public:
  Trainer(const ModelConfig& model_cfg, const TrainingConfig& train_cfg,
          TrainDataset data, uint64_t model_seed);

  /// Runs one epoch; all stochastic draws derive from (seed, epoch), so a
  /// resumed run replays the same batches and noise.
  std::vector<LossBreakdown> run_epoch(int epoch);

  int steps_per_epoch() const;

  MgaNet& student() { return *student_; }
  MgaNet& teacher() { return *teacher_; }
  const TrainDataset& data() const { return data_; }
  const TrainingConfig& config() const { return cfg_; }

 private:
  struct Batch {
    std::vector<std::string> strong, weak, unlabeled;
  };
  Batch sample_batch(int step, const std::vector<std::string>& strong_order,
                     Rng& rng) const;
  LossBreakdown train_step(const Batch& batch, int epoch,
                           Rng& student_noise_rng, Rng& teacher_noise_rng,
                           Rng& student_rng, Rng& teacher_rng);

  TrainingConfig cfg_;
  TrainDataset data_;
  std::unique_ptr<MgaNet> student_;
  std::unique_ptr<MgaNet> teacher_;
  AdamOptimizer opt_;
};

/// Decode + score a model over a clip set against reference events.
ScoreReport evaluate_model(MgaNet& model,
                           const std::map<std::string, Tensor>& features,
                           const std::vector<std::string>& clip_ids,
                           const std::vector<Event>& refs,
                           const std::vector<std::string>& classes,
                           const EvalConfig& eval_cfg);

/// Predicted events for one clip (eval mode).
std::vector<Event> predict_events(MgaNet& model, const Tensor& features,
                                  const std::string& clip_id,
                                  const std::vector<std::string>& classes,
                                  const EvalConfig& eval_cfg);

// ---------------------------------------------------------------------------
// Toy corpus
// ---------------------------------------------------------------------------

struct ToySpec {
  int n_strong = 30;
  int n_weak = 20;
  int n_unlabeled = 50;
  int n_holdout = 15;
  double clip_seconds = 10.0;
  int sample_rate = 16000;
  int min_events = 1;
  int max_events = 3;
  double min_duration = 1.0;
  double max_duration = 3.0;
  double background_sigma = 0.01;

  /// Three spectrally disjoint sources: 440 Hz tone, 1760 Hz tone, and a
  /// 3-6 kHz noise band.
  static std::vector<std::string> class_names();
};

struct ToyCorpus {
  std::vector<std::string> strong_ids, weak_ids, unlabeled_ids, holdout_ids;
  std::vector<Event> strong_events;   // ground truth for strong_ids
  std::vector<Event> holdout_events;  // ground truth for holdout_ids
  std::vector<WeakLabels> weak_labels;
};

/// Writes WAVs plus strong/weak/unlabeled/holdout TSVs under out_dir and
/// returns the ground truth. Byte-identical for a fixed seed.
ToyCorpus generate_toy_dataset(const ToySpec& spec, const std::string& out_dir,
                               uint64_t seed);

}  // namespace mga
