#pragma once

#include <string>
#include <vector>

#include "mga/eval.hpp"
#include "mga/features.hpp"
#include "mga/model.hpp"
#include "mga/training.hpp"

namespace mga {

/// Merged view of every subsystem configuration plus paths. Parsed from a
/// plain-text file of `section.key = value` lines ('#' starts a comment);
/// command-line flags override file values. Unknown keys are rejected.
struct RunConfig {
  SpectrogramConfig features;
  TrainingConfig train;
  EvalConfig eval;
  ToySpec gen;

  // model selection; the ModelConfig is materialized via model_config()
  std::string preset = "full";
  int n_classes = 10;
  std::string variant = "rh";
  std::string order = "coarse_fine";
  bool stage_global = true;
  bool stage_local = true;
  bool stage_frame = true;
  bool spatial_shift = true;
  double dropout = 0.1;

  // pipeline paths
  std::string corpus_dir = "out/corpus";
  std::string features_dir = "out/features";
  std::string out_dir = "out";
  std::string checkpoint;
  std::string resume_from;
  int resume_epoch = 0;
  int eval_every = 5;  // epochs between train-set scoring passes; 0 = off

  uint64_t seed = 7;

  void apply_file(const std::string& path);
  void apply_kv(const std::string& key, const std::string& value,
                const std::string& where);

  ModelConfig model_config() const;

  /// Fully resolved `section.key = value` lines, echoed at the start of
  /// every run so logs are self-describing.
  std::string echo() const;
};

}  // namespace mga
