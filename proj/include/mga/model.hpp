#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mga/attention.hpp"
#include "mga/conv_blocks.hpp"

namespace mga {

struct ModelConfig {
  int n_classes = 10;
  int n_mga = 4;
  EncoderConfig encoder;
  MgaConfig mga;
  std::string preset = "full";

  /// Full-scale configuration: six RH-Conv blocks to 144 channels, four MGA
  /// modules at d=144, 4 heads, GRU hidden 512, dropout 0.1.
  static ModelConfig full();

  /// Test-scale preset: two conv blocks, d=16, 2 heads, GRU hidden 16,
  /// two MGA modules. Pooling still flattens frequency to extent 1.
  static ModelConfig tiny();

  void validate() const;
};

struct ModelOutput {
  Tensor strong;  // [frames, n_classes] probabilities
  Tensor weak;    // [n_classes] probabilities
};

/// Feature encoder -> class-token sequence -> stacked MGA modules ->
/// strong (per-frame) and weak (clip-level) sigmoid heads.
class MgaNet {
 public:
  MgaNet(const ModelConfig& cfg, uint64_t seed);

  MgaNet(const MgaNet&) = delete;
  MgaNet& operator=(const MgaNet&) = delete;

  ModelOutput forward(const Tensor& features, const FwdCtx& ctx);

  /// Output frame count for a given input frame count.
  int out_frames(int in_frames) const;

  const ParamRegistry& params() const { return registry_; }

  ModelConfig cfg;
  Encoder encoder;
  Parameter class_token;  // [1, d]
  std::vector<MgaModule> mga_stack;
  Linear strong_head, weak_head;

 private:
  ParamRegistry registry_;
};

// Checkpoints: magic "MGAC", u32 version, then per parameter
// (u32 name length, name bytes, u32 rank, u32 extents, float64 payload).
void save_checkpoint(const std::string& path, const ParamRegistry& params);

/// Loads into an existing registry; every entry must match an existing
/// parameter by name and shape, and every parameter must be filled.
void load_checkpoint(const std::string& path, const ParamRegistry& params);

}  // namespace mga
