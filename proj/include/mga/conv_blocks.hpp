#pragma once

#include <utility>
#include <vector>

#include "mga/nn.hpp"
#include "mga/spatial_shift.hpp"

namespace mga {

enum class ConvBlockVariant { V_CONV, RV_CONV, RA_CONV, RH_CONV };

ConvBlockVariant conv_variant_from_string(const std::string& s);
std::string to_string(ConvBlockVariant v);

/// Two-stage CNN feature block, shape-preserving in TxF.
///   V:  conv3x3 -> BN -> GELU, conv3x3 -> BN -> GELU
///   RV: V plus residual
///   RA: stage 1 sums parallel 3x3 / 1x3 / 3x1 convolutions, plus residual
///   RH: stage 1 sums parallel 1x3 / 3x1 convolutions, plus residual
/// The residual path uses a 1x1 conv + BN projection when the channel
/// count changes, identity otherwise.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const std::string& name, ConvBlockVariant variant, int c_in,
            int c_out, Rng& rng, ParamRegistry& reg);

  Tensor forward(const Tensor& x, const FwdCtx& ctx);

  /// Learnable element count for this configuration (excludes BN buffers).
  static int64_t param_count(ConvBlockVariant variant, int c_in, int c_out);

  ConvBlockVariant variant = ConvBlockVariant::RH_CONV;
  int c_in = 0, c_out = 0;

  Parameter w_sq1;   // 3x3, stage 1 (V/RV/RA)
  Parameter w_13;    // 1x3, stage 1 (RA/RH)
  Parameter w_31;    // 3x1, stage 1 (RA/RH)
  Parameter w_sq2;   // 3x3, stage 2
  Parameter w_proj;  // 1x1 residual projection
  BatchNorm2d bn1, bn2, bn_proj;

 private:
  bool has_residual() const { return variant != ConvBlockVariant::V_CONV; }
  bool needs_proj() const { return has_residual() && c_in != c_out; }
};

struct EncoderConfig {
  std::vector<int> channels;                 // output channels per block
  std::vector<std::pair<int, int>> pooling;  // (time, freq) window per block
  ConvBlockVariant variant = ConvBlockVariant::RH_CONV;
  double dropout = 0.1;
  bool spatial_shift = true;

  /// Full-scale layout: six blocks 16-32-64-128-144-144, pooling 2x2, 2x2 then
  /// 1x2 four times; 496x64 input comes out as [144,124,1].
  static EncoderConfig full();
  void validate() const;
};

/// Conv-block stack: block -> avg-pool -> dropout per stage, spatial shift
/// module after the last stage.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const std::string& name, const EncoderConfig& cfg, Rng& rng,
          ParamRegistry& reg);

  /// x is a one-channel feature map [1,T,F].
  Tensor forward(const Tensor& x, const FwdCtx& ctx);

  EncoderConfig cfg;
  std::vector<ConvBlock> blocks;
  SpatialShiftModule ss;
};

}  // namespace mga
