#include "mga/conv_blocks.hpp"

namespace mga {

ConvBlockVariant conv_variant_from_string(const std::string& s) {
  if (s == "v") return ConvBlockVariant::V_CONV;
  if (s == "rv") return ConvBlockVariant::RV_CONV;
  if (s == "ra") return ConvBlockVariant::RA_CONV;
  if (s == "rh") return ConvBlockVariant::RH_CONV;
  throw ConfigError("unknown conv block variant: " + s + " (want v|rv|ra|rh)");
}

std::string to_string(ConvBlockVariant v) {
  switch (v) {
    case ConvBlockVariant::V_CONV: return "v";
    case ConvBlockVariant::RV_CONV: return "rv";
    case ConvBlockVariant::RA_CONV: return "ra";
    case ConvBlockVariant::RH_CONV: return "rh";
  }
  return "?";
}

ConvBlock::ConvBlock(const std::string& name, ConvBlockVariant variant_,
                     int c_in_, int c_out_, Rng& rng, ParamRegistry& reg)
    : variant(variant_), c_in(c_in_), c_out(c_out_) {
  const bool square1 = variant == ConvBlockVariant::V_CONV ||
                       variant == ConvBlockVariant::RV_CONV ||
                       variant == ConvBlockVariant::RA_CONV;
  const bool asym1 = variant == ConvBlockVariant::RA_CONV ||
                     variant == ConvBlockVariant::RH_CONV;
  auto init_conv = [&](Parameter& p, const std::string& n, int co, int ci,
                       int kh, int kw) {
    p.value = Tensor(Shape{co, ci, kh, kw});
    p.name = n;
    init_fanin_uniform(p.value, ci * kh * kw, rng);
    p.value.set_tracked();
    reg.add(p);
  };
  if (square1) init_conv(w_sq1, name + ".conv1_3x3.w", c_out, c_in, 3, 3);
  if (asym1) {
    init_conv(w_13, name + ".conv1_1x3.w", c_out, c_in, 1, 3);
    init_conv(w_31, name + ".conv1_3x1.w", c_out, c_in, 3, 1);
  }
  bn1 = BatchNorm2d(name + ".bn1", c_out, reg);
  init_conv(w_sq2, name + ".conv2_3x3.w", c_out, c_out, 3, 3);
  bn2 = BatchNorm2d(name + ".bn2", c_out, reg);
  if (needs_proj()) {
    init_conv(w_proj, name + ".proj.w", c_out, c_in, 1, 1);
    bn_proj = BatchNorm2d(name + ".proj_bn", c_out, reg);
  }
}

Tensor ConvBlock::forward(const Tensor& x, const FwdCtx& ctx) {
  Tensor stage1;
  switch (variant) {
    case ConvBlockVariant::V_CONV:
    case ConvBlockVariant::RV_CONV:
      stage1 = conv2d(x, w_sq1.value, 1, 1);
      break;
    case ConvBlockVariant::RA_CONV:
      stage1 = add(conv2d(x, w_sq1.value, 1, 1),
                   add(conv2d(x, w_13.value, 0, 1), conv2d(x, w_31.value, 1, 0)));
      break;
    case ConvBlockVariant::RH_CONV:
      stage1 = add(conv2d(x, w_13.value, 0, 1), conv2d(x, w_31.value, 1, 0));
      break;
  }
  Tensor h = gelu(bn1.forward(stage1, ctx));
  h = gelu(bn2.forward(conv2d(h, w_sq2.value, 1, 1), ctx));
  if (!has_residual()) return h;
  Tensor shortcut =
      needs_proj() ? bn_proj.forward(conv2d(x, w_proj.value, 0, 0), ctx) : x;
  return add(h, shortcut);
}

int64_t ConvBlock::param_count(ConvBlockVariant variant, int c_in, int c_out) {
  const int64_t ci = c_in, co = c_out;
  int64_t n = 0;
  if (variant != ConvBlockVariant::RH_CONV) n += 9 * ci * co;  // stage-1 3x3
  if (variant == ConvBlockVariant::RA_CONV ||
      variant == ConvBlockVariant::RH_CONV)
    n += 3 * ci * co + 3 * ci * co;  // 1x3 and 3x1
  n += 2 * co;                       // bn1 gamma/beta
  n += 9 * co * co + 2 * co;         // stage-2 3x3 + bn2
  if (variant != ConvBlockVariant::V_CONV && c_in != c_out)
    n += ci * co + 2 * co;  // projection + bn
  return n;
}

EncoderConfig EncoderConfig::full() {
  EncoderConfig cfg;
  cfg.channels = {16, 32, 64, 128, 144, 144};
  cfg.pooling = {{2, 2}, {2, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}};
  cfg.variant = ConvBlockVariant::RH_CONV;
  cfg.dropout = 0.1;
  return cfg;
}

void EncoderConfig::validate() const {
  if (channels.empty() || channels.size() != pooling.size())
    throw ConfigError("encoder needs one pooling window per block");
  if (spatial_shift && channels.back() % 4 != 0)
    throw ConfigError("spatial shift needs final channels divisible by 4");
}

Encoder::Encoder(const std::string& name, const EncoderConfig& cfg_, Rng& rng,
                 ParamRegistry& reg)
    : cfg(cfg_) {
  cfg.validate();
  int c_in = 1;
  for (size_t i = 0; i < cfg.channels.size(); ++i) {
    blocks.emplace_back(name + ".block" + std::to_string(i), cfg.variant, c_in,
                        cfg.channels[i], rng, reg);
    c_in = cfg.channels[i];
  }
  if (cfg.spatial_shift)
    ss = SpatialShiftModule(name + ".ss", cfg.channels.back(), rng, reg);
}

Tensor Encoder::forward(const Tensor& x, const FwdCtx& ctx) {
  if (x.rank() != 3 || x.extent(0) != 1)
    throw DimensionError("encoder wants [1,T,F], got " + shape_str(x.shape()));
  Tensor h = x;
  for (size_t i = 0; i < blocks.size(); ++i) {
    h = blocks[i].forward(h, ctx);
    h = avg_pool2d(h, cfg.pooling[i].first, cfg.pooling[i].second);
    h = maybe_dropout(h, cfg.dropout, ctx);
  }
  if (cfg.spatial_shift) h = ss.forward(h);
  return h;
}

}  // namespace mga
