#include "mga/spatial_shift.hpp"

namespace mga {

namespace {

// source offsets per channel-group for the two shift flavours
struct GroupShift {
  int dt;
  int df;
};

constexpr GroupShift kShift1[4] = {{+1, 0}, {-1, 0}, {0, +1}, {0, -1}};
constexpr GroupShift kShift2[4] = {{0, +1}, {0, -1}, {+1, 0}, {-1, 0}};

// out[c,t,f] = in[c, clamp(t-dt), clamp(f-df)]; clamping reproduces the
// keep-boundary semantics of the slice assignments
Tensor apply_shift(const Tensor& x, const GroupShift* table, const char* op) {
  if (x.rank() != 3)
    throw DimensionError(std::string(op) + ": need [C,T,F], got " +
                         shape_str(x.shape()));
  const int c = x.extent(0), t = x.extent(1), f = x.extent(2);
  if (c % 4 != 0)
    throw ConfigError(std::string(op) + ": channel count " + std::to_string(c) +
                      " not divisible by 4");
  const int g = c / 4;
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (int ci = 0; ci < c; ++ci) {
    const GroupShift s = table[ci / g];
    for (int ti = 0; ti < t; ++ti) {
      int st = ti - s.dt;
      st = st < 0 ? 0 : (st >= t ? t - 1 : st);
      for (int fi = 0; fi < f; ++fi) {
        int sf = fi - s.df;
        sf = sf < 0 ? 0 : (sf >= f ? f - 1 : sf);
        ov[(static_cast<int64_t>(ci) * t + ti) * f + fi] =
            xv[(static_cast<int64_t>(ci) * t + st) * f + sf];
      }
    }
  }
  if (active_tape() && x.tracked()) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on, table, c, t, f, g] {
      if (on->grad.empty()) return;
      auto& grad = grad_buffer(xn);
      for (int ci = 0; ci < c; ++ci) {
        const GroupShift s = table[ci / g];
        for (int ti = 0; ti < t; ++ti) {
          int st = ti - s.dt;
          st = st < 0 ? 0 : (st >= t ? t - 1 : st);
          for (int fi = 0; fi < f; ++fi) {
            int sf = fi - s.df;
            sf = sf < 0 ? 0 : (sf >= f ? f - 1 : sf);
            grad[(static_cast<int64_t>(ci) * t + st) * f + sf] +=
                on->grad[(static_cast<int64_t>(ci) * t + ti) * f + fi];
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor shift1(const Tensor& x) { return apply_shift(x, kShift1, "shift1"); }

Tensor shift2(const Tensor& x) { return apply_shift(x, kShift2, "shift2"); }

SpatialShiftModule::SpatialShiftModule(const std::string& name, int channels_,
                                       Rng& rng, ParamRegistry& reg)
    : channels(channels_) {
  if (channels % 4 != 0)
    throw ConfigError("spatial shift needs channels divisible by 4, got " +
                      std::to_string(channels));
  expand = Linear(name + ".expand", channels, 3 * channels, rng, reg);
  weigh = Linear(name + ".weigh", 3 * channels, 3, rng, reg);
}

SpatialShiftModule::Branches SpatialShiftModule::split_and_shift(
    const Tensor& x) const {
  const int c = x.extent(0), t = x.extent(1), f = x.extent(2);
  if (c != channels)
    throw DimensionError("spatial shift built for " + std::to_string(channels) +
                         " channels, got " + shape_str(x.shape()));
  Tensor expanded = expand.forward(channels_last(x));      // [T*F, 3c]
  Tensor e2 = reshape(channels_first(expanded, t, f), {3 * c, t * f});

  auto part = [&](int i) {
    return reshape(slice_rows(e2, i * c, (i + 1) * c), {c, t, f});
  };
  Branches br;
  br.s1 = shift1(part(0));
  br.s2 = shift2(part(1));
  br.s3 = part(2);

  Tensor u = concat_cols({global_avg_pool(br.s1), global_avg_pool(br.s2),
                          global_avg_pool(br.s3)});  // [1, 3c]
  br.weights = softmax(weigh.forward(u), 1);         // [1, 3]
  return br;
}

Tensor SpatialShiftModule::forward(const Tensor& x) const {
  Branches br = split_and_shift(x);
  Tensor out = scale(br.s1, slice_cols(br.weights, 0, 1));
  out = add(out, scale(br.s2, slice_cols(br.weights, 1, 2)));
  out = add(out, scale(br.s3, slice_cols(br.weights, 2, 3)));
  return out;
}

Tensor SpatialShiftModule::branch_weights(const Tensor& x) const {
  return split_and_shift(x).weights;
}

}  // namespace mga
