#pragma once

#include "mga/nn.hpp"
#include "mga/ops.hpp"

namespace mga {

/// Quarter-channel-group shift by one step: groups 0/1 move +1/-1 along
/// time, groups 2/3 move +1/-1 along frequency. Cells whose source falls
/// outside the map keep their input value. Computed from a snapshot of the
/// input, never as sequential in-place slice writes.
Tensor shift1(const Tensor& x);

/// Axis-swapped complement of shift1: groups 0/1 move along frequency,
/// groups 2/3 along time.
Tensor shift2(const Tensor& x);

/// Feature-perturbation module: expand channels c -> 3c per position, shift
/// the first two thirds with shift1/shift2, keep the third as identity,
/// then recombine with softmax weights derived from global average pooling.
class SpatialShiftModule {
 public:
  SpatialShiftModule() = default;
  SpatialShiftModule(const std::string& name, int channels, Rng& rng,
                     ParamRegistry& reg);

  Tensor forward(const Tensor& x) const;

  /// The three softmax branch weights for a given input (sums to 1).
  Tensor branch_weights(const Tensor& x) const;

  Linear expand;  // c -> 3c
  Linear weigh;   // 3c -> 3
  int channels = 0;

 private:
  struct Branches {
    Tensor s1, s2, s3;
    Tensor weights;  // [1,3]
  };
  Branches split_and_shift(const Tensor& x) const;
};

}  // namespace mga
