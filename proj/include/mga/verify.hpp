#pragma once

#include <string>
#include <vector>

namespace mga::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Finite-difference checks over every differentiable op and model block
/// (h = 1e-4, max relative error 1e-3).
std::vector<CheckResult> gradient_suite();

/// shift1/shift2 against slice-assignment references, bit exact, on 100
/// random tensors with C in {4,8} and T,F in 1..6.
std::vector<CheckResult> shift_oracle_suite();

/// Vectorized LDSA against the naive per-frame loop, within 1e-9, for
/// random T<=8, d<=8, c in {1,3,5}.
std::vector<CheckResult> ldsa_oracle_suite();

/// 10 s 16 kHz clip -> 496x64 features -> full model -> strong [124,10],
/// weak [10]; plus row-stochastic attention and (0,1) probability ranges.
std::vector<CheckResult> shape_pipeline_suite();

/// Hand-derived event-matching fixtures (collar boundaries, one-to-one
/// matching, empty sets).
std::vector<CheckResult> metric_fixture_suite();

std::vector<CheckResult> run_all();

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace mga::verify
