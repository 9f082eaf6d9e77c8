#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mga/common.hpp"

namespace mga {

struct WavData {
  std::vector<double> samples;  // [-1, 1]
  int sample_rate = 0;
};

/// Reads RIFF/WAVE, 16-bit PCM, mono. `expected_rate` > 0 turns a rate
/// mismatch into an error instead of silently resampling (which this
/// project never does).
WavData load_wav(const std::string& path, int expected_rate = 0);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1] and scaled by 32767.
void save_wav(const std::string& path, const std::vector<double>& samples,
              int sample_rate);

}  // namespace mga
