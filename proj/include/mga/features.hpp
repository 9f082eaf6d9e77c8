#pragma once

#include <string>
#include <vector>

#include "mga/tensor.hpp"

namespace mga {

struct SpectrogramConfig {
  int sample_rate = 16000;
  int n_fft = 1024;
  int hop = 323;
  int n_mels = 64;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  int n_bins() const { return n_fft / 2 + 1; }
  void validate() const;
};

struct MelSpectrogram {
  Tensor values;  // [frames, n_mels]
  std::string clip_id;
  double duration = 0.0;  // seconds
};

/// Hann-windowed magnitude STFT with centered reflect padding, so
/// frames = 1 + floor(len/hop). Output [frames, n_fft/2+1].
Tensor stft_magnitude(const std::vector<double>& samples,
                      const SpectrogramConfig& cfg);

/// Triangular mel filterbank, [n_mels, n_fft/2+1]; centers equally spaced
/// on the mel scale between fmin and fmax.
Tensor mel_filterbank(const SpectrogramConfig& cfg);

/// log(max(mel power, log_floor)); [frames, n_mels].
MelSpectrogram log_mel(const std::vector<double>& samples,
                       const SpectrogramConfig& cfg,
                       const std::string& clip_id = "");

/// Zero mean / unit variance per mel bin over the clip; applied right
/// before the network.
Tensor normalize_features(const Tensor& feats);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Feature files: magic "MGAF", u32 frames, u32 mels, little-endian float64
// payload; a manifest line per clip lives alongside.
void write_features(const std::string& path, const Tensor& feats);
Tensor read_features(const std::string& path);

}  // namespace mga
