#include "mga/features.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>

namespace mga {

void SpectrogramConfig::validate() const {
  if (hop <= 0 || hop >= n_fft)
    throw ConfigError("hop must satisfy 0 < hop < n_fft");
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (!(fmin < fmax) || fmax > sample_rate / 2.0)
    throw ConfigError("need fmin < fmax <= sample_rate/2");
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0)
    throw ConfigError("n_fft must be a power of two");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

namespace {

// iterative radix-2 Cooley-Tukey; n is a power of two
void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// reflect index without repeating the edge sample, bouncing for short signals
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

}  // namespace

Tensor stft_magnitude(const std::vector<double>& samples,
                      const SpectrogramConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw DataError("stft: empty signal");
  const int n_fft = cfg.n_fft;
  const int pad = n_fft / 2;
  const int64_t len = static_cast<int64_t>(samples.size());
  const int frames = 1 + static_cast<int>(len / cfg.hop);
  const int bins = cfg.n_bins();

  std::vector<double> window(n_fft);
  for (int i = 0; i < n_fft; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n_fft);

  Tensor out(Shape{frames, bins});
  std::vector<std::complex<double>> buf(n_fft);
  for (int t = 0; t < frames; ++t) {
    const int64_t start = static_cast<int64_t>(t) * cfg.hop - pad;
    for (int i = 0; i < n_fft; ++i) {
      const int64_t src = reflect_index(start + i, len);
      buf[i] = std::complex<double>(samples[src] * window[i], 0.0);
    }
    fft_inplace(buf);
    double* row = out.values().data() + static_cast<int64_t>(t) * bins;
    for (int k = 0; k < bins; ++k) row[k] = std::abs(buf[k]);
  }
  return out;
}

Tensor mel_filterbank(const SpectrogramConfig& cfg) {
  cfg.validate();
  const int bins = cfg.n_bins();
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> centers(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

  Tensor bank(Shape{cfg.n_mels, bins});
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = centers[m], mid = centers[m + 1], right = centers[m + 2];
    double* row = bank.values().data() + static_cast<int64_t>(m) * bins;
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > left && f < right)
        w = f <= mid ? (f - left) / (mid - left) : (right - f) / (right - mid);
      row[k] = w;
    }
    // guarantee a non-zero row even when a triangle falls between bins
    double s = 0.0;
    for (int k = 0; k < bins; ++k) s += row[k];
    if (s == 0.0) {
      int nearest = static_cast<int>(std::lround(mid / bin_hz));
      nearest = std::max(0, std::min(bins - 1, nearest));
      row[nearest] = 1.0;
    }
  }
  return bank;
}

MelSpectrogram log_mel(const std::vector<double>& samples,
                       const SpectrogramConfig& cfg, const std::string& clip_id) {
  Tensor mag = stft_magnitude(samples, cfg);
  Tensor bank = mel_filterbank(cfg);
  const int frames = mag.extent(0), bins = mag.extent(1);
  const int n_mels = cfg.n_mels;

  MelSpectrogram mel;
  mel.clip_id = clip_id;
  mel.duration = static_cast<double>(samples.size()) / cfg.sample_rate;
  mel.values = Tensor(Shape{frames, n_mels});

  std::vector<double> power(bins);
  for (int t = 0; t < frames; ++t) {
    const double* mrow = mag.values().data() + static_cast<int64_t>(t) * bins;
    for (int k = 0; k < bins; ++k) power[k] = mrow[k] * mrow[k];
    double* orow = mel.values.values().data() + static_cast<int64_t>(t) * n_mels;
    for (int m = 0; m < n_mels; ++m) {
      const double* brow = bank.values().data() + static_cast<int64_t>(m) * bins;
      double acc = 0.0;
      for (int k = 0; k < bins; ++k) acc += brow[k] * power[k];
      orow[m] = std::log(std::max(acc, cfg.log_floor));
    }
  }
  return mel;
}

Tensor normalize_features(const Tensor& feats) {
  if (feats.rank() != 2)
    throw DimensionError("normalize_features: need [frames, mels], got " +
                         shape_str(feats.shape()));
  const int t = feats.extent(0), m = feats.extent(1);
  Tensor out(feats.shape());
  for (int j = 0; j < m; ++j) {
    double mean = 0.0;
    for (int i = 0; i < t; ++i) mean += feats.at({i, j});
    mean /= t;
    double var = 0.0;
    for (int i = 0; i < t; ++i) {
      const double d = feats.at({i, j}) - mean;
      var += d * d;
    }
    var /= t;
    const double inv_std = 1.0 / std::sqrt(var + 1e-8);
    for (int i = 0; i < t; ++i)
      out.values()[static_cast<int64_t>(i) * m + j] =
          (feats.at({i, j}) - mean) * inv_std;
  }
  return out;
}

void write_features(const std::string& path, const Tensor& feats) {
  if (feats.rank() != 2)
    throw DimensionError("write_features: need [frames, mels]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file: " + path);
  out.write("MGAF", 4);
  const uint32_t frames = static_cast<uint32_t>(feats.extent(0));
  const uint32_t mels = static_cast<uint32_t>(feats.extent(1));
  out.write(reinterpret_cast<const char*>(&frames), 4);
  out.write(reinterpret_cast<const char*>(&mels), 4);
  out.write(reinterpret_cast<const char*>(feats.values().data()),
            static_cast<std::streamsize>(feats.values().size() * sizeof(double)));
  if (!out) throw IoError("short write: " + path);
}

Tensor read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MGAF", 4) != 0)
    throw IoError(path + ": bad feature file magic");
  uint32_t frames = 0, mels = 0;
  in.read(reinterpret_cast<char*>(&frames), 4);
  in.read(reinterpret_cast<char*>(&mels), 4);
  if (!in || frames == 0 || mels == 0)
    throw IoError(path + ": bad feature file header");
  Tensor out(Shape{static_cast<int>(frames), static_cast<int>(mels)});
  in.read(reinterpret_cast<char*>(out.values().data()),
          static_cast<std::streamsize>(out.values().size() * sizeof(double)));
  if (!in) throw IoError(path + ": truncated feature payload");
  return out;
}

}  // namespace mga
