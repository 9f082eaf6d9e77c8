#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "mga/common.hpp"
#include "mga/tensor.hpp"

namespace mga::testutil {

/// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mga_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_normal_tensor(Shape shape, Rng& rng, double sigma = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.normal(0.0, sigma);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.values().size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

// Independent reference: plain triple loop.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const int m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor c(Shape{m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a.at({i, p}) * b.at({p, j});
      c.values()[static_cast<int64_t>(i) * n + j] = acc;
    }
  return c;
}

// Independent reference: six explicit loops over output, channels, kernel.
inline Tensor naive_conv2d(const Tensor& x, const Tensor& w, int ph, int pw) {
  const int ci = x.extent(0), t = x.extent(1), f = x.extent(2);
  const int co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  const int to = t + 2 * ph - kh + 1;
  const int fo = f + 2 * pw - kw + 1;
  Tensor out(Shape{co, to, fo});
  for (int oc = 0; oc < co; ++oc)
    for (int i = 0; i < to; ++i)
      for (int j = 0; j < fo; ++j) {
        double acc = 0.0;
        for (int ic = 0; ic < ci; ++ic)
          for (int dh = 0; dh < kh; ++dh)
            for (int dw = 0; dw < kw; ++dw) {
              const int ti = i + dh - ph;
              const int fi = j + dw - pw;
              if (ti < 0 || ti >= t || fi < 0 || fi >= f) continue;
              acc += x.at({ic, ti, fi}) * w.at({oc, ic, dh, dw});
            }
        out.values()[(static_cast<int64_t>(oc) * to + i) * fo + j] = acc;
      }
  return out;
}

}  // namespace mga::testutil
