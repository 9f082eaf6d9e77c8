#include <cmath>
#include <cstring>

#include "mga/ops.hpp"

namespace mga {

namespace {

bool want_record(std::initializer_list<const Tensor*> ins) {
  if (!active_tape()) return false;
  for (const Tensor* t : ins)
    if (t->tracked()) return true;
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (want_record({&a, &b})) {
    out.set_tracked();
    auto an = a.node(), bn = b.node(), on = out.node();
    active_tape()->record([an, bn, on] {
      if (on->grad.empty()) return;
      if (an->tracked) {
        auto& g = grad_buffer(an);
        for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
      if (bn->tracked) {
        auto& g = grad_buffer(bn);
        for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (want_record({&a, &b})) {
    out.set_tracked();
    auto an = a.node(), bn = b.node(), on = out.node();
    active_tape()->record([an, bn, on] {
      if (on->grad.empty()) return;
      if (an->tracked) {
        auto& g = grad_buffer(an);
        for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
      if (bn->tracked) {
        auto& g = grad_buffer(bn);
        for (size_t i = 0; i < g.size(); ++i) g[i] -= on->grad[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (want_record({&a, &b})) {
    out.set_tracked();
    auto an = a.node(), bn = b.node(), on = out.node();
    active_tape()->record([an, bn, on] {
      if (on->grad.empty()) return;
      if (an->tracked) {
        auto& g = grad_buffer(an);
        for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * bn->value[i];
      }
      if (bn->tracked) {
        auto& g = grad_buffer(bn);
        for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * an->value[i];
      }
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + s;
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
    });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * s;
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on, s] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * s;
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (want_record({&x})) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(xn);
      for (size_t i = 0; i < g.size(); ++i)
        if (xn->value[i] > 0.0) g[i] += on->grad[i];
    });
  }
  return out;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) {
    double v = xv[i];
    double u = kGeluC * (v + kGeluA * v * v * v);
    ov[i] = 0.5 * v * (1.0 + std::tanh(u));
  }
  if (want_record({&x})) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(xn);
      for (size_t i = 0; i < g.size(); ++i) {
        double v = xn->value[i];
        double u = kGeluC * (v + kGeluA * v * v * v);
        double th = std::tanh(u);
        double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
        g[i] += on->grad[i] * d;
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  if (want_record({&x})) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(xn);
      for (size_t i = 0; i < g.size(); ++i) {
        double y = on->value[i];
        g[i] += on->grad[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

Tensor tanh_op(const Tensor& x) {
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(xv[i]);
  if (want_record({&x})) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(xn);
      for (size_t i = 0; i < g.size(); ++i) {
        double y = on->value[i];
        g[i] += on->grad[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, const Tensor& s) {
  if (s.size() != 1)
    throw DimensionError("scale: weight must be a single element, got " +
                         shape_str(s.shape()));
  Tensor out(a.shape());
  const auto& av = a.values();
  double sv = s.values()[0];
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * sv;
  if (want_record({&a, &s})) {
    out.set_tracked();
    auto an = a.node(), sn = s.node(), on = out.node();
    active_tape()->record([an, sn, on] {
      if (on->grad.empty()) return;
      if (an->tracked) {
        auto& g = grad_buffer(an);
        double sv = sn->value[0];
        for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * sv;
      }
      if (sn->tracked) {
        auto& g = grad_buffer(sn);
        double acc = 0.0;
        for (size_t i = 0; i < on->grad.size(); ++i)
          acc += on->grad[i] * an->value[i];
        g[0] += acc;
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul: need rank-2 operands, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  if (a.extent(1) != b.extent(0))
    throw DimensionError("matmul: inner extents disagree, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor out(Shape{m, n});
  {
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out.values().data();
    for (int i = 0; i < m; ++i) {
      double* orow = ov + static_cast<int64_t>(i) * n;
      const double* arow = av + static_cast<int64_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        double aval = arow[p];
        const double* brow = bv + static_cast<int64_t>(p) * n;
        for (int j = 0; j < n; ++j) orow[j] += aval * brow[j];
      }
    }
  }
  if (want_record({&a, &b})) {
    out.set_tracked();
    auto an = a.node(), bn = b.node(), on = out.node();
    active_tape()->record([an, bn, on, m, k, n] {
      if (on->grad.empty()) return;
      const double* dout = on->grad.data();
      if (an->tracked) {
        // dA = dC * B^T
        double* da = grad_buffer(an).data();
        const double* bv = bn->value.data();
        for (int i = 0; i < m; ++i) {
          const double* drow = dout + static_cast<int64_t>(i) * n;
          double* darow = da + static_cast<int64_t>(i) * k;
          for (int p = 0; p < k; ++p) {
            const double* brow = bv + static_cast<int64_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += drow[j] * brow[j];
            darow[p] += acc;
          }
        }
      }
      if (bn->tracked) {
        // dB = A^T * dC
        double* db = grad_buffer(bn).data();
        const double* av = an->value.data();
        for (int i = 0; i < m; ++i) {
          const double* arow = av + static_cast<int64_t>(i) * k;
          const double* drow = dout + static_cast<int64_t>(i) * n;
          for (int p = 0; p < k; ++p) {
            double aval = arow[p];
            double* dbrow = db + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) dbrow[j] += aval * drow[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2)
    throw DimensionError("transpose: need rank-2, got " + shape_str(a.shape()));
  const int m = a.extent(0), n = a.extent(1);
  Tensor out(Shape{n, m});
  const auto& av = a.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      ov[static_cast<int64_t>(j) * m + i] = av[static_cast<int64_t>(i) * n + j];
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on, m, n] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          g[static_cast<int64_t>(i) * n + j] +=
              on->grad[static_cast<int64_t>(j) * m + i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size())
    throw DimensionError("reshape: " + shape_str(a.shape()) + " to " +
                         shape_str(shape) + " changes element count");
  Tensor out(std::move(shape), a.values());
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& r) {
  if (a.rank() != 2)
    throw DimensionError("add_rowvec: need rank-2 matrix, got " +
                         shape_str(a.shape()));
  const int m = a.extent(0), n = a.extent(1);
  if (r.size() != n)
    throw DimensionError("add_rowvec: vector length " + std::to_string(r.size()) +
                         " vs row width " + std::to_string(n));
  Tensor out(a.shape());
  const auto& av = a.values();
  const auto& rv = r.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      ov[static_cast<int64_t>(i) * n + j] = av[static_cast<int64_t>(i) * n + j] + rv[j];
  if (want_record({&a, &r})) {
    out.set_tracked();
    auto an = a.node(), rn = r.node(), on = out.node();
    active_tape()->record([an, rn, on, m, n] {
      if (on->grad.empty()) return;
      if (an->tracked) {
        auto& g = grad_buffer(an);
        for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
      if (rn->tracked) {
        auto& g = grad_buffer(rn);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            g[j] += on->grad[static_cast<int64_t>(i) * n + j];
      }
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const int n = parts[0].extent(1);
  int m = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.extent(1) != n)
      throw DimensionError("concat_rows: incompatible part " + shape_str(p.shape()));
    m += p.extent(0);
  }
  Tensor out(Shape{m, n});
  auto& ov = out.values();
  int64_t off = 0;
  for (const Tensor& p : parts) {
    std::memcpy(ov.data() + off, p.values().data(), p.values().size() * sizeof(double));
    off += p.size();
  }
  bool track = false;
  for (const Tensor& p : parts)
    if (p.tracked()) track = true;
  if (active_tape() && track) {
    out.set_tracked();
    std::vector<std::shared_ptr<TensorData>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    auto on = out.node();
    active_tape()->record([nodes, on] {
      if (on->grad.empty()) return;
      int64_t off = 0;
      for (const auto& pn : nodes) {
        if (pn->tracked) {
          auto& g = grad_buffer(pn);
          for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[off + i];
        }
        off += static_cast<int64_t>(pn->value.size());
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  if (a.rank() != 2)
    throw DimensionError("slice_rows: need rank-2, got " + shape_str(a.shape()));
  const int m = a.extent(0), n = a.extent(1);
  if (r0 < 0 || r1 > m || r0 >= r1)
    throw DimensionError("slice_rows: bad range [" + std::to_string(r0) + "," +
                         std::to_string(r1) + ") for " + shape_str(a.shape()));
  Tensor out(Shape{r1 - r0, n});
  std::memcpy(out.values().data(), a.values().data() + static_cast<int64_t>(r0) * n,
              out.values().size() * sizeof(double));
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on, r0, n] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (size_t i = 0; i < on->grad.size(); ++i)
        g[static_cast<int64_t>(r0) * n + i] += on->grad[i];
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const int m = parts[0].extent(0);
  int n = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.extent(0) != m)
      throw DimensionError("concat_cols: incompatible part " + shape_str(p.shape()));
    n += p.extent(1);
  }
  Tensor out(Shape{m, n});
  auto& ov = out.values();
  int col = 0;
  for (const Tensor& p : parts) {
    const int pn = p.extent(1);
    for (int i = 0; i < m; ++i)
      std::memcpy(ov.data() + static_cast<int64_t>(i) * n + col,
                  p.values().data() + static_cast<int64_t>(i) * pn,
                  static_cast<size_t>(pn) * sizeof(double));
    col += pn;
  }
  bool track = false;
  for (const Tensor& p : parts)
    if (p.tracked()) track = true;
  if (active_tape() && track) {
    out.set_tracked();
    std::vector<std::shared_ptr<TensorData>> nodes;
    std::vector<int> widths;
    for (const Tensor& p : parts) {
      nodes.push_back(p.node());
      widths.push_back(p.extent(1));
    }
    auto on = out.node();
    active_tape()->record([nodes, widths, on, m, n] {
      if (on->grad.empty()) return;
      int col = 0;
      for (size_t pi = 0; pi < nodes.size(); ++pi) {
        const int pn = widths[pi];
        if (nodes[pi]->tracked) {
          auto& g = grad_buffer(nodes[pi]);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < pn; ++j)
              g[static_cast<int64_t>(i) * pn + j] +=
                  on->grad[static_cast<int64_t>(i) * n + col + j];
        }
        col += pn;
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  if (a.rank() != 2)
    throw DimensionError("slice_cols: need rank-2, got " + shape_str(a.shape()));
  const int m = a.extent(0), n = a.extent(1);
  if (c0 < 0 || c1 > n || c0 >= c1)
    throw DimensionError("slice_cols: bad range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") for " + shape_str(a.shape()));
  const int w = c1 - c0;
  Tensor out(Shape{m, w});
  const auto& av = a.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i)
    std::memcpy(ov.data() + static_cast<int64_t>(i) * w,
                av.data() + static_cast<int64_t>(i) * n + c0,
                static_cast<size_t>(w) * sizeof(double));
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on, m, n, c0, w] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
          g[static_cast<int64_t>(i) * n + c0 + j] +=
              on->grad[static_cast<int64_t>(i) * w + j];
    });
  }
  return out;
}

Tensor channels_last(const Tensor& x) {
  if (x.rank() != 3)
    throw DimensionError("channels_last: need [C,T,F], got " + shape_str(x.shape()));
  const int c = x.extent(0), t = x.extent(1), f = x.extent(2);
  const int64_t tf = static_cast<int64_t>(t) * f;
  Tensor out(Shape{t * f, c});
  const auto& xv = x.values();
  auto& ov = out.values();
  for (int ci = 0; ci < c; ++ci)
    for (int64_t p = 0; p < tf; ++p) ov[p * c + ci] = xv[ci * tf + p];
  if (want_record({&x})) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on, c, tf] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(xn);
      for (int ci = 0; ci < c; ++ci)
        for (int64_t p = 0; p < tf; ++p) g[ci * tf + p] += on->grad[p * c + ci];
    });
  }
  return out;
}

Tensor channels_first(const Tensor& y, int t, int f) {
  if (y.rank() != 2)
    throw DimensionError("channels_first: need rank-2, got " + shape_str(y.shape()));
  const int64_t tf = static_cast<int64_t>(t) * f;
  if (y.extent(0) != tf)
    throw DimensionError("channels_first: rows " + std::to_string(y.extent(0)) +
                         " != t*f " + std::to_string(tf));
  const int c = y.extent(1);
  Tensor out(Shape{c, t, f});
  const auto& yv = y.values();
  auto& ov = out.values();
  for (int ci = 0; ci < c; ++ci)
    for (int64_t p = 0; p < tf; ++p) ov[ci * tf + p] = yv[p * c + ci];
  if (want_record({&y})) {
    out.set_tracked();
    auto yn = y.node(), on = out.node();
    active_tape()->record([yn, on, c, tf] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(yn);
      for (int ci = 0; ci < c; ++ci)
        for (int64_t p = 0; p < tf; ++p) g[p * c + ci] += on->grad[ci * tf + p];
    });
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[0];
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  Tensor out = Tensor::scalar(acc * inv);
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on, inv] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[0] * inv;
    });
  }
  return out;
}

Tensor softmax(const Tensor& a, int axis) {
  if (axis < 0 || axis >= a.rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(a.shape()));
  const int n = a.extent(axis);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.extent(i);
  for (int i = axis + 1; i < a.rank(); ++i) inner *= a.extent(i);
  Tensor out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      double mx = av[base];
      for (int k = 1; k < n; ++k) mx = std::max(mx, av[base + k * inner]);
      double z = 0.0;
      for (int k = 0; k < n; ++k) {
        double e = std::exp(av[base + k * inner] - mx);
        ov[base + k * inner] = e;
        z += e;
      }
      const double invz = 1.0 / z;
      for (int k = 0; k < n; ++k) ov[base + k * inner] *= invz;
    }
  }
  if (want_record({&a})) {
    out.set_tracked();
    auto an = a.node(), on = out.node();
    active_tape()->record([an, on, n, outer, inner] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(an);
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * n * inner + in;
          double dot = 0.0;
          for (int k = 0; k < n; ++k)
            dot += on->grad[base + k * inner] * on->value[base + k * inner];
          for (int k = 0; k < n; ++k) {
            const int64_t idx = base + k * inner;
            g[idx] += (on->grad[idx] - dot) * on->value[idx];
          }
        }
      }
    });
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 3)
    throw DimensionError("global_avg_pool: need [C,T,F], got " + shape_str(x.shape()));
  const int c = x.extent(0);
  const int64_t tf = static_cast<int64_t>(x.extent(1)) * x.extent(2);
  const double inv = 1.0 / static_cast<double>(tf);
  Tensor out(Shape{1, c});
  const auto& xv = x.values();
  auto& ov = out.values();
  for (int ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    for (int64_t p = 0; p < tf; ++p) acc += xv[ci * tf + p];
    ov[ci] = acc * inv;
  }
  if (want_record({&x})) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on, c, tf, inv] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(xn);
      for (int ci = 0; ci < c; ++ci) {
        double d = on->grad[ci] * inv;
        for (int64_t p = 0; p < tf; ++p) g[ci * tf + p] += d;
      }
    });
  }
  return out;
}

}  // namespace mga
