#include <cmath>
#include <cstring>

#include "mga/ops.hpp"

namespace mga {

namespace debug_hooks {
bool corrupt_ldsa_backward = false;
}

namespace {

bool want_record(std::initializer_list<const Tensor*> ins) {
  if (!active_tape()) return false;
  for (const Tensor* t : ins)
    if (t->tracked()) return true;
  return false;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int ph, int pw) {
  if (x.rank() != 3 || w.rank() != 4)
    throw DimensionError("conv2d: need x [C,T,F] and w [Co,Ci,kh,kw], got " +
                         shape_str(x.shape()) + " and " + shape_str(w.shape()));
  const int ci = x.extent(0), t = x.extent(1), f = x.extent(2);
  const int co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  if (w.extent(1) != ci)
    throw DimensionError("conv2d: input channels " + std::to_string(ci) +
                         " vs kernel channels " + std::to_string(w.extent(1)));
  const int to = t + 2 * ph - kh + 1;
  const int fo = f + 2 * pw - kw + 1;
  if (to <= 0 || fo <= 0)
    throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" +
                         std::to_string(kw) + " larger than padded input " +
                         shape_str(x.shape()));
  Tensor out(Shape{co, to, fo});
  {
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    double* ov = out.values().data();
    for (int oc = 0; oc < co; ++oc) {
      double* oplane = ov + static_cast<int64_t>(oc) * to * fo;
      for (int ic = 0; ic < ci; ++ic) {
        const double* xplane = xv + static_cast<int64_t>(ic) * t * f;
        const double* wk = wv + (static_cast<int64_t>(oc) * ci + ic) * kh * kw;
        for (int dh = 0; dh < kh; ++dh) {
          for (int dw = 0; dw < kw; ++dw) {
            const double wval = wk[dh * kw + dw];
            if (wval == 0.0) continue;
            // output (i,j) reads input (i+dh-ph, j+dw-pw)
            const int i0 = std::max(0, ph - dh);
            const int i1 = std::min(to, t + ph - dh);
            const int j0 = std::max(0, pw - dw);
            const int j1 = std::min(fo, f + pw - dw);
            for (int i = i0; i < i1; ++i) {
              double* orow = oplane + static_cast<int64_t>(i) * fo;
              const double* xrow =
                  xplane + static_cast<int64_t>(i + dh - ph) * f + (dw - pw);
              for (int j = j0; j < j1; ++j) orow[j] += wval * xrow[j];
            }
          }
        }
      }
    }
  }
  if (want_record({&x, &w})) {
    out.set_tracked();
    auto xn = x.node(), wn = w.node(), on = out.node();
    active_tape()->record([xn, wn, on, ci, t, f, co, kh, kw, ph, pw, to, fo] {
      if (on->grad.empty()) return;
      const double* dout = on->grad.data();
      if (xn->tracked) {
        double* dx = grad_buffer(xn).data();
        const double* wv = wn->value.data();
        for (int oc = 0; oc < co; ++oc) {
          const double* dplane = dout + static_cast<int64_t>(oc) * to * fo;
          for (int ic = 0; ic < ci; ++ic) {
            double* dxplane = dx + static_cast<int64_t>(ic) * t * f;
            const double* wk = wv + (static_cast<int64_t>(oc) * ci + ic) * kh * kw;
            for (int dh = 0; dh < kh; ++dh) {
              for (int dw = 0; dw < kw; ++dw) {
                const double wval = wk[dh * kw + dw];
                if (wval == 0.0) continue;
                const int i0 = std::max(0, ph - dh);
                const int i1 = std::min(to, t + ph - dh);
                const int j0 = std::max(0, pw - dw);
                const int j1 = std::min(fo, f + pw - dw);
                for (int i = i0; i < i1; ++i) {
                  const double* drow = dplane + static_cast<int64_t>(i) * fo;
                  double* dxrow =
                      dxplane + static_cast<int64_t>(i + dh - ph) * f + (dw - pw);
                  for (int j = j0; j < j1; ++j) dxrow[j] += wval * drow[j];
                }
              }
            }
          }
        }
      }
      if (wn->tracked) {
        double* dw_ = grad_buffer(wn).data();
        const double* xv = xn->value.data();
        for (int oc = 0; oc < co; ++oc) {
          const double* dplane = dout + static_cast<int64_t>(oc) * to * fo;
          for (int ic = 0; ic < ci; ++ic) {
            const double* xplane = xv + static_cast<int64_t>(ic) * t * f;
            double* dwk = dw_ + (static_cast<int64_t>(oc) * ci + ic) * kh * kw;
            for (int dh = 0; dh < kh; ++dh) {
              for (int dw2 = 0; dw2 < kw; ++dw2) {
                const int i0 = std::max(0, ph - dh);
                const int i1 = std::min(to, t + ph - dh);
                const int j0 = std::max(0, pw - dw2);
                const int j1 = std::min(fo, f + pw - dw2);
                double acc = 0.0;
                for (int i = i0; i < i1; ++i) {
                  const double* drow = dplane + static_cast<int64_t>(i) * fo;
                  const double* xrow =
                      xplane + static_cast<int64_t>(i + dh - ph) * f + (dw2 - pw);
                  for (int j = j0; j < j1; ++j) acc += drow[j] * xrow[j];
                }
                dwk[dh * kw + dw2] += acc;
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor avg_pool2d(const Tensor& x, int pt, int pf) {
  if (x.rank() != 3)
    throw DimensionError("avg_pool2d: need [C,T,F], got " + shape_str(x.shape()));
  const int c = x.extent(0), t = x.extent(1), f = x.extent(2);
  if (pt <= 0 || pf <= 0 || t % pt != 0 || f % pf != 0)
    throw DimensionError("avg_pool2d: " + shape_str(x.shape()) +
                         " not divisible by window " + std::to_string(pt) + "x" +
                         std::to_string(pf));
  const int to = t / pt, fo = f / pf;
  const double inv = 1.0 / (pt * pf);
  Tensor out(Shape{c, to, fo});
  const auto& xv = x.values();
  auto& ov = out.values();
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < to; ++i)
      for (int j = 0; j < fo; ++j) {
        double acc = 0.0;
        for (int di = 0; di < pt; ++di)
          for (int dj = 0; dj < pf; ++dj)
            acc += xv[(static_cast<int64_t>(ci) * t + i * pt + di) * f + j * pf + dj];
        ov[(static_cast<int64_t>(ci) * to + i) * fo + j] = acc * inv;
      }
  if (want_record({&x})) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on, c, t, f, pt, pf, to, fo, inv] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(xn);
      for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < to; ++i)
          for (int j = 0; j < fo; ++j) {
            const double d = on->grad[(static_cast<int64_t>(ci) * to + i) * fo + j] * inv;
            for (int di = 0; di < pt; ++di)
              for (int dj = 0; dj < pf; ++dj)
                g[(static_cast<int64_t>(ci) * t + i * pt + di) * f + j * pf + dj] += d;
          }
    });
  }
  return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, bool train,
                  double momentum, double eps, bool update_running) {
  if (x.rank() != 3)
    throw DimensionError("batch_norm: need [C,T,F], got " + shape_str(x.shape()));
  const int c = x.extent(0);
  const int64_t tf = static_cast<int64_t>(x.extent(1)) * x.extent(2);
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
      running_var.size() != c)
    throw DimensionError("batch_norm: state extent mismatch for C=" + std::to_string(c));

  std::vector<double> mean(c), var(c);
  if (train) {
    const auto& xv = x.values();
    const double inv = 1.0 / static_cast<double>(tf);
    for (int ci = 0; ci < c; ++ci) {
      double m = 0.0;
      for (int64_t p = 0; p < tf; ++p) m += xv[ci * tf + p];
      m *= inv;
      double v = 0.0;
      for (int64_t p = 0; p < tf; ++p) {
        double d = xv[ci * tf + p] - m;
        v += d * d;
      }
      mean[ci] = m;
      var[ci] = v * inv;
    }
    if (update_running) {
      auto& rm = running_mean.values();
      auto& rv = running_var.values();
      for (int ci = 0; ci < c; ++ci) {
        rm[ci] = momentum * rm[ci] + (1.0 - momentum) * mean[ci];
        rv[ci] = momentum * rv[ci] + (1.0 - momentum) * var[ci];
      }
    }
  } else {
    mean = running_mean.values();
    var = running_var.values();
  }

  Tensor out(x.shape());
  std::vector<double> inv_std(c);
  {
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    auto& ov = out.values();
    for (int ci = 0; ci < c; ++ci) {
      inv_std[ci] = 1.0 / std::sqrt(var[ci] + eps);
      const double a = gv[ci] * inv_std[ci];
      const double b = bv[ci] - a * mean[ci];
      for (int64_t p = 0; p < tf; ++p) ov[ci * tf + p] = a * xv[ci * tf + p] + b;
    }
  }

  if (want_record({&x, &gamma, &beta})) {
    out.set_tracked();
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    active_tape()->record([xn, gn, bn, on, c, tf, mean, inv_std, train] {
      if (on->grad.empty()) return;
      const double inv_n = 1.0 / static_cast<double>(tf);
      for (int ci = 0; ci < c; ++ci) {
        const double* dy = on->grad.data() + ci * tf;
        const double* xv = xn->value.data() + ci * tf;
        const double m = mean[ci], is = inv_std[ci], g = gn->value[ci];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t p = 0; p < tf; ++p) {
          sum_dy += dy[p];
          sum_dy_xhat += dy[p] * (xv[p] - m) * is;
        }
        if (gn->tracked) grad_buffer(gn)[ci] += sum_dy_xhat;
        if (bn->tracked) grad_buffer(bn)[ci] += sum_dy;
        if (xn->tracked) {
          double* dx = grad_buffer(xn).data() + ci * tf;
          if (train) {
            // batch statistics depend on x
            const double mdy = sum_dy * inv_n;
            const double mdyx = sum_dy_xhat * inv_n;
            for (int64_t p = 0; p < tf; ++p) {
              const double xhat = (xv[p] - m) * is;
              dx[p] += g * is * (dy[p] - mdy - xhat * mdyx);
            }
          } else {
            const double a = g * is;
            for (int64_t p = 0; p < tf; ++p) dx[p] += a * dy[p];
          }
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (x.rank() != 2)
    throw DimensionError("layer_norm: need [T,d], got " + shape_str(x.shape()));
  const int t = x.extent(0), d = x.extent(1);
  if (gamma.size() != d || beta.size() != d)
    throw DimensionError("layer_norm: gamma/beta extent mismatch for d=" +
                         std::to_string(d));
  Tensor out(x.shape());
  std::vector<double> mean(t), inv_std(t);
  {
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    auto& ov = out.values();
    const double inv_d = 1.0 / d;
    for (int i = 0; i < t; ++i) {
      const double* row = xv.data() + static_cast<int64_t>(i) * d;
      double m = 0.0;
      for (int j = 0; j < d; ++j) m += row[j];
      m *= inv_d;
      double v = 0.0;
      for (int j = 0; j < d; ++j) {
        double dv = row[j] - m;
        v += dv * dv;
      }
      v *= inv_d;
      mean[i] = m;
      inv_std[i] = 1.0 / std::sqrt(v + eps);
      double* orow = ov.data() + static_cast<int64_t>(i) * d;
      for (int j = 0; j < d; ++j)
        orow[j] = (row[j] - m) * inv_std[i] * gv[j] + bv[j];
    }
  }
  if (want_record({&x, &gamma, &beta})) {
    out.set_tracked();
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    active_tape()->record([xn, gn, bn, on, t, d, mean, inv_std] {
      if (on->grad.empty()) return;
      const double inv_d = 1.0 / d;
      for (int i = 0; i < t; ++i) {
        const double* dy = on->grad.data() + static_cast<int64_t>(i) * d;
        const double* xv = xn->value.data() + static_cast<int64_t>(i) * d;
        const double m = mean[i], is = inv_std[i];
        double sum_g_dy = 0.0, sum_g_dy_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
          const double xhat = (xv[j] - m) * is;
          const double gdy = dy[j] * gn->value[j];
          sum_g_dy += gdy;
          sum_g_dy_xhat += gdy * xhat;
          if (gn->tracked) grad_buffer(gn)[j] += dy[j] * xhat;
          if (bn->tracked) grad_buffer(bn)[j] += dy[j];
        }
        if (xn->tracked) {
          double* dx = grad_buffer(xn).data() + static_cast<int64_t>(i) * d;
          for (int j = 0; j < d; ++j) {
            const double xhat = (xv[j] - m) * is;
            dx[j] += is * (dy[j] * gn->value[j] - inv_d * sum_g_dy -
                           xhat * inv_d * sum_g_dy_xhat);
          }
        }
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
  auto mask = std::make_shared<std::vector<double>>(x.values().size());
  const double keep_inv = 1.0 / (1.0 - rate);
  for (auto& m : *mask) m = rng.uniform() >= rate ? keep_inv : 0.0;
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * (*mask)[i];
  if (want_record({&x})) {
    out.set_tracked();
    auto xn = x.node(), on = out.node();
    active_tape()->record([xn, on, mask] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(xn);
      for (size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor rel_gather(const Tensor& p) {
  if (p.rank() != 2)
    throw DimensionError("rel_gather: need rank-2, got " + shape_str(p.shape()));
  const int t = p.extent(0);
  if (p.extent(1) != 2 * t - 1)
    throw DimensionError("rel_gather: need [T,2T-1], got " + shape_str(p.shape()));
  const int w = 2 * t - 1;
  Tensor out(Shape{t, t});
  const auto& pv = p.values();
  auto& ov = out.values();
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j)
      ov[static_cast<int64_t>(i) * t + j] =
          pv[static_cast<int64_t>(i) * w + (i - j + t - 1)];
  if (want_record({&p})) {
    out.set_tracked();
    auto pn = p.node(), on = out.node();
    active_tape()->record([pn, on, t, w] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(pn);
      for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j)
          g[static_cast<int64_t>(i) * w + (i - j + t - 1)] +=
              on->grad[static_cast<int64_t>(i) * t + j];
    });
  }
  return out;
}

Tensor ldsa_combine(const Tensor& a, const Tensor& v) {
  if (a.rank() != 2 || v.rank() != 2 || a.extent(0) != v.extent(0))
    throw DimensionError("ldsa_combine: need [T,c] and [T,d], got " +
                         shape_str(a.shape()) + " and " + shape_str(v.shape()));
  const int t = a.extent(0), c = a.extent(1), d = v.extent(1);
  const int off = c / 2;
  Tensor out(Shape{t, d});
  {
    const auto& av = a.values();
    const auto& vv = v.values();
    auto& ov = out.values();
    for (int i = 0; i < t; ++i) {
      double* orow = ov.data() + static_cast<int64_t>(i) * d;
      for (int j = 0; j < c; ++j) {
        const int s = i + j - off;
        if (s < 0 || s >= t) continue;
        const double w = av[static_cast<int64_t>(i) * c + j];
        const double* vrow = vv.data() + static_cast<int64_t>(s) * d;
        for (int k = 0; k < d; ++k) orow[k] += w * vrow[k];
      }
    }
  }
  if (want_record({&a, &v})) {
    out.set_tracked();
    auto an = a.node(), vn = v.node(), on = out.node();
    active_tape()->record([an, vn, on, t, c, d, off] {
      if (on->grad.empty()) return;
      const double spoil = debug_hooks::corrupt_ldsa_backward ? 1.05 : 1.0;
      for (int i = 0; i < t; ++i) {
        const double* drow = on->grad.data() + static_cast<int64_t>(i) * d;
        for (int j = 0; j < c; ++j) {
          const int s = i + j - off;
          if (s < 0 || s >= t) continue;
          if (an->tracked) {
            const double* vrow = vn->value.data() + static_cast<int64_t>(s) * d;
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += drow[k] * vrow[k];
            grad_buffer(an)[static_cast<int64_t>(i) * c + j] += acc * spoil;
          }
          if (vn->tracked) {
            const double w = an->value[static_cast<int64_t>(i) * c + j];
            double* dv = grad_buffer(vn).data() + static_cast<int64_t>(s) * d;
            for (int k = 0; k < d; ++k) dv[k] += w * drow[k];
          }
        }
      }
    });
  }
  return out;
}

namespace {

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor gru_sequence(const Tensor& x, const Tensor& wi, const Tensor& wh,
                    const Tensor& bi, const Tensor& bh, bool reverse) {
  if (x.rank() != 2 || wi.rank() != 2 || wh.rank() != 2)
    throw DimensionError("gru_sequence: need rank-2 x/wi/wh");
  const int t = x.extent(0), din = x.extent(1);
  const int h = wh.extent(0);
  if (wi.extent(0) != din || wi.extent(1) != 3 * h || wh.extent(1) != 3 * h ||
      bi.size() != 3 * h || bh.size() != 3 * h)
    throw DimensionError("gru_sequence: parameter shapes disagree, x " +
                         shape_str(x.shape()) + " wi " + shape_str(wi.shape()) +
                         " wh " + shape_str(wh.shape()));

  // hidden state starts at zero for every sequence
  Tensor out(Shape{t, h});
  // per-step activations saved for backward: r, z, n, gh_n
  auto saved = std::make_shared<std::vector<double>>(
      static_cast<size_t>(t) * h * 4);

  {
    const double* xv = x.values().data();
    const double* wiv = wi.values().data();
    const double* whv = wh.values().data();
    const double* biv = bi.values().data();
    const double* bhv = bh.values().data();
    double* ov = out.values().data();

    std::vector<double> hprev(h, 0.0), gi(3 * h), gh(3 * h);
    for (int step = 0; step < t; ++step) {
      const int ti = reverse ? t - 1 - step : step;
      const double* xrow = xv + static_cast<int64_t>(ti) * din;
      for (int j = 0; j < 3 * h; ++j) gi[j] = biv[j];
      for (int p = 0; p < din; ++p) {
        const double xval = xrow[p];
        const double* wrow = wiv + static_cast<int64_t>(p) * 3 * h;
        for (int j = 0; j < 3 * h; ++j) gi[j] += xval * wrow[j];
      }
      for (int j = 0; j < 3 * h; ++j) gh[j] = bhv[j];
      for (int p = 0; p < h; ++p) {
        const double hval = hprev[p];
        const double* wrow = whv + static_cast<int64_t>(p) * 3 * h;
        for (int j = 0; j < 3 * h; ++j) gh[j] += hval * wrow[j];
      }
      double* srow = saved->data() + static_cast<int64_t>(ti) * h * 4;
      double* orow = ov + static_cast<int64_t>(ti) * h;
      for (int j = 0; j < h; ++j) {
        const double r = sigm(gi[j] + gh[j]);
        const double z = sigm(gi[h + j] + gh[h + j]);
        const double ghn = gh[2 * h + j];
        const double n = std::tanh(gi[2 * h + j] + r * ghn);
        const double hnew = (1.0 - z) * n + z * hprev[j];
        srow[j] = r;
        srow[h + j] = z;
        srow[2 * h + j] = n;
        srow[3 * h + j] = ghn;
        orow[j] = hnew;
      }
      for (int j = 0; j < h; ++j) hprev[j] = orow[j];
    }
  }

  if (want_record({&x, &wi, &wh, &bi, &bh})) {
    out.set_tracked();
    auto xn = x.node(), win = wi.node(), whn = wh.node(), bin_ = bi.node(),
         bhn = bh.node(), on = out.node();
    active_tape()->record([xn, win, whn, bin_, bhn, on, saved, t, din, h,
                           reverse] {
      if (on->grad.empty()) return;
      const double* xv = xn->value.data();
      const double* wiv = win->value.data();
      const double* whv = whn->value.data();
      const double* ov = on->value.data();

      double* dx = xn->tracked ? grad_buffer(xn).data() : nullptr;
      double* dwi = win->tracked ? grad_buffer(win).data() : nullptr;
      double* dwh = whn->tracked ? grad_buffer(whn).data() : nullptr;
      double* dbi = bin_->tracked ? grad_buffer(bin_).data() : nullptr;
      double* dbh = bhn->tracked ? grad_buffer(bhn).data() : nullptr;

      std::vector<double> dh(h, 0.0), dgi(3 * h), dgh(3 * h), dhprev(h);
      for (int step = t - 1; step >= 0; --step) {
        const int ti = reverse ? t - 1 - step : step;
        // grad flowing into h_t: from the output plus the next step's carry
        for (int j = 0; j < h; ++j)
          dh[j] += on->grad[static_cast<int64_t>(ti) * h + j];

        const double* srow = saved->data() + static_cast<int64_t>(ti) * h * 4;
        const int tprev = reverse ? ti + 1 : ti - 1;
        const bool has_prev = step > 0;
        const double* hprev_row =
            has_prev ? ov + static_cast<int64_t>(tprev) * h : nullptr;

        std::fill(dhprev.begin(), dhprev.end(), 0.0);
        for (int j = 0; j < h; ++j) {
          const double r = srow[j], z = srow[h + j], n = srow[2 * h + j],
                       ghn = srow[3 * h + j];
          const double hp = has_prev ? hprev_row[j] : 0.0;
          const double dhj = dh[j];
          const double dz = dhj * (hp - n) * z * (1.0 - z);
          const double dn = dhj * (1.0 - z) * (1.0 - n * n);
          dhprev[j] += dhj * z;
          const double dr = dn * ghn * r * (1.0 - r);
          dgi[j] = dr;
          dgh[j] = dr;
          dgi[h + j] = dz;
          dgh[h + j] = dz;
          dgi[2 * h + j] = dn;
          dgh[2 * h + j] = dn * r;
        }

        const double* xrow = xv + static_cast<int64_t>(ti) * din;
        if (dwi || dx) {
          for (int p = 0; p < din; ++p) {
            const double xval = xrow[p];
            if (dwi) {
              double* drow = dwi + static_cast<int64_t>(p) * 3 * h;
              for (int j = 0; j < 3 * h; ++j) drow[j] += xval * dgi[j];
            }
            if (dx) {
              const double* wrow = wiv + static_cast<int64_t>(p) * 3 * h;
              double acc = 0.0;
              for (int j = 0; j < 3 * h; ++j) acc += wrow[j] * dgi[j];
              dx[static_cast<int64_t>(ti) * din + p] += acc;
            }
          }
        }
        if (dbi)
          for (int j = 0; j < 3 * h; ++j) dbi[j] += dgi[j];
        if (dbh)
          for (int j = 0; j < 3 * h; ++j) dbh[j] += dgh[j];
        for (int p = 0; p < h; ++p) {
          const double hval = has_prev ? hprev_row[p] : 0.0;
          if (dwh && has_prev) {
            double* drow = dwh + static_cast<int64_t>(p) * 3 * h;
            for (int j = 0; j < 3 * h; ++j) drow[j] += hval * dgh[j];
          }
          const double* wrow = whv + static_cast<int64_t>(p) * 3 * h;
          double acc = 0.0;
          for (int j = 0; j < 3 * h; ++j) acc += wrow[j] * dgh[j];
          dhprev[p] += acc;
        }
        dh = dhprev;
      }
    });
  }
  return out;
}

Tensor bce_mean(const Tensor& p, const Tensor& target, double eps) {
  if (p.shape() != target.shape())
    throw DimensionError("bce_mean: shape mismatch " + shape_str(p.shape()) +
                         " vs " + shape_str(target.shape()));
  const auto& pv = p.values();
  const auto& yv = target.values();
  const double inv_n = 1.0 / static_cast<double>(p.size());
  double acc = 0.0;
  for (size_t i = 0; i < pv.size(); ++i) {
    const double pc = std::min(1.0 - eps, std::max(eps, pv[i]));
    acc -= yv[i] * std::log(pc) + (1.0 - yv[i]) * std::log(1.0 - pc);
  }
  Tensor out = Tensor::scalar(acc * inv_n);
  if (want_record({&p})) {
    out.set_tracked();
    auto pn = p.node(), yn = target.node(), on = out.node();
    active_tape()->record([pn, yn, on, eps, inv_n] {
      if (on->grad.empty()) return;
      auto& g = grad_buffer(pn);
      const double d0 = on->grad[0] * inv_n;
      for (size_t i = 0; i < g.size(); ++i) {
        const double pi = pn->value[i];
        if (pi <= eps || pi >= 1.0 - eps) continue;  // clamped: zero slope
        g[i] += d0 * (pi - yn->value[i]) / (pi * (1.0 - pi));
      }
    });
  }
  return out;
}

Tensor mse_mean(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("mse_mean: shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  const auto& av = a.values();
  const auto& bv = b.values();
  const double inv_n = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  Tensor out = Tensor::scalar(acc * inv_n);
  if (want_record({&a, &b})) {
    out.set_tracked();
    auto an = a.node(), bn = b.node(), on = out.node();
    active_tape()->record([an, bn, on, inv_n] {
      if (on->grad.empty()) return;
      const double d0 = on->grad[0] * inv_n * 2.0;
      if (an->tracked) {
        auto& g = grad_buffer(an);
        for (size_t i = 0; i < g.size(); ++i)
          g[i] += d0 * (an->value[i] - bn->value[i]);
      }
      if (bn->tracked) {
        auto& g = grad_buffer(bn);
        for (size_t i = 0; i < g.size(); ++i)
          g[i] -= d0 * (an->value[i] - bn->value[i]);
      }
    });
  }
  return out;
}

}  // namespace mga
