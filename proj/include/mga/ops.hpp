#pragma once

#include <vector>

#include "mga/tensor.hpp"

namespace mga {

// ---------------------------------------------------------------------------
// Elementwise and scalar
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);  // tanh approximation
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);

/// out = a * s where s is a single-element tensor (learned branch weight).
Tensor scale(const Tensor& a, const Tensor& s);

// ---------------------------------------------------------------------------
// Linear algebra and shape
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // 2-D
Tensor reshape(const Tensor& a, Shape shape);

/// Adds a length-n vector to every row of an [m,n] matrix.
Tensor add_rowvec(const Tensor& a, const Tensor& r);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int c0, int c1);

/// [C,T,F] -> [T*F, C]: positions become rows so a per-position linear map
/// over channels is a plain matmul.
Tensor channels_last(const Tensor& x);
/// Inverse of channels_last.
Tensor channels_first(const Tensor& y, int t, int f);

// ---------------------------------------------------------------------------
// Reductions and normalizers
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);

/// Per-channel mean over the T,F plane: [C,T,F] -> [1,C].
Tensor global_avg_pool(const Tensor& x);

// ---------------------------------------------------------------------------
// Neural-net kernels
// ---------------------------------------------------------------------------

/// Cross-correlation, stride 1. x [C_in,T,F], w [C_out,C_in,kh,kw];
/// output [C_out, T-kh+1+2ph, F-kw+1+2pw].
Tensor conv2d(const Tensor& x, const Tensor& w, int ph, int pw);

Tensor avg_pool2d(const Tensor& x, int pt, int pf);

/// x [C,T,F]; gamma/beta [C]. train mode normalizes with this input's
/// statistics and (when update_running) folds them into the running
/// buffers with `momentum` kept of the old value; eval mode normalizes
/// with the running buffers.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, bool train,
                  double momentum, double eps, bool update_running = true);

/// Row-wise layer norm of [T,d] with learned gamma/beta [d].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Inverted dropout; call sites gate on train mode.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

/// out[i,j] = p[i, i-j+T-1] for p [T, 2T-1]; maps relative-offset columns
/// onto an attention logit matrix.
Tensor rel_gather(const Tensor& p);

/// Local window combine of LDSA: out[t] = sum_j a[t,j] * v[t+j-floor(c/2)],
/// frames outside [0,T) contributing zero. a [T,c], v [T,d].
Tensor ldsa_combine(const Tensor& a, const Tensor& v);

/// Single-direction GRU over a [T,din] sequence; returns hidden states
/// [T,h]. Gate column layout in wi/wh/bi/bh is [reset | update | candidate].
Tensor gru_sequence(const Tensor& x, const Tensor& wi, const Tensor& wh,
                    const Tensor& bi, const Tensor& bh, bool reverse);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy; probabilities clamped to [eps, 1-eps].
Tensor bce_mean(const Tensor& p, const Tensor& target, double eps = 1e-7);

Tensor mse_mean(const Tensor& a, const Tensor& b);

namespace debug_hooks {
/// Test-only mutation switch: deliberately corrupts the LDSA backward rule
/// so the verification suite can prove it catches a broken gradient.
extern bool corrupt_ldsa_backward;
}  // namespace debug_hooks

}  // namespace mga
