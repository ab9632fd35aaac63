#include "tripletnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tripletnet {

namespace {
int g_max_threads = 0;  // 0 = library default
}

void set_max_threads(int n) {
  g_max_threads = n;
#ifdef _OPENMP
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
#endif
}

int max_threads() {
#ifdef _OPENMP
  return g_max_threads > 0 ? g_max_threads : omp_get_max_threads();
#else
  (void)g_max_threads;
  return 1;
#endif
}

namespace debug {
namespace {
KinkProbe* g_probe = nullptr;
}
KinkProbe* kink_probe() { return g_probe; }
void set_kink_probe(KinkProbe* probe) { g_probe = probe; }
}  // namespace debug

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(op) + ": shape mismatch");
}

template <typename T>
bool want_grad(const Tape<T>* tape, const Tensor<T>& a) {
  return tape != nullptr && a.requires_grad();
}

template <typename T>
bool want_grad(const Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return tape != nullptr && (a.requires_grad() || b.requires_grad());
}

template <typename T>
bool want_grad(const Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& c) {
  return tape != nullptr && (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Tape<T>* tape) {
  if (input.ndim() != 4) throw ShapeError("conv2d: input must be [N,C,H,W]");
  if (weight.ndim() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3)
    throw ShapeError("conv2d: weight must be [K,C,3,3]");
  if (weight.dim(1) != input.dim(1))
    throw ShapeError("conv2d: input channels do not match weight channels");
  if (bias.ndim() != 1 || bias.dim(0) != weight.dim(0))
    throw ShapeError("conv2d: bias must be [K]");

  const int n_batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int k_out = weight.dim(0);
  Tensor<T> out({n_batch, k_out, h, w});

  const T* x = input.data();
  const T* wt = weight.data();
  const T* bs = bias.data();
  T* y = out.data();
  const int64_t in_plane = int64_t(h) * w;
  const int64_t in_img = int64_t(c_in) * in_plane;
  const int64_t out_img = int64_t(k_out) * in_plane;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    for (int k = 0; k < k_out; ++k) {
      T* yp = y + n * out_img + k * in_plane;
      const T b = bs[k];
      for (int64_t i = 0; i < in_plane; ++i) yp[i] = b;
      for (int c = 0; c < c_in; ++c) {
        const T* xp = x + n * in_img + c * in_plane;
        const T* wp = wt + (int64_t(k) * c_in + c) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const T wv = wp[ky * 3 + kx];
            const int oy0 = std::max(0, 1 - ky), oy1 = std::min(h, h + 1 - ky);
            const int ox0 = std::max(0, 1 - kx), ox1 = std::min(w, w + 1 - kx);
            for (int oy = oy0; oy < oy1; ++oy) {
              T* yr = yp + int64_t(oy) * w;
              const T* xr = xp + int64_t(oy + ky - 1) * w + (kx - 1);
              for (int ox = ox0; ox < ox1; ++ox) yr[ox] += wv * xr[ox];
            }
          }
        }
      }
    }
  }

  if (want_grad(tape, input, weight, bias)) {
    out.mark_taped();
    Tensor<T> in_t = input, w_t = weight, b_t = bias, out_t = out;
    tape->record(out, [in_t, w_t, b_t, out_t]() mutable {
      const int n_batch = in_t.dim(0), c_in = in_t.dim(1), h = in_t.dim(2), w = in_t.dim(3);
      const int k_out = w_t.dim(0);
      const int64_t plane = int64_t(h) * w;
      const int64_t in_img = int64_t(c_in) * plane;
      const int64_t out_img = int64_t(k_out) * plane;
      const T* g = out_t.grad_data();
      const T* x = in_t.data();
      const T* wt = w_t.data();

      if (b_t.requires_grad()) {
        T* gb = b_t.grad();
#pragma omp parallel for schedule(static)
        for (int k = 0; k < k_out; ++k) {
          T acc = gb[k];
          for (int n = 0; n < n_batch; ++n) {
            const T* gp = g + n * out_img + k * plane;
            for (int64_t i = 0; i < plane; ++i) acc += gp[i];
          }
          gb[k] = acc;
        }
      }

      if (w_t.requires_grad()) {
        T* gw = w_t.grad();
#pragma omp parallel for collapse(2) schedule(static)
        for (int k = 0; k < k_out; ++k) {
          for (int c = 0; c < c_in; ++c) {
            T* gwp = gw + (int64_t(k) * c_in + c) * 9;
            for (int ky = 0; ky < 3; ++ky) {
              const int oy0 = std::max(0, 1 - ky), oy1 = std::min(h, h + 1 - ky);
              // three independent kx accumulators per row for ILP; each
              // keeps ascending (n, oy, ox) order
              T acc0 = gwp[ky * 3 + 0], acc1 = gwp[ky * 3 + 1], acc2 = gwp[ky * 3 + 2];
              for (int n = 0; n < n_batch; ++n) {
                const T* gp = g + n * out_img + k * plane;
                const T* xp = x + n * in_img + c * plane;
                for (int oy = oy0; oy < oy1; ++oy) {
                  const T* gr = gp + int64_t(oy) * w;
                  const T* xr = xp + int64_t(oy + ky - 1) * w;
                  {  // kx = 0: ox in [1, w)
                    T s = T(0);
                    for (int ox = 1; ox < w; ++ox) s += gr[ox] * xr[ox - 1];
                    acc0 += s;
                  }
                  {  // kx = 1: ox in [0, w)
                    T s = T(0);
                    for (int ox = 0; ox < w; ++ox) s += gr[ox] * xr[ox];
                    acc1 += s;
                  }
                  {  // kx = 2: ox in [0, w-1)
                    T s = T(0);
                    for (int ox = 0; ox < w - 1; ++ox) s += gr[ox] * xr[ox + 1];
                    acc2 += s;
                  }
                }
              }
              gwp[ky * 3 + 0] = acc0;
              gwp[ky * 3 + 1] = acc1;
              gwp[ky * 3 + 2] = acc2;
            }
          }
        }
      }

      if (in_t.requires_grad()) {
        T* gx = in_t.grad();
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < n_batch; ++n) {
          for (int c = 0; c < c_in; ++c) {
            T* gxp = gx + n * in_img + c * plane;
            for (int k = 0; k < k_out; ++k) {
              const T* gp = g + n * out_img + k * plane;
              const T* wp = wt + (int64_t(k) * c_in + c) * 9;
              for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                  const T wv = wp[ky * 3 + kx];
                  const int oy0 = std::max(0, 1 - ky), oy1 = std::min(h, h + 1 - ky);
                  const int ox0 = std::max(0, 1 - kx), ox1 = std::min(w, w + 1 - kx);
                  for (int oy = oy0; oy < oy1; ++oy) {
                    const T* gr = gp + int64_t(oy) * w;
                    T* xr = gxp + int64_t(oy + ky - 1) * w + (kx - 1);
                    for (int ox = ox0; ox < ox1; ++ox) xr[ox] += wv * gr[ox];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2d_ceil(const Tensor<T>& input, Tape<T>* tape) {
  if (input.ndim() != 4) throw ShapeError("maxpool2d_ceil: input must be [N,C,H,W]");
  const int n_batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor<T> out({n_batch, c, oh, ow});

  const T* x = input.data();
  T* y = out.data();
  const int64_t planes = int64_t(n_batch) * c;
  const int64_t in_plane = int64_t(h) * w;
  const int64_t out_plane = int64_t(oh) * ow;
  // argmax (flat in-plane index) per output element, shared with backward
  auto argmax = std::make_shared<std::vector<int32_t>>(size_t(planes * out_plane));
  int32_t* am = argmax->data();
  debug::KinkProbe* probe = debug::kink_probe();

#pragma omp parallel for schedule(static) if (probe == nullptr)
  for (int64_t p = 0; p < planes; ++p) {
    const T* xp = x + p * in_plane;
    T* yp = y + p * out_plane;
    int32_t* ap = am + p * out_plane;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int y0 = 2 * oy, x0 = 2 * ox;
        const int y1 = std::min(y0 + 2, h), x1 = std::min(x0 + 2, w);
        T best = xp[int64_t(y0) * w + x0];
        int32_t besti = int32_t(y0 * w + x0);
        T runner_up = -std::numeric_limits<T>::infinity();
        for (int iy = y0; iy < y1; ++iy) {
          for (int ix = x0; ix < x1; ++ix) {
            const T v = xp[int64_t(iy) * w + ix];
            if (v > best) {
              runner_up = best;
              best = v;
              besti = int32_t(iy * w + ix);
            } else if (iy != y0 || ix != x0) {
              runner_up = std::max(runner_up, v);
            }
          }
        }
        yp[int64_t(oy) * ow + ox] = best;
        ap[int64_t(oy) * ow + ox] = besti;
        if (probe && runner_up > -std::numeric_limits<T>::infinity())
          probe->min_pool_gap = std::min(probe->min_pool_gap, double(best - runner_up));
      }
    }
  }

  if (want_grad(tape, input)) {
    out.mark_taped();
    Tensor<T> in_t = input, out_t = out;
    tape->record(out, [in_t, out_t, argmax]() mutable {
      const int64_t planes = int64_t(in_t.dim(0)) * in_t.dim(1);
      const int64_t in_plane = int64_t(in_t.dim(2)) * in_t.dim(3);
      const int64_t out_plane = out_t.numel() / planes;
      const T* g = out_t.grad_data();
      T* gx = in_t.grad();
      const int32_t* am = argmax->data();
#pragma omp parallel for schedule(static)
      for (int64_t p = 0; p < planes; ++p) {
        const T* gp = g + p * out_plane;
        T* gxp = gx + p * in_plane;
        const int32_t* ap = am + p * out_plane;
        for (int64_t i = 0; i < out_plane; ++i) gxp[ap[i]] += gp[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input, Tape<T>* tape) {
  Tensor<T> out(input.shape());
  const T* x = input.data();
  T* y = out.data();
  const int64_t n = input.numel();
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);

  if (debug::KinkProbe* probe = debug::kink_probe()) {
    for (int64_t i = 0; i < n; ++i)
      probe->min_relu_margin = std::min(probe->min_relu_margin, std::abs(double(x[i])));
  }

  if (want_grad(tape, input)) {
    out.mark_taped();
    Tensor<T> in_t = input, out_t = out;
    tape->record(out, [in_t, out_t]() mutable {
      const T* g = out_t.grad_data();
      const T* x = in_t.data();
      T* gx = in_t.grad();
      const int64_t n = in_t.numel();
      for (int64_t i = 0; i < n; ++i)
        if (x[i] > T(0)) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                    BatchNormState<T>& state, Mode mode, Tape<T>* tape) {
  if (input.ndim() < 2) throw ShapeError("batchnorm: input must be [N,C,...]");
  const int n_batch = input.dim(0), c = input.dim(1);
  if (gamma.numel() != c || beta.numel() != c)
    throw ShapeError("batchnorm: gamma/beta must have one value per channel");
  if (mode == Mode::kTrain && n_batch < 2)
    throw ValueError("batchnorm: train mode requires batch size >= 2");

  const int64_t spatial = input.numel() / (int64_t(n_batch) * c);
  const int64_t chan_stride = spatial;
  const int64_t img_stride = int64_t(c) * spatial;
  const int64_t count = int64_t(n_batch) * spatial;

  Tensor<T> out(input.shape());
  const T* x = input.data();
  T* y = out.data();
  const T* gm = gamma.data();
  const T* bt = beta.data();
  const T eps = state.eps;

  if (mode == Mode::kEval) {
    const T* rm = state.running_mean.data();
    const T* rv = state.running_var.data();
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
      const T inv = T(1) / std::sqrt(rv[ch] + eps);
      for (int n = 0; n < n_batch; ++n) {
        const T* xp = x + n * img_stride + ch * chan_stride;
        T* yp = y + n * img_stride + ch * chan_stride;
        for (int64_t i = 0; i < spatial; ++i) yp[i] = gm[ch] * ((xp[i] - rm[ch]) * inv) + bt[ch];
      }
    }
    if (want_grad(tape, input, gamma, beta)) {
      out.mark_taped();
      Tensor<T> in_t = input, gm_t = gamma, bt_t = beta, out_t = out;
      Tensor<T> rv_t = state.running_var, rm_t = state.running_mean;
      tape->record(out, [in_t, gm_t, bt_t, out_t, rm_t, rv_t, eps]() mutable {
        const int n_batch = in_t.dim(0), c = in_t.dim(1);
        const int64_t spatial = in_t.numel() / (int64_t(n_batch) * c);
        const int64_t img_stride = int64_t(c) * spatial;
        const T* g = out_t.grad_data();
        const T* x = in_t.data();
        for (int ch = 0; ch < c; ++ch) {
          const T inv = T(1) / std::sqrt(rv_t.data()[ch] + eps);
          const T m = rm_t.data()[ch];
          T dg = T(0), db = T(0);
          for (int n = 0; n < n_batch; ++n) {
            const T* gp = g + n * img_stride + ch * spatial;
            const T* xp = x + n * img_stride + ch * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
              dg += gp[i] * ((xp[i] - m) * inv);
              db += gp[i];
            }
          }
          if (gm_t.requires_grad()) gm_t.grad()[ch] += dg;
          if (bt_t.requires_grad()) bt_t.grad()[ch] += db;
          if (in_t.requires_grad()) {
            const T k = gm_t.data()[ch] * inv;
            for (int n = 0; n < n_batch; ++n) {
              const T* gp = g + n * img_stride + ch * spatial;
              T* gxp = in_t.grad() + n * img_stride + ch * spatial;
              for (int64_t i = 0; i < spatial; ++i) gxp[i] += k * gp[i];
            }
          }
        }
      });
    }
    return out;
  }

  // train mode: per-channel batch statistics in ascending (n, spatial) order
  Tensor<T> xhat(input.shape());
  std::vector<T> mean(static_cast<size_t>(c), T(0));
  std::vector<T> invstd(static_cast<size_t>(c), T(0));
  T* xh = xhat.data();
  T* rm = state.running_mean.data();
  T* rv = state.running_var.data();
  const T mom = state.momentum;

#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    T s = T(0);
    for (int n = 0; n < n_batch; ++n) {
      const T* xp = x + n * img_stride + ch * chan_stride;
      for (int64_t i = 0; i < spatial; ++i) s += xp[i];
    }
    const T m = s / T(count);
    T v = T(0);
    for (int n = 0; n < n_batch; ++n) {
      const T* xp = x + n * img_stride + ch * chan_stride;
      for (int64_t i = 0; i < spatial; ++i) {
        const T d = xp[i] - m;
        v += d * d;
      }
    }
    v /= T(count);
    const T inv = T(1) / std::sqrt(v + eps);
    mean[size_t(ch)] = m;
    invstd[size_t(ch)] = inv;
    for (int n = 0; n < n_batch; ++n) {
      const T* xp = x + n * img_stride + ch * chan_stride;
      T* xhp = xh + n * img_stride + ch * chan_stride;
      T* yp = y + n * img_stride + ch * chan_stride;
      for (int64_t i = 0; i < spatial; ++i) {
        xhp[i] = (xp[i] - m) * inv;
        yp[i] = gm[ch] * xhp[i] + bt[ch];
      }
    }
    rm[ch] = (T(1) - mom) * rm[ch] + mom * m;
    rv[ch] = (T(1) - mom) * rv[ch] + mom * v;
  }

  if (want_grad(tape, input, gamma, beta)) {
    out.mark_taped();
    Tensor<T> in_t = input, gm_t = gamma, bt_t = beta, out_t = out;
    auto saved_invstd = std::make_shared<std::vector<T>>(std::move(invstd));
    tape->record(out, [in_t, gm_t, bt_t, out_t, xhat, saved_invstd]() mutable {
      const int n_batch = in_t.dim(0), c = in_t.dim(1);
      const int64_t spatial = in_t.numel() / (int64_t(n_batch) * c);
      const int64_t img_stride = int64_t(c) * spatial;
      const int64_t count = int64_t(n_batch) * spatial;
      const T* g = out_t.grad_data();
      const T* xh = xhat.data();
      T* ggamma = gm_t.requires_grad() ? gm_t.grad() : nullptr;
      T* gbeta = bt_t.requires_grad() ? bt_t.grad() : nullptr;
      T* gin = in_t.requires_grad() ? in_t.grad() : nullptr;
#pragma omp parallel for schedule(static)
      for (int ch = 0; ch < c; ++ch) {
        T dg = T(0), db = T(0);
        for (int n = 0; n < n_batch; ++n) {
          const T* gp = g + n * img_stride + ch * spatial;
          const T* xhp = xh + n * img_stride + ch * spatial;
          for (int64_t i = 0; i < spatial; ++i) {
            dg += gp[i] * xhp[i];
            db += gp[i];
          }
        }
        if (ggamma) ggamma[ch] += dg;
        if (gbeta) gbeta[ch] += db;
        if (gin) {
          const T k = gm_t.data()[ch] * (*saved_invstd)[size_t(ch)];
          const T mean_dy = db / T(count);
          const T mean_dy_xhat = dg / T(count);
          for (int n = 0; n < n_batch; ++n) {
            const T* gp = g + n * img_stride + ch * spatial;
            const T* xhp = xh + n * img_stride + ch * spatial;
            T* gxp = gin + n * img_stride + ch * spatial;
            for (int64_t i = 0; i < spatial; ++i)
              gxp[i] += k * (gp[i] - mean_dy - xhp[i] * mean_dy_xhat);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                          Tape<T>* tape) {
  if (input.ndim() != 2) throw ShapeError("fully_connected: input must be [N,D]");
  if (weight.ndim() != 2 || weight.dim(0) != input.dim(1))
    throw ShapeError("fully_connected: inner dimensions do not match");
  if (bias.ndim() != 1 || bias.dim(0) != weight.dim(1))
    throw ShapeError("fully_connected: bias must be [E]");

  const int n_batch = input.dim(0), d = input.dim(1), e = weight.dim(1);
  Tensor<T> out({n_batch, e});
  const T* x = input.data();
  const T* wt = weight.data();
  const T* bs = bias.data();
  T* y = out.data();

#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    T* yp = y + int64_t(n) * e;
    for (int j = 0; j < e; ++j) yp[j] = bs[j];
    const T* xp = x + int64_t(n) * d;
    for (int i = 0; i < d; ++i) {
      const T xv = xp[i];
      const T* wr = wt + int64_t(i) * e;
      for (int j = 0; j < e; ++j) yp[j] += xv * wr[j];
    }
  }

  if (want_grad(tape, input, weight, bias)) {
    out.mark_taped();
    Tensor<T> in_t = input, w_t = weight, b_t = bias, out_t = out;
    tape->record(out, [in_t, w_t, b_t, out_t]() mutable {
      const int n_batch = in_t.dim(0), d = in_t.dim(1), e = w_t.dim(1);
      const T* g = out_t.grad_data();
      const T* x = in_t.data();
      const T* wt = w_t.data();
      if (b_t.requires_grad()) {
        T* gb = b_t.grad();
        for (int n = 0; n < n_batch; ++n) {
          const T* gp = g + int64_t(n) * e;
          for (int j = 0; j < e; ++j) gb[j] += gp[j];
        }
      }
      if (w_t.requires_grad()) {
        T* gw = w_t.grad();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < d; ++i) {
          T* gwr = gw + int64_t(i) * e;
          for (int n = 0; n < n_batch; ++n) {
            const T xv = x[int64_t(n) * d + i];
            const T* gp = g + int64_t(n) * e;
            for (int j = 0; j < e; ++j) gwr[j] += xv * gp[j];
          }
        }
      }
      if (in_t.requires_grad()) {
        T* gx = in_t.grad();
#pragma omp parallel for schedule(static)
        for (int n = 0; n < n_batch; ++n) {
          const T* gp = g + int64_t(n) * e;
          T* gxp = gx + int64_t(n) * d;
          for (int i = 0; i < d; ++i) {
            const T* wr = wt + int64_t(i) * e;
            T s = T(0);
            for (int j = 0; j < e; ++j) s += gp[j] * wr[j];
            gxp[i] += s;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& input, Tape<T>* tape) {
  if (input.ndim() < 1) throw ShapeError("flatten: input must have at least one dim");
  const int n_batch = input.dim(0);
  const int rest = int(input.numel() / n_batch);
  Tensor<T> out({n_batch, rest});
  std::copy(input.data(), input.data() + input.numel(), out.data());

  if (want_grad(tape, input)) {
    out.mark_taped();
    Tensor<T> in_t = input, out_t = out;
    tape->record(out, [in_t, out_t]() mutable {
      const T* g = out_t.grad_data();
      T* gx = in_t.grad();
      const int64_t n = in_t.numel();
      for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (want_grad(tape, a, b)) {
    out.mark_taped();
    Tensor<T> a_t = a, b_t = b, out_t = out;
    tape->record(out, [a_t, b_t, out_t]() mutable {
      const T* g = out_t.grad_data();
      const int64_t n = out_t.numel();
      if (a_t.requires_grad()) {
        T* ga = a_t.grad();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (b_t.requires_grad()) {
        T* gb = b_t.grad();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (want_grad(tape, a, b)) {
    out.mark_taped();
    Tensor<T> a_t = a, b_t = b, out_t = out;
    tape->record(out, [a_t, b_t, out_t]() mutable {
      const T* g = out_t.grad_data();
      const int64_t n = out_t.numel();
      if (a_t.requires_grad()) {
        T* ga = a_t.grad();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (b_t.requires_grad()) {
        T* gb = b_t.grad();
        for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (want_grad(tape, a, b)) {
    out.mark_taped();
    Tensor<T> a_t = a, b_t = b, out_t = out;
    tape->record(out, [a_t, b_t, out_t]() mutable {
      const T* g = out_t.grad_data();
      const int64_t n = out_t.numel();
      if (a_t.requires_grad()) {
        T* ga = a_t.grad();
        const T* bd = b_t.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * bd[i];
      }
      if (b_t.requires_grad()) {
        T* gb = b_t.grad();
        const T* ad = a_t.data();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * ad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c, Tape<T>* tape) {
  Tensor<T> out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
  if (want_grad(tape, a)) {
    out.mark_taped();
    Tensor<T> a_t = a, out_t = out;
    tape->record(out, [a_t, out_t, c]() mutable {
      const T* g = out_t.grad_data();
      T* ga = a_t.grad();
      const int64_t n = out_t.numel();
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * c;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_const(const Tensor<T>& a, T c, Tape<T>* tape) {
  Tensor<T> out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + c;
  if (want_grad(tape, a)) {
    out.mark_taped();
    Tensor<T> a_t = a, out_t = out;
    tape->record(out, [a_t, out_t]() mutable {
      const T* g = out_t.grad_data();
      T* ga = a_t.grad();
      const int64_t n = out_t.numel();
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a, Tape<T>* tape) {
  Tensor<T> out({1});
  T s = T(0);
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) s += a.data()[i];
  out.data()[0] = s;
  if (want_grad(tape, a)) {
    out.mark_taped();
    Tensor<T> a_t = a, out_t = out;
    tape->record(out, [a_t, out_t]() mutable {
      const T g = out_t.grad_data()[0];
      T* ga = a_t.grad();
      const int64_t n = a_t.numel();
      for (int64_t i = 0; i < n; ++i) ga[i] += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> row_sum(const Tensor<T>& a, Tape<T>* tape) {
  if (a.ndim() != 2) throw ShapeError("row_sum: input must be [N,M]");
  const int n = a.dim(0), m = a.dim(1);
  Tensor<T> out({n});
  for (int r = 0; r < n; ++r) {
    T s = T(0);
    const T* ap = a.data() + int64_t(r) * m;
    for (int j = 0; j < m; ++j) s += ap[j];
    out.data()[r] = s;
  }
  if (want_grad(tape, a)) {
    out.mark_taped();
    Tensor<T> a_t = a, out_t = out;
    tape->record(out, [a_t, out_t]() mutable {
      const int n = a_t.dim(0), m = a_t.dim(1);
      const T* g = out_t.grad_data();
      T* ga = a_t.grad();
      for (int r = 0; r < n; ++r) {
        T* gp = ga + int64_t(r) * m;
        for (int j = 0; j < m; ++j) gp[j] += g[r];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s, Tape<T>* tape) {
  if (s.numel() != 1) throw ShapeError("mul_scalar: s must be a single-element tensor");
  Tensor<T> out(x.shape());
  const T sv = s.data()[0];
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * sv;
  if (want_grad(tape, x, s)) {
    out.mark_taped();
    Tensor<T> x_t = x, s_t = s, out_t = out;
    tape->record(out, [x_t, s_t, out_t]() mutable {
      const T* g = out_t.grad_data();
      const int64_t n = out_t.numel();
      if (x_t.requires_grad()) {
        T* gx = x_t.grad();
        const T sv = s_t.data()[0];
        for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * sv;
      }
      if (s_t.requires_grad()) {
        T acc = T(0);
        const T* xd = x_t.data();
        for (int64_t i = 0; i < n; ++i) acc += g[i] * xd[i];
        s_t.grad()[0] += acc;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, const Tensor<T>& s, Tape<T>* tape) {
  if (s.numel() != 1) throw ShapeError("add_scalar: s must be a single-element tensor");
  Tensor<T> out(x.shape());
  const T sv = s.data()[0];
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] + sv;
  if (want_grad(tape, x, s)) {
    out.mark_taped();
    Tensor<T> x_t = x, s_t = s, out_t = out;
    tape->record(out, [x_t, s_t, out_t]() mutable {
      const T* g = out_t.grad_data();
      const int64_t n = out_t.numel();
      if (x_t.requires_grad()) {
        T* gx = x_t.grad();
        for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
      }
      if (s_t.requires_grad()) {
        T acc = T(0);
        for (int64_t i = 0; i < n; ++i) acc += g[i];
        s_t.grad()[0] += acc;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const std::vector<T>& targets, Tape<T>* tape) {
  if (int64_t(targets.size()) != logits.numel())
    throw ShapeError("bce_with_logits: one target per logit required");
  Tensor<T> out(logits.shape());
  const int64_t n = logits.numel();
  for (int64_t i = 0; i < n; ++i) {
    const T z = logits.data()[i];
    const T y = targets[size_t(i)];
    out.data()[i] = std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  if (want_grad(tape, logits)) {
    out.mark_taped();
    Tensor<T> z_t = logits, out_t = out;
    tape->record(out, [z_t, out_t, targets]() mutable {
      const T* g = out_t.grad_data();
      T* gz = z_t.grad();
      const int64_t n = z_t.numel();
      for (int64_t i = 0; i < n; ++i) {
        const T z = z_t.data()[i];
        const T sig = T(1) / (T(1) + std::exp(-z));
        gz[i] += g[i] * (sig - targets[size_t(i)]);
      }
    });
  }
  return out;
}

#define TRIPLETNET_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tape<T>*);   \
  template Tensor<T> maxpool2d_ceil<T>(const Tensor<T>&, Tape<T>*);                               \
  template Tensor<T> relu<T>(const Tensor<T>&, Tape<T>*);                                         \
  template Tensor<T> batchnorm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                  BatchNormState<T>&, Mode, Tape<T>*);                            \
  template Tensor<T> fully_connected<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                        Tape<T>*);                                                \
  template Tensor<T> flatten<T>(const Tensor<T>&, Tape<T>*);                                      \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&, Tape<T>*);                        \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&, Tape<T>*);                        \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&, Tape<T>*);                        \
  template Tensor<T> scale<T>(const Tensor<T>&, T, Tape<T>*);                                     \
  template Tensor<T> add_const<T>(const Tensor<T>&, T, Tape<T>*);                                 \
  template Tensor<T> sum<T>(const Tensor<T>&, Tape<T>*);                                          \
  template Tensor<T> row_sum<T>(const Tensor<T>&, Tape<T>*);                                      \
  template Tensor<T> mul_scalar<T>(const Tensor<T>&, const Tensor<T>&, Tape<T>*);                 \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, const Tensor<T>&, Tape<T>*);                 \
  template Tensor<T> bce_with_logits<T>(const Tensor<T>&, const std::vector<T>&, Tape<T>*);

TRIPLETNET_INSTANTIATE_OPS(float)
TRIPLETNET_INSTANTIATE_OPS(double)

#undef TRIPLETNET_INSTANTIATE_OPS

}  // namespace tripletnet
