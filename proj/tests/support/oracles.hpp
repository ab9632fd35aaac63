#pragma once

// Independent reference implementations used as test oracles. These
// are deliberately written as plain loops, separate from the library
// kernels they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "tripletnet/tensor.hpp"

namespace oracles {

/// Windowed-sum 3x3/pad-1/stride-1 convolution; per output element the
/// sum starts from the bias and adds contributions in ascending
/// (channel, kernel row, kernel col) order, matching the documented
/// kernel order so results must be bit-equal.
template <typename T>
tripletnet::Tensor<T> conv2d_naive(const tripletnet::Tensor<T>& in,
                                   const tripletnet::Tensor<T>& w,
                                   const tripletnet::Tensor<T>& b) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int K = w.dim(0);
  tripletnet::Tensor<T> out({N, K, H, W});
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int oy = 0; oy < H; ++oy)
        for (int ox = 0; ox < W; ++ox) {
          T acc = b.data()[k];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy + ky - 1, ix = ox + kx - 1;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += w.data()[((int64_t(k) * C + c) * 3 + ky) * 3 + kx] *
                       in.data()[((int64_t(n) * C + c) * H + iy) * W + ix];
              }
          out.data()[((int64_t(n) * K + k) * H + oy) * W + ox] = acc;
        }
  return out;
}

template <typename T>
tripletnet::Tensor<T> maxpool_naive(const tripletnet::Tensor<T>& in) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int OH = (H + 1) / 2, OW = (W + 1) / 2;
  tripletnet::Tensor<T> out({N, C, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          T best = -std::numeric_limits<T>::infinity();
          for (int iy = 2 * oy; iy < std::min(2 * oy + 2, H); ++iy)
            for (int ix = 2 * ox; ix < std::min(2 * ox + 2, W); ++ix)
              best = std::max(best, in.data()[((int64_t(n) * C + c) * H + iy) * W + ix]);
          out.data()[((int64_t(n) * C + c) * OH + oy) * OW + ox] = best;
        }
  return out;
}

/// Central finite differences of a scalar function of flat parameters.
inline std::vector<double> fd_gradient(const std::function<double()>& f, double* x, int64_t n,
                                       double h = 1e-5) {
  std::vector<double> g(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[size_t(i)] = (up - down) / (2 * h);
  }
  return g;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double hinge(double x) { return x > 0 ? x : 0; }

/// Eq-by-eq triplet ranking loss on plain vectors.
inline double triplet_loss_ref(const std::vector<double>& p1, const std::vector<double>& p2,
                               const std::vector<double>& n, double m) {
  const double d12 = sq_dist(p1, p2);
  return hinge(m + d12 - sq_dist(p1, n)) + hinge(m + d12 - sq_dist(p2, n));
}

inline double norm_sq(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

/// Upper regularized incomplete gamma Q(a, x), for chi-square p-values.
inline double gamma_q(double a, double x) {
  if (x < 0 || a <= 0) return 1.0;
  auto gamma_p_series = [](double a, double x) {
    double sum = 1.0 / a, term = sum;
    for (int k = 1; k < 512; ++k) {
      term *= x / (a + k);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  };
  auto gamma_q_cf = [](double a, double x) {
    double b = x + 1 - a, c = 1e300, d = 1 / b, h = d;
    for (int i = 1; i < 512; ++i) {
      const double an = -double(i) * (double(i) - a);
      b += 2;
      d = an * d + b;
      if (std::abs(d) < 1e-300) d = 1e-300;
      c = b + an / c;
      if (std::abs(c) < 1e-300) c = 1e-300;
      d = 1 / d;
      const double delta = d * c;
      h *= delta;
      if (std::abs(delta - 1) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  };
  if (x < a + 1) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

/// Chi-square survival function: P(X >= stat) with k degrees of freedom.
inline double chi2_sf(double stat, int dof) { return gamma_q(dof / 2.0, stat / 2.0); }

/// Top-k eigenpairs of a symmetric matrix via power iteration with
/// deflation; independent of the library's Jacobi solver.
inline void power_eigen(std::vector<double> a, int n, int k, std::vector<double>& values,
                        std::vector<double>& vectors) {
  values.assign(size_t(k), 0.0);
  vectors.assign(size_t(k) * size_t(n), 0.0);
  for (int e = 0; e < k; ++e) {
    std::vector<double> v(size_t(n), 0.0);
    v[size_t(e % n)] = 1.0;
    v[0] += 0.5;
    double lambda = 0;
    for (int it = 0; it < 5000; ++it) {
      std::vector<double> w(size_t(n), 0.0);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) w[size_t(r)] += a[size_t(r) * size_t(n) + size_t(c)] * v[size_t(c)];
      double norm = 0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-300) break;
      double diff = 0;
      for (int r = 0; r < n; ++r) {
        w[size_t(r)] /= norm;
        diff += std::abs(w[size_t(r)] - v[size_t(r)]);
      }
      lambda = norm;
      const bool settled = diff < 1e-13 || std::abs(diff - 2.0) < 1e-13;  // +-v both fixed
      v = w;
      if (settled && it > 10) break;
    }
    values[size_t(e)] = lambda;
    for (int r = 0; r < n; ++r) vectors[size_t(e) * size_t(n) + size_t(r)] = v[size_t(r)];
    // deflate
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        a[size_t(r) * size_t(n) + size_t(c)] -= lambda * v[size_t(r)] * v[size_t(c)];
  }
}

}  // namespace oracles
