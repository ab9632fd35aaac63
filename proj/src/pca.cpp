#include "tripletnet/pca.hpp"

#include <algorithm>
#include <cmath>

namespace tripletnet {

namespace {

/// Cyclic Jacobi eigendecomposition of a symmetric n x n matrix.
/// Returns eigenvalues (descending) and matching eigenvectors as rows.
void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& values,
                  std::vector<double>& vectors) {
  std::vector<double> v(size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[size_t(i) * n + i] = 1.0;

  auto at = [&](std::vector<double>& m, int r, int c) -> double& { return m[size_t(r) * n + c]; };

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    if (off < 1e-24) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(a, k, p), akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(a, p, k), aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = at(v, k, p), vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) order[size_t(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return at(a, x, x) > at(a, y, y); });

  values.assign(size_t(n), 0.0);
  vectors.assign(size_t(n) * n, 0.0);
  for (int r = 0; r < n; ++r) {
    values[size_t(r)] = at(a, order[size_t(r)], order[size_t(r)]);
    for (int k = 0; k < n; ++k) vectors[size_t(r) * n + k] = at(v, k, order[size_t(r)]);
  }
}

}  // namespace

PcaResult pca_project(const std::vector<double>& data, int rows, int cols, int dims) {
  if (rows < 1 || cols < 1 || int64_t(rows) * cols != int64_t(data.size()))
    throw ValueError("pca_project: data size does not match rows x cols");
  if (dims < 1 || dims > cols) throw ValueError("pca_project: dims out of range");
  if (rows < dims + 1) throw ValueError("pca_project: need at least dims + 1 rows");

  // center columns
  std::vector<double> centered(data.size());
  for (int c = 0; c < cols; ++c) {
    double mean = 0;
    for (int r = 0; r < rows; ++r) mean += data[size_t(r) * cols + c];
    mean /= rows;
    for (int r = 0; r < rows; ++r) centered[size_t(r) * cols + c] = data[size_t(r) * cols + c] - mean;
  }

  double total_var = 0;
  for (double x : centered) total_var += x * x;
  total_var /= double(rows - 1);

  PcaResult out;
  out.rows = rows;
  out.dims = dims;
  out.coords.assign(size_t(rows) * dims, 0.0);
  out.explained.assign(size_t(dims), 0.0);
  out.components.assign(size_t(dims) * cols, 0.0);
  if (total_var <= 0) return out;  // all points identical

  std::vector<double> values, vectors;
  std::vector<double> directions(size_t(dims) * cols, 0.0);

  if (rows < cols) {
    // Gram trick: eigenvectors of X X^T / (n-1) lift to directions X^T u
    std::vector<double> gram(size_t(rows) * rows, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = i; j < rows; ++j) {
        double s = 0;
        for (int c = 0; c < cols; ++c)
          s += centered[size_t(i) * cols + c] * centered[size_t(j) * cols + c];
        gram[size_t(i) * rows + j] = gram[size_t(j) * rows + i] = s / double(rows - 1);
      }
    jacobi_eigen(std::move(gram), rows, values, vectors);
    for (int d = 0; d < dims; ++d) {
      for (int c = 0; c < cols; ++c) {
        double s = 0;
        for (int r = 0; r < rows; ++r)
          s += vectors[size_t(d) * rows + r] * centered[size_t(r) * cols + c];
        directions[size_t(d) * cols + c] = s;
      }
      double norm = 0;
      for (int c = 0; c < cols; ++c) norm += directions[size_t(d) * cols + c] * directions[size_t(d) * cols + c];
      norm = std::sqrt(norm);
      if (norm > 1e-12)
        for (int c = 0; c < cols; ++c) directions[size_t(d) * cols + c] /= norm;
    }
  } else {
    std::vector<double> cov(size_t(cols) * cols, 0.0);
    for (int i = 0; i < cols; ++i)
      for (int j = i; j < cols; ++j) {
        double s = 0;
        for (int r = 0; r < rows; ++r)
          s += centered[size_t(r) * cols + i] * centered[size_t(r) * cols + j];
        cov[size_t(i) * cols + j] = cov[size_t(j) * cols + i] = s / double(rows - 1);
      }
    jacobi_eigen(std::move(cov), cols, values, vectors);
    for (int d = 0; d < dims; ++d)
      for (int c = 0; c < cols; ++c) directions[size_t(d) * cols + c] = vectors[size_t(d) * cols + c];
  }

  // sign convention: the largest-magnitude loading is positive
  for (int d = 0; d < dims; ++d) {
    int arg = 0;
    double best = 0;
    for (int c = 0; c < cols; ++c) {
      const double m = std::abs(directions[size_t(d) * cols + c]);
      if (m > best) {
        best = m;
        arg = c;
      }
    }
    if (directions[size_t(d) * cols + arg] < 0)
      for (int c = 0; c < cols; ++c) directions[size_t(d) * cols + c] = -directions[size_t(d) * cols + c];
  }

  for (int d = 0; d < dims; ++d) {
    out.explained[size_t(d)] = std::max(0.0, values[size_t(d)]) / total_var;
    for (int c = 0; c < cols; ++c) out.components[size_t(d) * cols + c] = directions[size_t(d) * cols + c];
  }
  for (int r = 0; r < rows; ++r)
    for (int d = 0; d < dims; ++d) {
      double s = 0;
      for (int c = 0; c < cols; ++c)
        s += centered[size_t(r) * cols + c] * directions[size_t(d) * cols + c];
      out.coords[size_t(r) * dims + d] = s;
    }
  return out;
}

}  // namespace tripletnet
