#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <initializer_list>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lsem/error.hpp"

namespace lsem {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw Error(ErrorCode::ShapeMismatch, "ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch, what);
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "mat_mul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "matrix addition");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < cv.size(); ++k) cv[k] += bv[k];
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "matrix subtraction");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < cv.size(); ++k) cv[k] -= bv[k];
  return c;
}

/// Largest absolute entry (the entrywise infinity norm).
inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

inline Matrix symmetrized(const Matrix& a) {
  if (!a.is_square()) throw Error(ErrorCode::ShapeMismatch, "symmetrized: matrix not square");
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

inline bool all_finite(const Matrix& a) {
  return std::all_of(a.values().begin(), a.values().end(), [](double v) { return std::isfinite(v); });
}

struct DenseSolution {
  Matrix x;
  /// Smallest |pivot| / row scale encountered during elimination.
  double min_relative_pivot = std::numeric_limits<double>::infinity();
};

inline constexpr double kSingularPivotThreshold = 1e-12;

/// Gaussian elimination with scaled partial pivoting. Each row's scale is its
/// largest absolute entry, or `row_scales[i]` when supplied and larger. A pivot
/// whose magnitude falls below 1e-12 of its row scale raises NearSingularSystem.
inline DenseSolution solve_dense_checked(const Matrix& a, const Matrix& b,
                                         std::span<const double> row_scales = {}) {
  if (!a.is_square()) throw Error(ErrorCode::ShapeMismatch, "solve_dense: matrix not square");
  if (b.rows() != a.rows()) throw Error(ErrorCode::ShapeMismatch, "solve_dense: rhs row count differs");
  if (!row_scales.empty() && row_scales.size() != a.rows())
    throw Error(ErrorCode::ShapeMismatch, "solve_dense: row scale count differs");

  const std::size_t n = a.rows();
  const std::size_t m = b.cols();
  Matrix lu = a;
  Matrix x = b;
  std::vector<double> scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s = std::max(s, std::abs(v));
    if (!row_scales.empty()) s = std::max(s, std::abs(row_scales[i]));
    scale[i] = s;
  }

  DenseSolution out;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = -1.0;
    for (std::size_t i = k; i < n; ++i) {
      const double r = scale[i] > 0.0 ? std::abs(lu(i, k)) / scale[i] : 0.0;
      if (r > best) {
        best = r;
        piv = i;
      }
    }
    if (!(best >= kSingularPivotThreshold))
      throw Error(ErrorCode::NearSingularSystem,
                  "pivot " + std::to_string(k) + " below relative threshold");
    out.min_relative_pivot = std::min(out.min_relative_pivot, best);
    if (piv != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
      std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(piv).begin());
      std::swap(scale[k], scale[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < m; ++j) x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t kk = n; kk-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(kk, j);
      for (std::size_t c = kk + 1; c < n; ++c) s -= lu(kk, c) * x(c, j);
      x(kk, j) = s / lu(kk, kk);
    }
  }
  out.x = std::move(x);
  return out;
}

inline Matrix solve_dense(const Matrix& a, const Matrix& b) { return solve_dense_checked(a, b).x; }

/// Topological order of the off-diagonal support of `a`, treating a(i,j) != 0
/// as an edge i -> j. Empty optional when the support has a cycle.
inline std::optional<std::vector<std::size_t>> support_order(const Matrix& a) {
  const std::size_t n = a.rows();
  std::vector<std::size_t> indeg(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && a(i, j) != 0.0) ++indeg[j];
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<bool> done(n, false);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!done[v] && indeg[v] == 0) {
        next = v;
        break;
      }
    if (next == n) return std::nullopt;
    done[next] = true;
    order.push_back(next);
    for (std::size_t j = 0; j < n; ++j)
      if (j != next && a(next, j) != 0.0) --indeg[j];
  }
  return order;
}

/// Exact inverse of a matrix that is unit upper-triangular after a simultaneous
/// row/column permutation (e.g. I - Lambda for a DAG). Back-substitution in
/// reverse topological order; for a = I - Lambda this equals the finite
/// Neumann series I + Lambda + ... + Lambda^(n-1).
inline Matrix unit_upper_triangular_inverse(const Matrix& a) {
  if (!a.is_square()) throw Error(ErrorCode::NotUnitTriangular, "matrix not square");
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i)
    if (a(i, i) != 1.0) throw Error(ErrorCode::NotUnitTriangular, "diagonal entry is not 1");
  const auto order = support_order(a);
  if (!order) throw Error(ErrorCode::NotUnitTriangular, "off-diagonal support has a cycle");

  Matrix inv(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t pos = n; pos-- > 0;) {
      const std::size_t i = (*order)[pos];
      double s = (i == col) ? 1.0 : 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && a(i, j) != 0.0) s -= a(i, j) * inv(j, col);
      inv(i, col) = s;
    }
  }
  return inv;
}

/// Symmetric within `tol` and a diagonally pivoted Cholesky never meets a
/// pivot below -tol. Once every remaining pivot is within `tol` of zero the
/// trailing block must also be negligible off the diagonal.
inline bool psd_check(const Matrix& a, double tol) {
  if (!a.is_square()) throw Error(ErrorCode::ShapeMismatch, "psd_check: matrix not square");
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) return false;
  if (!all_finite(a)) return false;

  Matrix s = symmetrized(a);
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  while (!remaining.empty()) {
    auto it = std::max_element(remaining.begin(), remaining.end(),
                               [&](std::size_t x, std::size_t y) { return s(x, x) < s(y, y); });
    const std::size_t p = *it;
    const double d = s(p, p);
    if (d < -tol) return false;
    if (d <= tol) {
      for (std::size_t x : remaining)
        for (std::size_t y : remaining)
          if (x != y && s(x, y) * s(x, y) > (s(x, x) + tol) * (s(y, y) + tol) + tol) return false;
      return true;
    }
    remaining.erase(it);
    for (std::size_t x : remaining)
      for (std::size_t y : remaining) s(x, y) -= s(x, p) * s(p, y) / d;
  }
  return true;
}

/// Lower Cholesky factor of a + jitter*I; NonPsdOmega if a pivot is not positive.
inline Matrix cholesky_lower(const Matrix& a, double jitter = 0.0) {
  if (!a.is_square()) throw Error(ErrorCode::ShapeMismatch, "cholesky: matrix not square");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j) + jitter;
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw Error(ErrorCode::NonPsdOmega, "cholesky pivot " + std::to_string(j) + " not positive");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

/// Given rows v_1..v_n (an n x d matrix V), returns lower-triangular L (n x n)
/// with L L^T = V V^T. Row-wise modified Gram-Schmidt with one
/// reorthogonalization pass; rank-deficient rows contribute no new direction.
inline Matrix gram_factor(const Matrix& v) {
  const std::size_t n = v.rows();
  const std::size_t d = v.cols();
  std::vector<std::vector<double>> basis;
  Matrix l(n, n);
  std::vector<double> r(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(v.row(i).begin(), v.row(i).end(), r.begin());
    double norm0 = 0.0;
    for (double x : r) norm0 += x * x;
    norm0 = std::sqrt(norm0);
    std::vector<double> coef(basis.size(), 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < basis.size(); ++k) {
        double dot = 0.0;
        for (std::size_t t = 0; t < d; ++t) dot += r[t] * basis[k][t];
        for (std::size_t t = 0; t < d; ++t) r[t] -= dot * basis[k][t];
        coef[k] += dot;
      }
    }
    for (std::size_t k = 0; k < basis.size(); ++k) l(i, k) = coef[k];
    double rn = 0.0;
    for (double x : r) rn += x * x;
    rn = std::sqrt(rn);
    if (rn > 1e-12 * std::max(norm0, 1.0) && basis.size() < n) {
      l(i, basis.size()) = rn;
      for (double& x : r) x /= rn;
      basis.push_back(r);
    }
  }
  return l;
}

// Matrix CSV: "rows,cols" header then one row per line, 17 significant digits.

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  os << m.rows() << ',' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::ParseError, "not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= line.size(); ++k) {
    if (k == line.size() || line[k] == ',') {
      out.push_back(line.substr(start, k - start));
      start = k + 1;
    }
  }
  return out;
}

inline Matrix read_matrix_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "matrix CSV: missing header");
  auto head = split_csv_line(line);
  if (head.size() != 2) throw Error(ErrorCode::ParseError, "matrix CSV: header must be 'rows,cols'");
  const auto rows = static_cast<std::size_t>(parse_double(head[0]));
  const auto cols = static_cast<std::size_t>(parse_double(head[1]));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "matrix CSV: missing row " + std::to_string(i));
    auto cells = split_csv_line(line);
    if (cells.size() != cols) throw Error(ErrorCode::ParseError, "matrix CSV: row " + std::to_string(i) + " has wrong width");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = parse_double(cells[j]);
  }
  return m;
}

}  // namespace lsem
