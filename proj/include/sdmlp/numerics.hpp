#pragma once

// Dense row-major containers, the handful of products the network needs, and
// the project-wide seeded random generator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdmlp/errors.hpp"

namespace sdmlp {

class Vector {
public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
  Vector(std::initializer_list<double> values) : data_(values) {}

  std::size_t size() const noexcept { return data_.size(); }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const Vector&, const Vector&) = default;

private:
  std::vector<double> data_;
};

// rows x cols, row-major. A batch of samples is stored one sample per column.
class Matrix {
public:
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols) {
    check_dims(rows, cols);
    data_.assign(rows * cols, fill);
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    check_dims(rows, cols);
    if (data_.size() != rows * cols) {
      throw InvalidArgument("Matrix: " + std::to_string(data_.size()) +
                            " values for shape " + shape_string(rows, cols));
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw InvalidArgument("Matrix::from_rows: ragged rows");
      values.insert(values.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(values));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::string shape() const { return shape_string(rows_, cols_); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

  static std::string shape_string(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
  }

private:
  static void check_dims(std::size_t r, std::size_t c) {
    if (r == 0 || c == 0) {
      throw InvalidArgument("Matrix: empty shape " + shape_string(r, c));
    }
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

// a * b. The inner loop runs along contiguous rows of b and the output.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: shape mismatch " + a.shape() + " x " + b.shape());
  }
  const std::size_t n = b.cols();
  Matrix out(a.rows(), n);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* __restrict dst = out.row(i).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double s = a(i, p);
      if (s == 0.0) continue;
      const double* __restrict src = b.row(p).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

// transpose(a) * b without materializing the transpose.
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw InvalidArgument("matmul_at: shape mismatch " + a.shape() + "^T x " + b.shape());
  }
  const std::size_t n = b.cols();
  Matrix out(a.cols(), n);
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* __restrict src = b.row(p).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(p, i);
      if (s == 0.0) continue;
      double* __restrict dst = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

// a * transpose(b).
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw InvalidArgument("matmul_bt: shape mismatch " + a.shape() + " x " + b.shape() + "^T");
  }
  return matmul(a, transpose(b));
}

// Adds b to every column of m.
inline Matrix add_bias(Matrix m, const Vector& b) {
  if (b.size() != m.rows()) {
    throw InvalidArgument("add_bias: bias of length " + std::to_string(b.size()) +
                          " for matrix " + m.shape());
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double v = b[r];
    for (double& x : m.row(r)) x += v;
  }
  return m;
}

// Sum of each row, i.e. the reduction over the batch axis.
inline Vector row_sums(const Matrix& m) {
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double x : m.row(r)) s += x;
    out[r] = s;
  }
  return out;
}

// Pseudo-random generator used for every stochastic decision in the project.
// 
// The algorithm is xoshiro256** (Blackman & Vigna), with its 256-bit state
// expanded from the 64-bit seed by SplitMix64. Both are fully specified
// integer recurrences, so streams are identical on every platform and
// compiler. Doubles are built from the top 53 bits of a draw.
// 
// Child generators are obtained with derive(stream): the child seed is
// splitmix64(seed ^ splitmix64(stream)), which depends only on the parent
// seed and the stream id, never on how many values the parent has produced.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64_next(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi); requires lo < hi.
  double uniform(double lo, double hi) noexcept {
    double v = lo + (hi - lo) * uniform01();
    if (v >= hi) v = std::nextafter(hi, lo);
    return v;
  }

  // Unbiased integer in [0, n), n >= 1 (Lemire's multiply-and-reject).
  std::uint64_t below(std::uint64_t n) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  SeededRng derive(std::uint64_t stream) const noexcept {
    std::uint64_t s = stream;
    std::uint64_t mixed = seed_ ^ splitmix64_next(s);
    return SeededRng(splitmix64_next(mixed));
  }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  static std::uint64_t splitmix64_next(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t state_[4];
};

inline Vector uniform_sample(SeededRng& rng, double lo, double hi, std::size_t n) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument("uniform_sample: need finite lo < hi, got [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + ")");
  }
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.uniform(lo, hi);
  return out;
}

} // namespace sdmlp
