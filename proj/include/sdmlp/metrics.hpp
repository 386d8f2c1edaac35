#pragma once

// Training loss and per-image evaluation metrics over 3 x N coordinate batches.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sdmlp/errors.hpp"
#include "sdmlp/numerics.hpp"

namespace sdmlp {

// rmse is whichever of the two per-image metrics the evaluation reports.
struct EvalRecord {
  std::size_t frame_index = 0;
  double rmse = 0.0;
  std::size_t n_pixels = 0;
  double rmse_mean_distance = 0.0; // mean per-pixel Euclidean distance
  double rmse_conventional = 0.0;  // sqrt of the mean squared distance
};

struct MseResult {
  double value;
  Matrix grad; // d value / d pred
};

namespace detail {
inline void check_pair(const Matrix& pred, const Matrix& gt, const char* who) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw InvalidArgument(std::string(who) + ": shape mismatch " + pred.shape() + " vs " +
                          gt.shape());
  }
}
} // namespace detail

// sum over samples of the squared coordinate error, divided by the sample count N.
inline MseResult mse(const Matrix& pred, const Matrix& gt) {
  detail::check_pair(pred, gt, "mse");
  const std::size_t n = pred.cols();
  Matrix grad(pred.rows(), n);
  double total = 0.0;
  const double scale = 2.0 / static_cast<double>(n);
  auto p = pred.values();
  auto g = gt.values();
  auto d = grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - g[i];
    total += e * e;
    d[i] = scale * e;
  }
  return {total / static_cast<double>(n), std::move(grad)};
}

// Per-image error: the mean over pixels of the Euclidean distance between the
// predicted and ground-truth points.
inline double rmse_per_image(const Matrix& pred, const Matrix& gt) {
  detail::check_pair(pred, gt, "rmse_per_image");
  const std::size_t n = pred.cols();
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double sq = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
      const double e = pred(r, j) - gt(r, j);
      sq += e * e;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(n);
}

// Root of the mean squared Euclidean distance, i.e. sqrt(mse).
inline double rmse_conventional(const Matrix& pred, const Matrix& gt) {
  detail::check_pair(pred, gt, "rmse_conventional");
  return std::sqrt(mse(pred, gt).value);
}

struct Histogram {
  std::vector<double> edges;        // counts.size() + 1 entries
  std::vector<std::size_t> counts;
};

// Equal-width bins over [min, max]; the last bin is closed on the right.
// When every value is equal there is a single bin [v, v + 1].
inline Histogram histogram(std::span<const double> values, std::size_t n_bins) {
  if (values.empty()) throw InvalidArgument("histogram: no values");
  if (n_bins == 0) throw InvalidArgument("histogram: need at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Histogram h;
  if (lo == hi) {
    h.edges = {lo, lo + 1.0};
    h.counts = {values.size()};
    return h;
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  h.edges.resize(n_bins + 1);
  for (std::size_t k = 0; k <= n_bins; ++k) h.edges[k] = lo + width * static_cast<double>(k);
  h.edges.back() = hi;
  h.counts.assign(n_bins, 0);
  for (double v : values) {
    auto k = static_cast<std::size_t>((v - lo) / width);
    if (k >= n_bins) k = n_bins - 1;
    ++h.counts[k];
  }
  return h;
}

} // namespace sdmlp
