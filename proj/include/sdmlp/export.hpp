#pragma once

// Writers for the run artifacts: PLY point clouds, loss and evaluation CSVs,
// and an 8-bit preview of the predicted Z channel. Output is byte-identical
// for identical inputs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "sdmlp/data.hpp"
#include "sdmlp/errors.hpp"
#include "sdmlp/image.hpp"
#include "sdmlp/metrics.hpp"
#include "sdmlp/pipeline.hpp"

namespace sdmlp {

// Shortest-form %g-style rendering with `digits` significant digits,
// independent of the C locale.
inline std::string format_number(double v, int digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

namespace detail {
inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}
inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}
} // namespace detail

// ASCII PLY 1.0 with float x y z and, when the cloud is colored, uchar
// red green blue. Coordinates use 6 significant digits.
inline void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  const bool colored = !cloud.colors.empty();
  if (colored && cloud.colors.size() != cloud.points.size()) {
    throw InvalidArgument("write_ply: color count does not match point count");
  }
  auto out = detail::open_output(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size() << '\n'
      << "property float x\nproperty float y\nproperty float z\n";
  if (colored) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    out << format_number(p[0], 6) << ' ' << format_number(p[1], 6) << ' '
        << format_number(p[2], 6);
    if (colored) {
      const auto& c = cloud.colors[i];
      out << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]);
    }
    out << '\n';
  }
  detail::finish(out, path);
}

// "epoch,mse,l2,wall_ms", epochs numbered from 1. With include_wall_time
// false the wall_ms column is written as 0 so the file depends only on the run inputs.
inline void write_csv_losses(const TrainReport& report, const std::filesystem::path& path,
                             bool include_wall_time = true) {
  auto out = detail::open_output(path);
  out << "epoch,mse,l2,wall_ms\n";
  for (std::size_t e = 0; e < report.epoch_mse.size(); ++e) {
    const double wall = include_wall_time && e < report.wall_ms.size() ? report.wall_ms[e] : 0.0;
    out << (e + 1) << ',' << format_number(report.epoch_mse[e], 17) << ','
        << format_number(e < report.epoch_l2.size() ? report.epoch_l2[e] : 0.0, 17) << ','
        << format_number(std::round(wall * 1000.0) / 1000.0, 17) << '\n';
  }
  detail::finish(out, path);
}

// Per-frame records as "frame,rmse,n_pixels" (ascending frame) followed by
// "mean,<value>,", and the histogram as "bin_lo,bin_hi,count".
inline void write_csv_eval(std::span<const EvalRecord> records, const Histogram& hist,
                           const std::filesystem::path& path_records,
                           const std::filesystem::path& path_hist) {
  if (records.empty()) throw InvalidArgument("write_csv_eval: no records");
  std::vector<EvalRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), [](const EvalRecord& a, const EvalRecord& b) {
    return a.frame_index < b.frame_index;
  });
  double sum = 0.0;
  {
    auto out = detail::open_output(path_records);
    out << "frame,rmse,n_pixels\n";
    for (const auto& r : sorted) {
      out << r.frame_index << ',' << format_number(r.rmse, 17) << ',' << r.n_pixels << '\n';
      sum += r.rmse;
    }
    out << "mean," << format_number(sum / static_cast<double>(sorted.size()), 17) << ",\n";
    detail::finish(out, path_records);
  }
  auto out = detail::open_output(path_hist);
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t k = 0; k < hist.counts.size(); ++k) {
    out << format_number(hist.edges[k], 17) << ',' << format_number(hist.edges[k + 1], 17) << ','
        << hist.counts[k] << '\n';
  }
  detail::finish(out, path_hist);
}

// Z channel rescaled to 0..255 over the valid pixels, invalid pixels black.
// A constant Z maps to 128.
inline Image depth_preview(const DepthMap& prediction) {
  if (prediction.pixel_count() == 0) throw InvalidArgument("depth_preview: empty depth map");
  double lo = INFINITY;
  double hi = -INFINITY;
  for (std::size_t p = 0; p < prediction.pixel_count(); ++p) {
    if (!prediction.valid[p]) continue;
    lo = std::min(lo, prediction.xyz[p * 3 + 2]);
    hi = std::max(hi, prediction.xyz[p * 3 + 2]);
  }
  if (lo > hi) throw InvalidArgument("depth_preview: no valid pixels");
  Image img;
  img.width = prediction.width;
  img.height = prediction.height;
  img.channels = 1;
  img.pixels.assign(prediction.pixel_count(), 0);
  for (std::size_t p = 0; p < prediction.pixel_count(); ++p) {
    if (!prediction.valid[p]) continue;
    if (hi == lo) {
      img.pixels[p] = 128;
    } else {
      const double t = (prediction.xyz[p * 3 + 2] - lo) / (hi - lo);
      img.pixels[p] = static_cast<std::uint8_t>(std::lround(255.0 * t));
    }
  }
  return img;
}

inline void write_depth_png(const DepthMap& prediction, const std::filesystem::path& path) {
  write_image(depth_preview(prediction), path);
}

} // namespace sdmlp
