#pragma once

// Stereo frames, XYZ ground truth, per-pixel training samples, the train/test
// split and the synthetic dataset generator.
//
// On-disk layout of a dataset directory (indices contiguous from 0):
//   left_%06d.png   right_%06d.png   (or .ppm)
//   depth_%06d.xyz  width*height*3 float32 little-endian, row-major,
//                   X Y Z per pixel; NaN marks a missing pixel.

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdmlp/errors.hpp"
#include "sdmlp/image.hpp"
#include "sdmlp/numerics.hpp"

namespace sdmlp {

struct StereoFrame {
  std::size_t index = 0;
  Image left;
  Image right;

  std::size_t width() const noexcept { return left.width; }
  std::size_t height() const noexcept { return left.height; }
};

struct DepthMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> xyz;         // 3 per pixel; quiet NaN on invalid pixels
  std::vector<std::uint8_t> valid; // 1 per pixel

  DepthMap() = default;
  DepthMap(std::size_t w, std::size_t h)
      : width(w), height(h), xyz(w * h * 3, std::numeric_limits<double>::quiet_NaN()),
        valid(w * h, 0) {}

  std::size_t pixel_count() const noexcept { return width * height; }
  std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (auto v : valid) n += v ? 1 : 0;
    return n;
  }
  void set(std::size_t pixel, std::array<double, 3> p) noexcept {
    for (std::size_t k = 0; k < 3; ++k) xyz[pixel * 3 + k] = p[k];
    valid[pixel] = 1;
  }
  void invalidate(std::size_t pixel) noexcept {
    for (std::size_t k = 0; k < 3; ++k) xyz[pixel * 3 + k] = std::numeric_limits<double>::quiet_NaN();
    valid[pixel] = 0;
  }
};

struct Sample {
  std::array<double, 6> x{};      // (L0, L1, L2, R0, R1, R2) / 255
  std::array<double, 3> target{}; // (X, Y, Z)
  std::uint32_t row = 0;
  std::uint32_t col = 0;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline StereoFrame load_frame_pair(const std::filesystem::path& left_path,
                                   const std::filesystem::path& right_path,
                                   std::size_t index = 0) {
  StereoFrame f;
  f.index = index;
  f.left = read_image(left_path);
  f.right = read_image(right_path);
  if (f.left.channels != 3 || f.right.channels != 3) {
    throw FormatError("stereo frame " + left_path.string() + ": 3-channel RGB required");
  }
  if (f.left.width != f.right.width || f.left.height != f.right.height) {
    throw FormatError("stereo frame size mismatch: left " + f.left.size_string() + ", right " +
                      f.right.size_string());
  }
  return f;
}

inline constexpr std::uint32_t kCanonicalNanBits = 0x7FC00000u;

inline DepthMap load_depth_map(const std::filesystem::path& path, std::size_t width,
                               std::size_t height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing depth file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::size_t expected = width * height * 3 * 4;
  if (bytes.size() != expected) {
    throw FormatError("depth file " + path.string() + ": expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
  DepthMap d(width, height);
  for (std::size_t p = 0; p < d.pixel_count(); ++p) {
    std::array<double, 3> xyz{};
    bool ok = true;
    for (std::size_t k = 0; k < 3; ++k) {
      const unsigned char* b = &bytes[(p * 3 + k) * 4];
      const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                                 (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
      xyz[k] = static_cast<double>(std::bit_cast<float>(bits));
      ok = ok && !std::isnan(xyz[k]);
    }
    if (ok) d.set(p, xyz);
  }
  return d;
}

// Inverse of load_depth_map. Valid values are narrowed to float32; invalid
// pixels are written as three canonical quiet NaNs.
inline void save_depth_map(const DepthMap& depth, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(depth.pixel_count() * 3 * 4);
  for (std::size_t p = 0; p < depth.pixel_count(); ++p) {
    for (std::size_t k = 0; k < 3; ++k) {
      const std::uint32_t bits =
          depth.valid[p] ? std::bit_cast<std::uint32_t>(static_cast<float>(depth.xyz[p * 3 + k]))
                         : kCanonicalNanBits;
      unsigned char* b = &bytes[(p * 3 + k) * 4];
      for (int s = 0; s < 4; ++s) b[s] = static_cast<unsigned char>(bits >> (8 * s));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::array<double, 6> intensity_vector(const StereoFrame& frame, std::size_t row,
                                              std::size_t col) {
  std::array<double, 6> x{};
  for (std::size_t c = 0; c < 3; ++c) {
    x[c] = frame.left.at(row, col, c) / 255.0;
    x[c + 3] = frame.right.at(row, col, c) / 255.0;
  }
  return x;
}

// One sample per valid pixel, in reading order.
inline std::vector<Sample> extract_samples(const StereoFrame& frame, const DepthMap& depth) {
  if (frame.width() != depth.width || frame.height() != depth.height) {
    throw InvalidArgument("extract_samples: frame " + frame.left.size_string() + " vs depth " +
                          std::to_string(depth.width) + "x" + std::to_string(depth.height));
  }
  std::vector<Sample> out;
  out.reserve(depth.valid_count());
  for (std::size_t r = 0; r < depth.height; ++r) {
    for (std::size_t c = 0; c < depth.width; ++c) {
      const std::size_t p = r * depth.width + c;
      if (!depth.valid[p]) continue;
      Sample s;
      s.x = intensity_vector(frame, r, c);
      for (std::size_t k = 0; k < 3; ++k) s.target[k] = depth.xyz[p * 3 + k];
      s.row = static_cast<std::uint32_t>(r);
      s.col = static_cast<std::uint32_t>(c);
      out.push_back(s);
    }
  }
  return out;
}

// First n_train indices train, the rest test.
inline DatasetSplit split_frames(std::size_t n_frames, std::size_t n_train) {
  if (n_train == 0 || n_train >= n_frames) {
    throw InvalidArgument("split_frames: need 0 < n_train < n_frames, got n_train=" +
                          std::to_string(n_train) + ", n_frames=" + std::to_string(n_frames));
  }
  DatasetSplit s;
  for (std::size_t i = 0; i < n_frames; ++i) (i < n_train ? s.train : s.test).push_back(i);
  return s;
}

// Explicit training indices; every other frame is a test frame.
inline DatasetSplit split_frames(std::size_t n_frames, std::span<const std::size_t> train) {
  std::vector<std::uint8_t> is_train(n_frames, 0);
  for (std::size_t i : train) {
    if (i >= n_frames) {
      throw InvalidArgument("split_frames: training index " + std::to_string(i) +
                            " beyond " + std::to_string(n_frames) + " frames");
    }
    is_train[i] = 1;
  }
  DatasetSplit s;
  for (std::size_t i = 0; i < n_frames; ++i) (is_train[i] ? s.train : s.test).push_back(i);
  if (s.train.empty() || s.test.empty()) {
    throw InvalidArgument("split_frames: both train and test must be nonempty");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dataset directory helpers

inline std::filesystem::path dataset_file(const std::filesystem::path& dir, const char* stem,
                                          std::size_t index, const char* ext) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_%06zu%s", stem, index, ext);
  return dir / name;
}

// Image extension used by frame `index`, preferring PNG.
inline std::optional<std::string> frame_extension(const std::filesystem::path& dir,
                                                  std::size_t index) {
  for (const char* ext : {".png", ".ppm"}) {
    if (std::filesystem::exists(dataset_file(dir, "left", index, ext))) return std::string(ext);
  }
  return std::nullopt;
}

// Number of contiguous frames 0, 1, 2, ... present in `dir`.
inline std::size_t count_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::size_t n = 0;
  while (frame_extension(dir, n)) ++n;
  return n;
}

inline StereoFrame load_dataset_frame(const std::filesystem::path& dir, std::size_t index) {
  const auto ext = frame_extension(dir, index);
  if (!ext) {
    throw IoError("frame " + std::to_string(index) + " not found in " + dir.string());
  }
  return load_frame_pair(dataset_file(dir, "left", index, ext->c_str()),
                         dataset_file(dir, "right", index, ext->c_str()), index);
}

inline DepthMap load_dataset_depth(const std::filesystem::path& dir, std::size_t index,
                                   std::size_t width, std::size_t height) {
  return load_depth_map(dataset_file(dir, "depth", index, ".xyz"), width, height);
}

// ---------------------------------------------------------------------------
// Synthetic data

enum class SynthGenerator { linear, radial };

// Fixed affine map used by the synthetic generators: target = A x + c.
inline constexpr std::array<std::array<double, 6>, 3> kSynthA = {{
    {1.0, -0.5, 0.25, -0.75, 0.5, 0.1},
    {-0.3, 1.2, -0.2, 0.4, -0.9, 0.2},
    {0.6, 0.3, 1.5, -0.4, 0.2, -0.8},
}};
inline constexpr std::array<double, 3> kSynthC = {0.5, -0.25, 2.0};
// The radial generator adds kSynthRadial * ||x - 0.5||^2 to Z.
inline constexpr double kSynthRadial = 2.0;

inline std::array<double, 3> synth_target(const std::array<double, 6>& x, SynthGenerator gen) {
  std::array<double, 3> t{};
  for (std::size_t r = 0; r < 3; ++r) {
    double v = kSynthC[r];
    for (std::size_t k = 0; k < 6; ++k) v += kSynthA[r][k] * x[k];
    t[r] = v;
  }
  if (gen == SynthGenerator::radial) {
    double d2 = 0.0;
    for (double xi : x) d2 += (xi - 0.5) * (xi - 0.5);
    t[2] += kSynthRadial * d2;
  }
  return t;
}

struct SynthOptions {
  std::size_t n_frames = 1;
  std::size_t width = 64;
  std::size_t height = 64;
  SynthGenerator generator = SynthGenerator::linear;
  double invalid_fraction = 0.0;
};

struct SynthFrame {
  StereoFrame frame;
  DepthMap depth;
};

// Random RGB stereo pairs with ground truth given by synth_target of each
// pixel's intensity vector, narrowed to float32 as it would be on disk.
// Frame k draws only from rng.derive(k). When invalid_fraction > 0, exactly
// round(fraction * pixels) pixels per frame are marked missing.
inline std::vector<SynthFrame> synth_dataset(const SeededRng& rng, const SynthOptions& opt) {
  if (opt.width == 0 || opt.height == 0 || opt.n_frames == 0) {
    throw InvalidArgument("synth_dataset: dimensions and frame count must be >= 1");
  }
  if (!(opt.invalid_fraction >= 0.0 && opt.invalid_fraction <= 1.0)) {
    throw InvalidArgument("synth_dataset: invalid_fraction must be in [0, 1]");
  }
  std::vector<SynthFrame> out;
  out.reserve(opt.n_frames);
  const std::size_t n_pix = opt.width * opt.height;
  for (std::size_t k = 0; k < opt.n_frames; ++k) {
    SeededRng frame_rng = rng.derive(k);
    SynthFrame sf;
    sf.frame.index = k;
    for (Image* img : {&sf.frame.left, &sf.frame.right}) {
      img->width = opt.width;
      img->height = opt.height;
      img->channels = 3;
      img->pixels.resize(n_pix * 3);
    }
    for (auto& v : sf.frame.left.pixels) v = static_cast<std::uint8_t>(frame_rng.below(256));
    for (auto& v : sf.frame.right.pixels) v = static_cast<std::uint8_t>(frame_rng.below(256));

    sf.depth = DepthMap(opt.width, opt.height);
    for (std::size_t r = 0; r < opt.height; ++r) {
      for (std::size_t c = 0; c < opt.width; ++c) {
        auto t = synth_target(intensity_vector(sf.frame, r, c), opt.generator);
        for (double& v : t) v = static_cast<float>(v);
        sf.depth.set(r * opt.width + c, t);
      }
    }
    const auto n_invalid =
        static_cast<std::size_t>(std::llround(opt.invalid_fraction * static_cast<double>(n_pix)));
    if (n_invalid > 0) {
      std::vector<std::size_t> order(n_pix);
      for (std::size_t p = 0; p < n_pix; ++p) order[p] = p;
      frame_rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t i = 0; i < n_invalid; ++i) sf.depth.invalidate(order[i]);
    }
    out.push_back(std::move(sf));
  }
  return out;
}

// Writes left/right images (extension ".png" or ".ppm") and depth files.
inline void write_dataset(const std::filesystem::path& dir, std::span<const SynthFrame> frames,
                          const std::string& image_ext = ".png") {
  std::filesystem::create_directories(dir);
  for (const auto& f : frames) {
    write_image(f.frame.left, dataset_file(dir, "left", f.frame.index, image_ext.c_str()));
    write_image(f.frame.right, dataset_file(dir, "right", f.frame.index, image_ext.c_str()));
    save_depth_map(f.depth, dataset_file(dir, "depth", f.frame.index, ".xyz"));
  }
}

} // namespace sdmlp
