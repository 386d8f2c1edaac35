#pragma once

// 8-bit raster images and their PNG / binary PPM (P6) codecs. PNG goes through
// libpng's simplified API.

#include <png.h>

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sdmlp/errors.hpp"

namespace sdmlp {

// Interleaved 8-bit pixels, row-major from the top-left corner.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t ch) const noexcept {
    return pixels[(row * width + col) * channels + ch];
  }
  std::string size_string() const {
    return std::to_string(width) + "x" + std::to_string(height);
  }
};

namespace detail {

inline std::string extension_of(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

inline Image read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  Image out;
  out.width = img.width;
  out.height = img.height;
  out.channels = (img.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  img.format = out.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

inline void write_png(const Image& image, const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

inline std::string next_ppm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

inline Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = next_ppm_token(in);
  if (magic != "P6" && magic != "P5") {
    throw FormatError(path.string() + ": not a binary PPM/PGM (magic '" + magic + "')");
  }
  Image out;
  try {
    out.width = std::stoul(next_ppm_token(in));
    out.height = std::stoul(next_ppm_token(in));
    if (std::stoul(next_ppm_token(in)) != 255) {
      throw FormatError(path.string() + ": only maxval 255 is supported");
    }
  } catch (const std::logic_error&) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  out.channels = magic == "P6" ? 3 : 1;
  out.pixels.resize(out.width * out.height * out.channels);
  in.read(reinterpret_cast<char*>(out.pixels.data()),
          static_cast<std::streamsize>(out.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != out.pixels.size()) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  return out;
}

inline void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << (image.channels == 3 ? "P6" : "P5") << '\n'
      << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

} // namespace detail

// Decodes by extension: .png, or .ppm / .pgm (binary).
inline Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("missing file " + path.string());
  const std::string ext = detail::extension_of(path);
  if (ext == ".png") return detail::read_png(path);
  if (ext == ".ppm" || ext == ".pgm") return detail::read_ppm(path);
  throw FormatError("unsupported image extension: " + path.string());
}

inline void write_image(const Image& image, const std::filesystem::path& path) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidArgument("write_image: 1 or 3 channels required");
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw InvalidArgument("write_image: pixel buffer does not match dimensions");
  }
  const std::string ext = detail::extension_of(path);
  if (ext == ".png") return detail::write_png(image, path);
  if (ext == ".ppm" || ext == ".pgm") return detail::write_ppm(image, path);
  throw InvalidArgument("unsupported image extension: " + path.string());
}

} // namespace sdmlp
