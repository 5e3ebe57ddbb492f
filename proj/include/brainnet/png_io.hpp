#pragma once

// 8-bit PNG export of RGB slices and label masks (libpng simplified API).
// Label masks are stored as grayscale with the raw label value per pixel,
// so they round-trip exactly.

#include <png.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"
#include "brainnet/preprocess.hpp"

namespace brainnet::png {

struct Pixels {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 = gray, 3 = RGB
  std::vector<std::uint8_t> data;
};

inline void write(const std::filesystem::path& path, const Pixels& px) {
  if (px.channels != 1 && px.channels != 3) fail(ErrorCode::InvalidArgument, "PNG needs 1 or 3 channels");
  if (px.data.size() != px.width * px.height * px.channels) fail(ErrorCode::ShapeMismatch, "pixel buffer size");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(px.width);
  img.height = static_cast<png_uint_32>(px.height);
  img.format = px.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, px.data.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::IoError, "cannot write " + path.string() + ": " + msg);
  }
}

inline Pixels read(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    fail(ErrorCode::IoError, "cannot read " + path.string() + ": " + img.message);
  Pixels px;
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  px.width = img.width;
  px.height = img.height;
  px.channels = gray ? 1 : 3;
  px.data.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, px.data.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::IoError, "cannot decode " + path.string() + ": " + msg);
  }
  return px;
}

inline Pixels from_rgb(const RgbSlice& s) {
  Pixels px{s.width, s.height, 3, std::vector<std::uint8_t>(s.width * s.height * 3)};
  for (std::size_t i = 0; i < s.width * s.height; ++i)
    for (std::size_t c = 0; c < 3; ++c) px.data[3 * i + c] = quantize_unit(s.channels[c][i]);
  return px;
}

inline RgbSlice to_rgb(const Pixels& px) {
  if (px.channels != 3) fail(ErrorCode::ShapeMismatch, "expected an RGB image");
  RgbSlice s;
  s.width = px.width;
  s.height = px.height;
  for (auto& ch : s.channels) ch.resize(px.width * px.height);
  for (std::size_t i = 0; i < px.width * px.height; ++i)
    for (std::size_t c = 0; c < 3; ++c) s.channels[c][i] = dequantize_unit(px.data[3 * i + c]);
  return s;
}

inline Pixels from_mask(const Image2D<std::uint8_t>& m) { return {m.width, m.height, 1, m.data}; }

inline Image2D<std::uint8_t> to_mask(const Pixels& px) {
  if (px.channels != 1) fail(ErrorCode::ShapeMismatch, "expected a grayscale mask");
  Image2D<std::uint8_t> m(px.width, px.height);
  m.data = px.data;
  return m;
}

inline void write_rgb(const std::filesystem::path& path, const RgbSlice& s) { write(path, from_rgb(s)); }
inline void write_mask(const std::filesystem::path& path, const Image2D<std::uint8_t>& m) { write(path, from_mask(m)); }
inline Image2D<std::uint8_t> read_mask(const std::filesystem::path& path) { return to_mask(read(path)); }

}  // namespace brainnet::png
