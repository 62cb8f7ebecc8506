#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "auverify/tensor.hpp"

namespace auverify {

/// 8-bit interleaved image with 1 (gray) or 3 (RGB) channels.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t* at(std::size_t x, std::size_t y) { return &pixels[(y * width + x) * channels]; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const {
    return &pixels[(y * width + x) * channels];
  }
  friend bool operator==(const Image8&, const Image8&) = default;
};

inline Image8 read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 out(image.width, image.height, color ? 3 : 1);
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image8& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

/// Converts to a CxHxW tensor in [0,1] (value / 255). RGB is reduced to gray
/// by 0.299 R + 0.587 G + 0.114 B; gray is replicated for RGB models.
inline Tensor image_to_tensor(const Image8& img, std::size_t channels) {
  if (channels != 1 && channels != 3) {
    throw ConfigError("models must take 1 or 3 input channels, got " + std::to_string(channels));
  }
  Tensor out({channels, img.height, img.width});
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::uint8_t* px = img.at(x, y);
      if (channels == img.channels) {
        for (std::size_t c = 0; c < channels; ++c) {
          out.at(c, y, x) = static_cast<float>(px[c]) / 255.0f;
        }
      } else if (channels == 3) {
        for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = static_cast<float>(px[0]) / 255.0f;
      } else {
        const double lum = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        out.at(0, y, x) = static_cast<float>(lum / 255.0);
      }
    }
  }
  return out;
}

}  // namespace auverify
