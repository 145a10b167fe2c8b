#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace offemma {

// Interleaved 8-bit RGB image, row-major.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height bytes

  size_t pixel_count() const { return (size_t)width * (size_t)height; }
  uint8_t* pixel(int x, int y) { return rgb.data() + 3 * ((size_t)y * width + x); }
  const uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * ((size_t)y * width + x);
  }
  bool operator==(const ImageU8&) const = default;
};

ImageU8 make_image(int width, int height, uint8_t r = 0, uint8_t g = 0,
                   uint8_t b = 0);

// PNG or JPEG, by content.
ImageU8 decode_image(const std::string& bytes);
ImageU8 load_image(const std::filesystem::path& path);

// Lossless PNG; byte-deterministic for a given image.
std::string encode_png(const ImageU8& image);
void save_png(const std::filesystem::path& path, const ImageU8& image);

// Single-channel 8-bit PNG round trip (used for class-id label maps).
std::vector<uint8_t> decode_gray_png(const std::string& bytes, int& width,
                                     int& height);
std::string encode_gray_png(const std::vector<uint8_t>& values, int width,
                            int height);

}  // namespace offemma
