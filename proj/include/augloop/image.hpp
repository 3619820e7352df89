// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace augloop {

/// Row-major H x W x C float image with values in [0, 1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int height, int width, int channels, float fill = 0.0f);
  ImageBuffer(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  /// Clamp every value into [0, 1]; NaN becomes 0.
  void clamp();
  bool same_shape(const ImageBuffer& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// BT.601 luminance of pixel (y, x); the value itself on 1-channel images.
float luminance(const ImageBuffer& img, int y, int x);

/// Single-channel BT.601 conversion.
ImageBuffer to_grayscale(const ImageBuffer& img);

/// Bilinear resample to (height, width) with edge clamping.
ImageBuffer resize_bilinear(const ImageBuffer& img, int height, int width);

enum class ImageFormat { png, pnm };

/// Decodes 8-bit grayscale/RGB PNG or binary PGM (P5) / PPM (P6).
/// Throws ValidationError("UNSUPPORTED_IMAGE" | "TRUNCATED_IMAGE").
ImageBuffer decode_image(std::span<const std::uint8_t> bytes);

/// 8-bit encoding; values round half-up to the nearest level. PNM picks
/// P5 or P6 from the channel count.
std::vector<std::uint8_t> encode_image(const ImageBuffer& img, ImageFormat format);

/// Quantize a [0,1] value to 0..255 with round-half-up.
std::uint8_t to_u8(float v);

ImageBuffer read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageBuffer& img);

}  // namespace augloop
