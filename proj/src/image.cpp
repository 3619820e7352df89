// SPDX-License-Identifier: Apache-2.0
#include "augloop/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <png.h>

#include "augloop/error.hpp"

namespace augloop {

ImageBuffer::ImageBuffer(int height, int width, int channels, float fill)
    : ImageBuffer(height, width, channels,
                  std::vector<float>(static_cast<std::size_t>(std::max(height, 0)) *
                                         static_cast<std::size_t>(std::max(width, 0)) *
                                         static_cast<std::size_t>(std::max(channels, 0)),
                                     fill)) {}

ImageBuffer::ImageBuffer(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 1 || width < 1) throw ValidationError("BAD_IMAGE", "image dimensions must be at least 1x1");
  if (channels != 1 && channels != 3) throw ValidationError("BAD_IMAGE", "images must have 1 or 3 channels");
  if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                          static_cast<std::size_t>(channels)) {
    throw ValidationError("BAD_IMAGE", "pixel buffer size does not match H*W*C");
  }
}

void ImageBuffer::clamp() {
  for (auto& v : data_) {
    if (!(v >= 0.0f)) {
      v = 0.0f;
    } else if (v > 1.0f) {
      v = 1.0f;
    }
  }
}

float luminance(const ImageBuffer& img, int y, int x) {
  if (img.channels() == 1) return img.at(y, x, 0);
  return 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
}

ImageBuffer to_grayscale(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer out(img.height(), img.width(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.at(y, x, 0) = luminance(img, y, x);
  }
  out.clamp();
  return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int height, int width) {
  if (img.height() == height && img.width() == width) return img;
  ImageBuffer out(height, width, img.channels());
  const double sy = static_cast<double>(img.height()) / height;
  const double sx = static_cast<double>(img.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
        const double bottom = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
  out.clamp();
  return out;
}

std::uint8_t to_u8(float v) {
  const double q = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

namespace {

constexpr std::uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

ImageBuffer from_u8(int h, int w, int c, const std::uint8_t* px) {
  std::vector<float> data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(px[i]) / 255.0f;
  return ImageBuffer(h, w, c, std::move(data));
}

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
  // Inspect IHDR directly: the simplified libpng API silently converts
  // palette/16-bit/alpha inputs, and those are rejected here instead.
  if (bytes.size() < 33) throw ValidationError("TRUNCATED_IMAGE", "PNG stream ends inside the header");
  if (std::string_view(reinterpret_cast<const char*>(bytes.data() + 12), 4) != "IHDR") {
    throw ValidationError("UNSUPPORTED_IMAGE", "PNG does not start with an IHDR chunk");
  }
  const int bit_depth = bytes[24];
  const int color_type = bytes[25];
  if (bit_depth != 8) {
    throw ValidationError("UNSUPPORTED_IMAGE", fmt::format("unsupported PNG bit depth {} (need 8)", bit_depth));
  }
  if (color_type != 0 && color_type != 2) {
    throw ValidationError("UNSUPPORTED_IMAGE",
                          fmt::format("unsupported PNG color type {} (need grayscale or RGB)", color_type));
  }
  const int channels = color_type == 0 ? 1 : 3;

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ValidationError("TRUNCATED_IMAGE", "PNG header unreadable: " + msg);
  }
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ValidationError("TRUNCATED_IMAGE", "PNG data unreadable: " + msg);
  }
  return from_u8(static_cast<int>(image.height), static_cast<int>(image.width), channels, px.data());
}

// Reads one whitespace/comment separated header token of a PNM file.
std::string pnm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') tok += static_cast<char>(bytes[pos++]);
  if (tok.empty()) throw ValidationError("TRUNCATED_IMAGE", "PNM header ends early");
  return tok;
}

int pnm_int(const std::string& tok) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); }) ||
      tok.size() > 9) {
    throw ValidationError("UNSUPPORTED_IMAGE", "bad PNM header field '" + tok + "'");
  }
  return std::stoi(tok);
}

ImageBuffer decode_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  const int channels = bytes[1] == '5' ? 1 : 3;
  const int width = pnm_int(pnm_token(bytes, pos));
  const int height = pnm_int(pnm_token(bytes, pos));
  const int maxval = pnm_int(pnm_token(bytes, pos));
  if (width < 1 || height < 1) throw ValidationError("UNSUPPORTED_IMAGE", "PNM has zero size");
  if (maxval != 255) {
    throw ValidationError("UNSUPPORTED_IMAGE", fmt::format("unsupported PNM maxval {} (need 8-bit, 255)", maxval));
  }
  if (pos >= bytes.size()) throw ValidationError("TRUNCATED_IMAGE", "PNM stream ends before pixel data");
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                           static_cast<std::size_t>(channels);
  if (bytes.size() - pos < need) {
    throw ValidationError("TRUNCATED_IMAGE",
                          fmt::format("PNM pixel data truncated: {} of {} bytes", bytes.size() - pos, need));
  }
  return from_u8(height, width, channels, bytes.data() + pos);
}

}  // namespace

ImageBuffer decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return decode_pnm(bytes);
  if (bytes.size() < 2) throw ValidationError("TRUNCATED_IMAGE", "image stream is empty");
  throw ValidationError("UNSUPPORTED_IMAGE", "not a PNG, PGM (P5) or PPM (P6) stream");
}

std::vector<std::uint8_t> encode_image(const ImageBuffer& img, ImageFormat format) {
  std::vector<std::uint8_t> px(img.size());
  auto src = img.data();
  std::transform(src.begin(), src.end(), px.begin(), to_u8);

  if (format == ImageFormat::pnm) {
    const std::string header =
        fmt::format("P{}\n{} {}\n255\n", img.channels() == 1 ? 5 : 6, img.width(), img.height());
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), px.begin(), px.end());
    return out;
  }

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, px.data(), 0, nullptr)) {
    throw RuntimeError("PNG_ENCODE", std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr)) {
    throw RuntimeError("PNG_ENCODE", std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

ImageBuffer read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("IO_ERROR", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(e.code(), path.string() + ": " + e.what());
  }
}

void write_image(const std::filesystem::path& path, const ImageBuffer& img) {
  const auto ext = path.extension().string();
  const auto format = (ext == ".png") ? ImageFormat::png : ImageFormat::pnm;
  const auto bytes = encode_image(img, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("IO_ERROR", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace augloop
