// SPDX-License-Identifier: Apache-2.0
#include "augloop/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "augloop/error.hpp"

namespace augloop {

std::uint64_t KernelCounters::total_invoked() const {
  std::uint64_t total = 0;
  for (const auto& c : invoked) total += c.load();
  return total;
}

void KernelCounters::reset() {
  for (auto& c : invoked) c.store(0);
  skipped.store(0);
  warnings.store(0);
}

float sample_bilinear(const ImageBuffer& img, double y, double x, int c) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const int y0 = static_cast<int>(y);
  const int x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const double wy = y - y0;
  const double wx = x - x0;
  const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
  const double bottom = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
  return static_cast<float>(top * (1.0 - wy) + bottom * wy);
}

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Inverse-maps every output pixel through `src_of(y, x) -> (sy, sx)`.
template <typename Map>
ImageBuffer remap(const ImageBuffer& img, Map src_of) {
  ImageBuffer out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto [sy, sx] = src_of(y, x);
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = sample_bilinear(img, sy, sx, c);
    }
  }
  return out;
}

// Photometric factor ~ U[max(0, 1-s), 1+s].
double draw_factor(SampleRng& rng, double strength) { return rng.uniform(std::max(0.0, 1.0 - strength), 1.0 + strength); }

ImageBuffer flip(const ImageBuffer& img, bool horizontal) {
  ImageBuffer out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int sy = horizontal ? y : img.height() - 1 - y;
      const int sx = horizontal ? img.width() - 1 - x : x;
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

ImageBuffer rotate(const ImageBuffer& img, double max_degrees, SampleRng& rng) {
  const double angle = rng.uniform(-max_degrees, max_degrees) * kDegToRad;
  if (angle == 0.0) return img;
  const double cy = (img.height() - 1) / 2.0;
  const double cx = (img.width() - 1) / 2.0;
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  return remap(img, [&](int y, int x) {
    const double dx = x - cx;
    const double dy = y - cy;
    return std::pair{cy - sn * dx + cs * dy, cx + cs * dx + sn * dy};
  });
}

ImageBuffer translate(const ImageBuffer& img, double tx, double ty, SampleRng& rng) {
  const double dx = rng.uniform(-tx * img.width(), tx * img.width());
  const double dy = rng.uniform(-ty * img.height(), ty * img.height());
  if (dx == 0.0 && dy == 0.0) return img;
  return remap(img, [&](int y, int x) { return std::pair{y - dy, x - dx}; });
}

ImageBuffer shear(const ImageBuffer& img, double max_degrees, SampleRng& rng) {
  const double angle = rng.uniform(-max_degrees, max_degrees) * kDegToRad;
  if (angle == 0.0) return img;
  const double k = std::tan(angle);
  const double cy = (img.height() - 1) / 2.0;
  return remap(img, [&](int y, int x) { return std::pair{static_cast<double>(y), x - k * (y - cy)}; });
}

ImageBuffer scale_crop(const ImageBuffer& img, double scale_min, SampleRng& rng) {
  const double area = rng.uniform(scale_min, 1.0);
  const double side = std::sqrt(area);
  const double ch = img.height() * side;
  const double cw = img.width() * side;
  const double y0 = rng.uniform(0.0, img.height() - ch);
  const double x0 = rng.uniform(0.0, img.width() - cw);
  if (area == 1.0) return img;
  const double sy = ch / img.height();
  const double sx = cw / img.width();
  return remap(img, [&](int y, int x) { return std::pair{y0 + (y + 0.5) * sy - 0.5, x0 + (x + 0.5) * sx - 0.5}; });
}

ImageBuffer brightness(const ImageBuffer& img, double strength, SampleRng& rng) {
  const double factor = draw_factor(rng, strength);
  if (factor == 1.0) return img;
  ImageBuffer out = img;
  for (auto& v : out.data()) v = static_cast<float>(v * factor);
  return out;
}

ImageBuffer contrast(const ImageBuffer& img, double strength, SampleRng& rng) {
  const double factor = draw_factor(rng, strength);
  if (factor == 1.0) return img;
  double mean = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) mean += luminance(img, y, x);
  }
  mean /= static_cast<double>(img.height()) * img.width();
  ImageBuffer out = img;
  for (auto& v : out.data()) v = static_cast<float>(mean + factor * (v - mean));
  return out;
}

ImageBuffer saturation(const ImageBuffer& img, double strength, SampleRng& rng) {
  const double factor = draw_factor(rng, strength);
  if (factor == 1.0 || img.channels() == 1) return img;
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double gray = luminance(img, y, x);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<float>(gray + factor * (img.at(y, x, c) - gray));
    }
  }
  return out;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = std::fmod((g - b) / d, 6.0) / 6.0;
  } else if (mx == g) {
    h = ((b - r) / d + 2.0) / 6.0;
  } else {
    h = ((r - g) / d + 4.0) / 6.0;
  }
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double h6 = h * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

ImageBuffer hue(const ImageBuffer& img, double max_shift, SampleRng& rng, KernelCounters* counters) {
  const double shift = rng.uniform(-max_shift, max_shift);
  if (img.channels() == 1) {
    if (counters) counters->warnings.fetch_add(1);
    return img;
  }
  if (shift == 0.0) return img;
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double h, s, v, r, g, b;
      rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), h, s, v);
      h = h + shift;
      h -= std::floor(h);
      hsv_to_rgb(h, s, v, r, g, b);
      out.at(y, x, 0) = static_cast<float>(r);
      out.at(y, x, 1) = static_cast<float>(g);
      out.at(y, x, 2) = static_cast<float>(b);
    }
  }
  return out;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  const int h = img.height();
  const int w = img.width();
  ImageBuffer tmp(h, w, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<std::size_t>(i + radius)] * img.at(y, std::clamp(x + i, 0, w - 1), c);
        }
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  ImageBuffer out(h, w, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(std::clamp(y + i, 0, h - 1), x, c);
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

// 8-bit level of a value; the epsilon keeps exact grid values k/255 on k.
int level_floor(float v) { return std::clamp(static_cast<int>(std::floor(v * 255.0 + 1e-3)), 0, 255); }

ImageBuffer posterize(const ImageBuffer& img, int bits) {
  if (bits >= 8) return img;
  const int mask = (0xFF << (8 - bits)) & 0xFF;
  ImageBuffer out = img;
  for (auto& v : out.data()) v = static_cast<float>(level_floor(v) & mask) / 255.0f;
  return out;
}

ImageBuffer solarize(const ImageBuffer& img, double threshold) {
  ImageBuffer out = img;
  for (auto& v : out.data()) {
    if (v >= threshold) v = 1.0f - v;
  }
  return out;
}

ImageBuffer equalize(const ImageBuffer& img) {
  ImageBuffer out = img;
  const std::size_t n = static_cast<std::size_t>(img.height()) * static_cast<std::size_t>(img.width());
  const auto src = img.data();
  auto dst = out.data();
  const auto channels = static_cast<std::size_t>(img.channels());
  for (std::size_t c = 0; c < channels; ++c) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t i = 0; i < n; ++i) ++hist[to_u8(src[i * channels + c])];
    std::array<std::size_t, 256> cdf{};
    std::size_t running = 0;
    for (std::size_t k = 0; k < 256; ++k) cdf[k] = running += hist[k];
    std::size_t cdf_min = 0;
    for (std::size_t k = 0; k < 256; ++k) {
      if (hist[k]) {
        cdf_min = cdf[k];
        break;
      }
    }
    if (cdf_min == n) continue;  // single level: nothing to spread
    std::array<float, 256> lut{};
    for (std::size_t k = 0; k < 256; ++k) {
      const double level = cdf[k] < cdf_min ? 0.0
                                            : std::round(static_cast<double>(cdf[k] - cdf_min) /
                                                         static_cast<double>(n - cdf_min) * 255.0);
      lut[k] = static_cast<float>(level / 255.0);
    }
    for (std::size_t i = 0; i < n; ++i) dst[i * channels + c] = lut[to_u8(src[i * channels + c])];
  }
  return out;
}

ImageBuffer sharpness(const ImageBuffer& img, double strength, SampleRng& rng) {
  const double factor = draw_factor(rng, strength);
  if (factor == 1.0) return img;
  const int h = img.height();
  const int w = img.width();
  ImageBuffer out(h, w, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double smooth = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            smooth += img.at(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1), c);
          }
        }
        smooth /= 9.0;
        out.at(y, x, c) = static_cast<float>(smooth + factor * (img.at(y, x, c) - smooth));
      }
    }
  }
  return out;
}

ImageBuffer erasing(const ImageBuffer& img, double area, double aspect, SampleRng& rng) {
  const double target = area * img.height() * img.width();
  const int eh = std::clamp(static_cast<int>(std::lround(std::sqrt(target * aspect))), 1, img.height());
  const int ew = std::clamp(static_cast<int>(std::lround(std::sqrt(target / aspect))), 1, img.width());
  const int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.height() - eh + 1)));
  const int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.width() - ew + 1)));
  ImageBuffer out = img;
  for (int y = y0; y < y0 + eh; ++y) {
    for (int x = x0; x < x0 + ew; ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = 0.0f;
    }
  }
  return out;
}

void check_op(const AugOpInstance& op) {
  const auto& catalog = Catalog::standard();
  auto report = validate_policy(Policy::of({op}), catalog, 1);
  if (!report.ok()) throw ValidationError("INVALID_OP", report.to_string());
}

}  // namespace

ImageBuffer apply_op(const ImageBuffer& img, const AugOpInstance& op, SampleRng& rng, KernelCounters* counters) {
  check_op(op);
  if (!rng.bernoulli(op.apply_probability)) {
    if (counters) counters->skipped.fetch_add(1);
    return img;
  }
  if (counters) counters->invoked[static_cast<std::size_t>(op.kind)].fetch_add(1);

  ImageBuffer out;
  switch (op.kind) {
    case AugKind::horizontal_flip: out = flip(img, true); break;
    case AugKind::vertical_flip: out = flip(img, false); break;
    case AugKind::rotate: out = rotate(img, op.param("degrees"), rng); break;
    case AugKind::translate: out = translate(img, op.param("tx"), op.param("ty"), rng); break;
    case AugKind::shear: out = shear(img, op.param("degrees"), rng); break;
    case AugKind::scale_crop: out = scale_crop(img, op.param("scale_min"), rng); break;
    case AugKind::brightness: out = brightness(img, op.param("strength"), rng); break;
    case AugKind::contrast: out = contrast(img, op.param("strength"), rng); break;
    case AugKind::saturation: out = saturation(img, op.param("strength"), rng); break;
    case AugKind::hue: out = hue(img, op.param("shift"), rng, counters); break;
    case AugKind::gaussian_blur: out = gaussian_blur(img, op.param("sigma")); break;
    case AugKind::posterize: out = posterize(img, static_cast<int>(op.param("bits"))); break;
    case AugKind::solarize: out = solarize(img, op.param("threshold")); break;
    case AugKind::equalize: out = equalize(img); break;
    case AugKind::sharpness: out = sharpness(img, op.param("strength"), rng); break;
    case AugKind::erasing: out = erasing(img, op.param("area"), op.param("aspect"), rng); break;
  }
  out.clamp();
  return out;
}

ImageBuffer apply_policy(const ImageBuffer& img, const Policy& policy, const StreamKey& key,
                         KernelCounters* counters) {
  ImageBuffer out = img;
  for (std::size_t i = 0; i < policy.ops.size(); ++i) {
    SampleRng rng(StreamKey{key.seed, key.epoch, key.sample, i});
    out = apply_op(out, policy.ops[i], rng, counters);
  }
  return out;
}

}  // namespace augloop
