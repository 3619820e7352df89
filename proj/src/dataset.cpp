// SPDX-License-Identifier: Apache-2.0
#include "augloop/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "augloop/error.hpp"

namespace fs = std::filesystem;

namespace augloop {

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (directories ? entry.is_directory() : (entry.is_regular_file() && is_image_file(entry.path()))) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void load_class(const fs::path& dir, int label, std::vector<LabeledImage>& into) {
  const auto files = sorted_entries(dir, false);
  if (files.empty()) throw ValidationError("EMPTY_CLASS", fmt::format("class directory {} has no images", dir.string()));
  for (const auto& file : files) {
    try {
      into.push_back({read_image(file), label});
    } catch (const Error& e) {
      throw ValidationError("UNDECODABLE_IMAGE", e.what());
    }
  }
}

}  // namespace

LabeledDataset load_dataset(const fs::path& root) {
  for (const char* split : {"train", "valid"}) {
    if (!fs::is_directory(root / split)) {
      throw ValidationError("MISSING_SPLIT", fmt::format("{} has no '{}' directory", root.string(), split));
    }
  }
  LabeledDataset ds;
  const auto train_dirs = sorted_entries(root / "train", true);
  if (train_dirs.empty()) throw ValidationError("EMPTY_CLASS", "train split has no class directories");
  for (const auto& dir : train_dirs) ds.class_names.push_back(dir.filename().string());
  for (std::size_t i = 0; i < train_dirs.size(); ++i) load_class(train_dirs[i], static_cast<int>(i), ds.train);

  const auto valid_dirs = sorted_entries(root / "valid", true);
  if (valid_dirs.empty()) throw ValidationError("EMPTY_CLASS", "valid split has no class directories");
  for (const auto& dir : valid_dirs) {
    const auto name = dir.filename().string();
    const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), name);
    if (it == ds.class_names.end()) {
      throw ValidationError("CLASS_MISMATCH", fmt::format("valid class '{}' does not exist in train", name));
    }
    load_class(dir, static_cast<int>(it - ds.class_names.begin()), ds.valid);
  }
  return ds;
}

void write_dataset(const LabeledDataset& dataset, const fs::path& root, ImageFormat format) {
  dataset.validate();
  const auto write_split = [&](const char* split, const std::vector<LabeledImage>& samples) {
    for (const auto& name : dataset.class_names) fs::create_directories(root / split / name);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      const char* ext = format == ImageFormat::png ? "png" : (s.image.channels() == 1 ? "pgm" : "ppm");
      write_image(root / split / dataset.class_names[static_cast<std::size_t>(s.label)] / fmt::format("{:05}.{}", i, ext),
                  s.image);
    }
  };
  write_split("train", dataset.train);
  write_split("valid", dataset.valid);
}

void SyntheticSpec::validate() const {
  if (image_size < 8) throw ValidationError("BAD_CONFIG", "synthetic.image_size must be >= 8");
  if (train_per_class < 1 || valid_per_class < 1) throw ValidationError("BAD_CONFIG", "synthetic counts must be >= 1");
  if (center_jitter < 0 || size_jitter < 0 || size_jitter >= 1 || noise_sigma < 0) {
    throw ValidationError("BAD_CONFIG", "synthetic jitter/noise out of range");
  }
}

namespace {

enum class Shape { cross, disk, square };
constexpr std::array<const char*, 3> kShapeNames = {"cross", "disk", "square"};
constexpr float kBackground = 0.2f;
constexpr float kForeground = 0.8f;
constexpr int kSuper = 4;

bool inside(Shape shape, double dx, double dy, double scale) {
  switch (shape) {
    case Shape::disk: return dx * dx + dy * dy <= (8.0 * scale) * (8.0 * scale);
    case Shape::square: return std::abs(dx) <= 7.0 * scale && std::abs(dy) <= 7.0 * scale;
    case Shape::cross: {
      const double arm = 9.0 * scale, half = 2.5 * scale;
      return (std::abs(dx) <= arm && std::abs(dy) <= half) || (std::abs(dy) <= arm && std::abs(dx) <= half);
    }
  }
  return false;
}

ImageBuffer render(Shape shape, const SyntheticSpec& spec, SampleRng& rng) {
  const int n = spec.image_size;
  const double factor = n / 32.0;
  const double cx = (n - 1) / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter) * factor;
  const double cy = (n - 1) / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter) * factor;
  const double scale = factor * rng.uniform(1.0 - spec.size_jitter, 1.0 + spec.size_jitter);
  ImageBuffer img(n, n, 1);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper - 0.5;
          const double py = y + (sy + 0.5) / kSuper - 0.5;
          hits += inside(shape, px - cx, py - cy, scale) ? 1 : 0;
        }
      }
      const double cover = static_cast<double>(hits) / (kSuper * kSuper);
      const double v = kBackground + cover * (kForeground - kBackground) + spec.noise_sigma * rng.normal();
      img.at(y, x, 0) = static_cast<float>(to_u8(static_cast<float>(v))) / 255.0f;
    }
  }
  return img;
}

}  // namespace

LabeledDataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  LabeledDataset ds;
  for (const char* name : kShapeNames) ds.class_names.emplace_back(name);
  const auto fill = [&](std::string_view split, int per_class, std::vector<LabeledImage>& into) {
    const auto split_seed = derive_seed(seed, split);
    for (int c = 0; c < static_cast<int>(kShapeNames.size()); ++c) {
      for (int i = 0; i < per_class; ++i) {
        SampleRng rng(derive_seed(split_seed, static_cast<std::uint64_t>(c) * 1'000'000u + static_cast<std::uint64_t>(i)));
        into.push_back({render(static_cast<Shape>(c), spec, rng), c});
      }
    }
  };
  fill("train", spec.train_per_class, ds.train);
  fill("valid", spec.valid_per_class, ds.valid);
  return ds;
}

}  // namespace augloop
