// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>

#include "augloop/trainer.hpp"

namespace augloop {

/// Reads root/{train,valid}/<class>/*.{png,ppm,pgm}. Classes are sorted by
/// name to get indices; valid must not name a class that train lacks.
/// Errors: MISSING_SPLIT, EMPTY_CLASS, CLASS_MISMATCH, UNDECODABLE_IMAGE.
LabeledDataset load_dataset(const std::filesystem::path& root);

/// Writes the layout load_dataset reads, one <index>.<ext> file per image.
void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& root,
                   ImageFormat format = ImageFormat::pnm);

struct SyntheticSpec {
  int image_size = 32;
  int train_per_class = 67;
  int valid_per_class = 100;
  double center_jitter = 4.0;  // pixels, uniform in [-j, j]
  double size_jitter = 0.2;    // relative, uniform in [1-j, 1+j]
  double noise_sigma = 0.05;

  void validate() const;
};

/// Three classes (cross, disk, square), bright shape on a dark background,
/// quantized to 8-bit levels so the set survives a codec round trip.
LabeledDataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace augloop
