#pragma once

// Procedural cartoon faces with eight binary attributes at fixed positions,
// and the rule-based oracle that reads them back.
//
// Layout is defined on a 32x32 unit grid and scaled to the image size; a pixel
// belongs to a region when its centre falls inside it. Every feature is at
// least two units thick so each region keeps at least one pixel row at the
// minimum size of 16.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metalgan/dataset.hpp"

namespace metalgan::synthetic {

inline const std::array<std::string, 8> kAttributeNames = {
    "black_hair", "blond_hair", "gray_hair", "eyeglasses", "mustache", "smiling", "pale_skin", "bushy_eyebrows"};

enum Attribute : int {
  kBlackHair = 0,
  kBlondHair,
  kGrayHair,
  kEyeglasses,
  kMustache,
  kSmiling,
  kPaleSkin,
  kBushyEyebrows,
};

using AttributeVector = std::array<int, 8>;  // ±1 in kAttributeNames order

struct SyntheticSpec {
  int image_size = 32;
  std::size_t count = 5000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-image factors that do not correspond to any attribute.
struct Nuisance {
  std::array<float, 3> background{0.2f, 0.3f, 0.5f};
  int skin_tone = 0;                       // index into the non-pale palette
  std::array<float, 3> skin_jitter{0, 0, 0};
};

/// Draws an attribute vector (hair colors mutually exclusive) and nuisance.
AttributeVector sample_attributes(Rng& rng);
Nuisance sample_nuisance(Rng& rng);

/// Renders (3, size, size) in [-1, 1].
Tensor<float> render_face(const AttributeVector& attrs, const Nuisance& nuisance, int size);

/// Recovers the attribute vector from a (3, s, s) image.
AttributeVector attribute_oracle(const Tensor<float>& image);

/// Pixels (row-major over size x size) that an attribute is allowed to change.
std::vector<bool> attribute_region_mask(const std::string& attribute, int size);

struct SyntheticDataset {
  DatasetIndex index;
  AttributeTable table;
  ImageStore images;
};

/// Deterministic in the spec. Images are quantized to 8 bits so the in-memory
/// copy equals what a PNG round trip yields.
SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec);

/// Writes `images/<id>.png`, `attributes.txt` and `manifest.json`.
void write_synthetic_dataset(const SyntheticDataset& data, const SyntheticSpec& spec, const std::filesystem::path& dir);

AttributeTable empty_attribute_table();

}  // namespace metalgan::synthetic
