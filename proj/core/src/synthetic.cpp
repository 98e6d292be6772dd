#include "metalgan/synthetic.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <fstream>

#include <nlohmann/json.hpp>

#include "metalgan/image_io.hpp"

namespace metalgan::synthetic {
namespace {

using Color = std::array<float, 3>;

// Rectangles in 32x32 unit coordinates, [y0, y1) x [x0, x1).
struct Rect {
  float y0, y1, x0, x1;
  bool contains(float uy, float ux) const { return uy >= y0 && uy < y1 && ux >= x0 && ux < x1; }
};

constexpr float kUnits = 32.0f;
constexpr float kFaceCy = 17.0f, kFaceCx = 16.0f, kFaceR = 12.0f;

constexpr Rect kHair{2, 8, 5, 27};
constexpr Rect kBrowL{10, 12, 8, 14}, kBrowR{10, 12, 18, 24};
constexpr Rect kBushyL{8, 10, 8, 14}, kBushyR{8, 10, 18, 24};
constexpr Rect kEyeL{13, 15, 10, 12}, kEyeR{13, 15, 20, 22};
constexpr Rect kLensL{12, 17, 8, 14}, kLensR{12, 17, 18, 24}, kBridge{13, 15, 14, 18};
constexpr Rect kMustacheRect{19, 21, 11, 21};
constexpr Rect kMouthNeutral{24, 26, 11, 21};
constexpr Rect kMouthMiddle{24, 26, 12, 20};
constexpr Rect kSmileBottom{26, 28, 12, 20}, kSmileCornerL{24, 26, 10, 12}, kSmileCornerR{24, 26, 20, 22};
constexpr Rect kCheekL{17, 19, 6, 9}, kCheekR{17, 19, 23, 26};

constexpr Rect kGlassesBox{12, 17, 8, 24};
constexpr Rect kMouthBox{24, 28, 10, 22};

constexpr Color kHairBlack{-0.85f, -0.85f, -0.80f};
constexpr Color kHairBlond{0.90f, 0.75f, 0.10f};
constexpr Color kHairGray{0.50f, 0.50f, 0.55f};
constexpr Color kHairBrown{0.10f, -0.35f, -0.70f};
constexpr Color kBrow{-0.85f, -0.80f, -0.80f};
constexpr Color kEye{-0.90f, -0.90f, -0.90f};
constexpr Color kLens{-0.75f, -0.70f, -0.35f};
constexpr Color kMustacheColor{-0.55f, -0.70f, -0.80f};
constexpr Color kMouth{0.20f, -0.80f, -0.70f};
constexpr Color kPale{0.92f, 0.84f, 0.78f};
constexpr std::array<Color, 3> kSkinTones{{{0.55f, 0.15f, -0.15f}, {0.40f, 0.00f, -0.25f}, {0.25f, -0.15f, -0.40f}}};
// An attribute reads as present when its region is, on average per pixel,
// this close to the feature color.
constexpr float kOracleTolerance = 0.35f;

float unit(int pixel, int size) { return (static_cast<float>(pixel) + 0.5f) * kUnits / static_cast<float>(size); }

bool in_face(float uy, float ux) {
  const float dy = uy - kFaceCy, dx = ux - kFaceCx;
  return dy * dy + dx * dx < kFaceR * kFaceR;
}

class Canvas {
 public:
  explicit Canvas(int size) : size_(size), t_({3, size, size}) {}

  template <typename Pred>
  void paint(const Color& c, Pred inside) {
    const std::size_t plane = static_cast<std::size_t>(size_) * size_;
    for (int py = 0; py < size_; ++py)
      for (int px = 0; px < size_; ++px)
        if (inside(unit(py, size_), unit(px, size_)))
          for (int ch = 0; ch < 3; ++ch) t_[ch * plane + static_cast<std::size_t>(py) * size_ + px] = c[ch];
  }
  void paint(const Color& c, const Rect& r) {
    paint(c, [&](float uy, float ux) { return r.contains(uy, ux); });
  }

  Tensor<float> take() { return std::move(t_); }

 private:
  int size_;
  Tensor<float> t_;
};

// Mean per-pixel Euclidean distance to a reference color.
template <typename Pred>
float region_distance(const Tensor<float>& img, Pred inside, const Color& ref) {
  const int size = img.dim(1);
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  double acc = 0;
  int n = 0;
  for (int py = 0; py < size; ++py)
    for (int px = 0; px < size; ++px)
      if (inside(unit(py, size), unit(px, size))) {
        float d = 0;
        for (int ch = 0; ch < 3; ++ch) {
          const float v = img[ch * plane + static_cast<std::size_t>(py) * size + px] - ref[ch];
          d += v * v;
        }
        acc += std::sqrt(d);
        ++n;
      }
  return n > 0 ? static_cast<float>(acc / n) : std::numeric_limits<float>::infinity();
}

float rect_distance(const Tensor<float>& img, std::initializer_list<Rect> rects, const Color& ref) {
  return region_distance(
      img,
      [&](float uy, float ux) {
        for (const auto& r : rects)
          if (r.contains(uy, ux)) return true;
        return false;
      },
      ref);
}

int sign(bool b) { return b ? 1 : -1; }

float uniform(Rng& rng, float lo, float hi) { return lo + (hi - lo) * static_cast<float>(rng.uniform01()); }

}  // namespace

void SyntheticSpec::validate() const {
  if (image_size < 16) throw ConfigError("synthetic image size must be >= 16, got " + std::to_string(image_size));
}

AttributeVector sample_attributes(Rng& rng) {
  AttributeVector a;
  a.fill(-1);
  const std::size_t hair = rng.uniform_index(4);  // 3 = brown, no hair attribute
  if (hair < 3) a[hair] = 1;
  a[kEyeglasses] = sign(rng.bernoulli(0.4));
  a[kMustache] = sign(rng.bernoulli(0.4));
  a[kSmiling] = sign(rng.bernoulli(0.5));
  a[kPaleSkin] = sign(rng.bernoulli(0.35));
  a[kBushyEyebrows] = sign(rng.bernoulli(0.4));
  return a;
}

Nuisance sample_nuisance(Rng& rng) {
  Nuisance n;
  for (auto& v : n.background) v = uniform(rng, -0.5f, 0.3f);
  n.skin_tone = static_cast<int>(rng.uniform_index(kSkinTones.size()));
  for (auto& v : n.skin_jitter) v = uniform(rng, -0.05f, 0.05f);
  return n;
}

Tensor<float> render_face(const AttributeVector& a, const Nuisance& nz, int size) {
  if (size < 16) throw ConfigError("synthetic image size must be >= 16");
  Canvas canvas(size);
  canvas.paint(nz.background, [](float, float) { return true; });

  Color skin = a[kPaleSkin] > 0 ? kPale : kSkinTones.at(static_cast<std::size_t>(nz.skin_tone));
  for (int i = 0; i < 3; ++i) skin[i] = std::clamp(skin[i] + nz.skin_jitter[i], -1.0f, 1.0f);
  canvas.paint(skin, in_face);

  canvas.paint(kBrow, kBrowL);
  canvas.paint(kBrow, kBrowR);
  if (a[kBushyEyebrows] > 0) {
    canvas.paint(kBrow, kBushyL);
    canvas.paint(kBrow, kBushyR);
  }
  canvas.paint(kEye, kEyeL);
  canvas.paint(kEye, kEyeR);
  if (a[kSmiling] > 0) {
    canvas.paint(kMouth, kSmileBottom);
    canvas.paint(kMouth, kSmileCornerL);
    canvas.paint(kMouth, kSmileCornerR);
  } else {
    canvas.paint(kMouth, kMouthNeutral);
  }
  if (a[kMustache] > 0) canvas.paint(kMustacheColor, kMustacheRect);
  if (a[kEyeglasses] > 0) {
    canvas.paint(kLens, kLensL);
    canvas.paint(kLens, kLensR);
    canvas.paint(kLens, kBridge);
  }
  const Color hair = a[kBlackHair] > 0   ? kHairBlack
                     : a[kBlondHair] > 0 ? kHairBlond
                     : a[kGrayHair] > 0  ? kHairGray
                                         : kHairBrown;
  canvas.paint(hair, kHair);
  return canvas.take();
}

AttributeVector attribute_oracle(const Tensor<float>& img) {
  if (img.rank() != 3 || img.dim(0) != 3 || img.dim(1) != img.dim(2) || img.dim(1) < 16)
    throw ConfigError("attribute_oracle expects (3, s, s) with s >= 16, got " + shape_string(img.shape()));
  AttributeVector a;
  a.fill(-1);
  auto near = [&](const Color& c, std::initializer_list<Rect> rects) {
    return rect_distance(img, rects, c) < kOracleTolerance;
  };

  if (near(kHairBlack, {kHair})) a[kBlackHair] = 1;
  if (near(kHairBlond, {kHair})) a[kBlondHair] = 1;
  if (near(kHairGray, {kHair})) a[kGrayHair] = 1;
  a[kPaleSkin] = sign(near(kPale, {kCheekL, kCheekR}));
  const float glasses = region_distance(
      img,
      [](float uy, float ux) {
        if (kEyeL.contains(uy, ux) || kEyeR.contains(uy, ux)) return false;
        return kLensL.contains(uy, ux) || kLensR.contains(uy, ux) || kBridge.contains(uy, ux);
      },
      kLens);
  a[kEyeglasses] = sign(glasses < kOracleTolerance);
  a[kMustache] = sign(near(kMustacheColor, {kMustacheRect}));
  a[kSmiling] = sign(near(kMouth, {kSmileBottom}) && !near(kMouth, {kMouthMiddle}));
  a[kBushyEyebrows] = sign(near(kBrow, {kBushyL, kBushyR}));
  return a;
}

std::vector<bool> attribute_region_mask(const std::string& attribute, int size) {
  std::function<bool(float, float)> inside;
  if (attribute == "black_hair" || attribute == "blond_hair" || attribute == "gray_hair")
    inside = [](float uy, float ux) { return kHair.contains(uy, ux); };
  else if (attribute == "eyeglasses")
    inside = [](float uy, float ux) { return kGlassesBox.contains(uy, ux); };
  else if (attribute == "mustache")
    inside = [](float uy, float ux) { return kMustacheRect.contains(uy, ux); };
  else if (attribute == "smiling")
    inside = [](float uy, float ux) { return kMouthBox.contains(uy, ux); };
  else if (attribute == "pale_skin")
    inside = [](float uy, float ux) { return in_face(uy, ux); };
  else if (attribute == "bushy_eyebrows")
    inside = [](float uy, float ux) {
      return Rect{8, 12, 8, 14}.contains(uy, ux) || Rect{8, 12, 18, 24}.contains(uy, ux);
    };
  else
    throw ConfigError("no region mask for attribute '" + attribute + "'");
  std::vector<bool> mask(static_cast<std::size_t>(size) * size);
  for (int py = 0; py < size; ++py)
    for (int px = 0; px < size; ++px) mask[static_cast<std::size_t>(py) * size + px] = inside(unit(py, size), unit(px, size));
  return mask;
}

AttributeTable empty_attribute_table() {
  return AttributeTable(std::vector<std::string>(kAttributeNames.begin(), kAttributeNames.end()));
}

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset out{DatasetIndex{}, empty_attribute_table(), ImageStore{}};
  Rng rng(derive_seed(spec.seed, 1));
  std::vector<std::string> ids;
  ids.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    const std::string id = buf;
    const AttributeVector attrs = sample_attributes(rng);
    const Nuisance nz = sample_nuisance(rng);
    out.table.add_row(id, std::vector<int>(attrs.begin(), attrs.end()));
    out.images.insert(id, quantize(render_face(attrs, nz, spec.image_size)));
    ids.push_back(id);
  }
  const auto split = seeded_split(ids, spec.seed);
  for (const auto& id : ids) out.index.add({id, "images/" + id + ".png", split.at(id)});
  return out;
}

void write_synthetic_dataset(const SyntheticDataset& data, const SyntheticSpec& spec,
                             const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create '" + (dir / "images").string() + "': " + ec.message());
  for (const auto& r : data.index.records()) write_png((dir / r.path).string(), from_tensor(data.images.get(r.id)));

  const auto attr_path = dir / "attributes.txt";
  std::ofstream attr(attr_path, std::ios::binary);
  attr << format_attribute_file(data.table);
  if (!attr) throw IoError("cannot write '" + attr_path.string() + "'");

  nlohmann::json manifest;
  manifest["seed"] = spec.seed;
  manifest["spec"] = {{"image_size", spec.image_size},
                      {"count", spec.count},
                      {"attributes", std::vector<std::string>(kAttributeNames.begin(), kAttributeNames.end())}};
  manifest["split"] = {{"train", data.index.ids(Split::kTrain)}, {"test", data.index.ids(Split::kTest)}};
  const auto manifest_path = dir / "manifest.json";
  std::ofstream m(manifest_path, std::ios::binary);
  m << manifest.dump(2) << '\n';
  if (!m) throw IoError("cannot write '" + manifest_path.string() + "'");
}

}  // namespace metalgan::synthetic
