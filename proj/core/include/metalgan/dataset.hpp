#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "metalgan/rng.hpp"
#include "metalgan/tensor.hpp"

namespace metalgan {

/// (batch, channels, height, width), values in [-1, 1].
using ImageBatch = Tensor<float>;

/// Per-image ±1 attribute annotations. Used only to partition the data into
/// domains; the networks never see these values.
class AttributeTable {
 public:
  AttributeTable() = default;
  explicit AttributeTable(std::vector<std::string> attribute_names);

  const std::vector<std::string>& attribute_names() const { return names_; }
  std::optional<std::size_t> attribute_index(const std::string& name) const;

  void add_row(const std::string& image_id, std::vector<int> values);
  bool contains(const std::string& image_id) const { return index_.contains(image_id); }
  const std::vector<int>& row(const std::string& image_id) const;
  int value(const std::string& image_id, const std::string& attribute) const;

  /// Image ids in insertion order.
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }

  bool operator==(const AttributeTable& other) const { return names_ == other.names_ && ids_ == other.ids_ && rows_ == other.rows_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::string> ids_;
  std::vector<std::vector<int>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Header line of attribute names, then `image_id v1 ... vk` per line.
AttributeTable parse_attribute_file(const std::string& text);
std::string format_attribute_file(const AttributeTable& table);

struct DomainSpec {
  std::string name;
  std::string attribute;
  int required_sign = 1;

  /// "attr" -> (attr, attr, +1); "not_attr" -> (not_attr, attr, -1).
  static DomainSpec from_name(const std::string& name);
  bool operator==(const DomainSpec&) const = default;
};

enum class Split { kTrain, kTest };

struct ImageRecord {
  std::string id;
  std::string path;  // relative to DatasetIndex::root(), may be empty for in-memory data
  Split split = Split::kTrain;
};

class DatasetIndex {
 public:
  DatasetIndex() = default;
  explicit DatasetIndex(std::filesystem::path root) : root_(std::move(root)) {}

  void add(ImageRecord record);
  const std::vector<ImageRecord>& records() const { return records_; }
  const ImageRecord& record(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.contains(id); }
  std::vector<std::string> ids(Split split) const;
  std::size_t size() const { return records_.size(); }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::vector<ImageRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Decoded pixels by image id. Immutable once built, so concurrent readers are
/// safe.
class ImageStore {
 public:
  /// Decodes every record of the index. Throws IoError naming the path of the
  /// first unreadable file.
  static ImageStore load(const DatasetIndex& index);

  void insert(const std::string& id, Tensor<float> image);
  const Tensor<float>& get(const std::string& id) const;
  bool contains(const std::string& id) const { return images_.contains(id); }
  std::size_t size() const { return images_.size(); }

 private:
  std::unordered_map<std::string, Tensor<float>> images_;
};

/// Restriction of the train split to one domain.
struct TaskDataset {
  DomainSpec domain;
  std::vector<std::string> member_ids;
  std::optional<std::size_t> few_shot_count;  // nullopt = all
};

/// Members are train ids whose attribute equals the required sign, in index
/// order; with a few-shot count K, a seeded uniform K-subset (kept in index
/// order). Throws DatasetError if nothing matches.
TaskDataset restrict_to_domain(const DatasetIndex& index, const AttributeTable& table, const DomainSpec& domain,
                               std::optional<std::size_t> few_shot_count, Rng& rng);

/// Draws `count` positions from a pool of `pool_size`: with replacement when
/// the pool is smaller than `count`, else a partial Fisher-Yates draw.
std::vector<std::size_t> sample_positions(std::size_t pool_size, std::size_t count, Rng& rng);

struct SampledBatch {
  ImageBatch images;
  std::vector<std::string> ids;
};

SampledBatch sample_batch(const std::vector<std::string>& pool, const ImageStore& store, std::size_t batch_size,
                          Rng& rng);
SampledBatch sample_batch(const TaskDataset& task, const ImageStore& store, std::size_t batch_size, Rng& rng);
/// Samples the train split.
SampledBatch sample_batch(const DatasetIndex& index, const ImageStore& store, std::size_t batch_size, Rng& rng);

/// Stacks single images (c, h, w) into a batch in the given order.
ImageBatch stack_images(const ImageStore& store, const std::vector<std::string>& ids);

/// Extracts image i of a batch as (c, h, w).
Tensor<float> batch_item(const ImageBatch& batch, std::size_t i);

/// Assembles (c, h, w) images into a batch.
ImageBatch stack(const std::vector<Tensor<float>>& images);

/// 90/10 train/test assignment by seeded shuffle (train count rounded up).
std::unordered_map<std::string, Split> seeded_split(const std::vector<std::string>& ids, std::uint64_t seed);

struct LoadedDataset {
  DatasetIndex index;
  AttributeTable table;
  ImageStore images;
};

/// Reads `attributes.txt` and `images/<id>.png` under `dir`. The split comes
/// from `manifest.json` when present, else a seeded 90/10 shuffle.
LoadedDataset load_dataset_dir(const std::filesystem::path& dir, std::uint64_t split_seed = 0);

}  // namespace metalgan
