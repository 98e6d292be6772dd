#include "metalgan/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metalgan/image_io.hpp"

namespace metalgan {

AttributeTable::AttributeTable(std::vector<std::string> attribute_names) : names_(std::move(attribute_names)) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t j = i + 1; j < names_.size(); ++j)
      if (names_[i] == names_[j]) throw ParseError("duplicate attribute name '" + names_[i] + "'");
}

std::optional<std::size_t> AttributeTable::attribute_index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

void AttributeTable::add_row(const std::string& image_id, std::vector<int> values) {
  if (values.size() != names_.size())
    throw ParseError("expected " + std::to_string(names_.size()) + " values, got " + std::to_string(values.size()));
  for (int v : values)
    if (v != 1 && v != -1) throw ParseError("attribute value " + std::to_string(v) + " is not -1 or 1");
  if (!index_.emplace(image_id, ids_.size()).second) throw ParseError("duplicate image id '" + image_id + "'");
  ids_.push_back(image_id);
  rows_.push_back(std::move(values));
}

const std::vector<int>& AttributeTable::row(const std::string& image_id) const {
  auto it = index_.find(image_id);
  if (it == index_.end()) throw DatasetError("no attributes for image '" + image_id + "'");
  return rows_[it->second];
}

int AttributeTable::value(const std::string& image_id, const std::string& attribute) const {
  auto idx = attribute_index(attribute);
  if (!idx) throw ConfigError("unknown attribute '" + attribute + "'");
  return row(image_id)[*idx];
}

AttributeTable parse_attribute_file(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("attribute file is empty");
  std::istringstream header(line);
  std::vector<std::string> names;
  for (std::string tok; header >> tok;) names.push_back(tok);
  if (names.empty()) throw ParseError("line 1: no attribute names");
  AttributeTable table(std::move(names));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream row(line);
    std::string id;
    if (!(row >> id)) continue;  // blank line
    std::vector<int> values;
    for (std::string tok; row >> tok;) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        values.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": value '" + tok + "' is not -1 or 1");
      }
    }
    try {
      table.add_row(id, std::move(values));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

std::string format_attribute_file(const AttributeTable& table) {
  std::ostringstream out;
  const auto& names = table.attribute_names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? " " : "") << names[i];
  out << '\n';
  for (const auto& id : table.ids()) {
    out << id;
    for (int v : table.row(id)) out << ' ' << v;
    out << '\n';
  }
  return out.str();
}

DomainSpec DomainSpec::from_name(const std::string& name) {
  constexpr std::string_view prefix = "not_";
  if (name.starts_with(prefix)) return {name, name.substr(prefix.size()), -1};
  return {name, name, 1};
}

void DatasetIndex::add(ImageRecord record) {
  if (!index_.emplace(record.id, records_.size()).second)
    throw DatasetError("duplicate image id '" + record.id + "' in dataset index");
  records_.push_back(std::move(record));
}

const ImageRecord& DatasetIndex::record(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DatasetError("image '" + id + "' is not in the dataset index");
  return records_[it->second];
}

std::vector<std::string> DatasetIndex::ids(Split split) const {
  std::vector<std::string> out;
  for (const auto& r : records_)
    if (r.split == split) out.push_back(r.id);
  return out;
}

ImageStore ImageStore::load(const DatasetIndex& index) {
  ImageStore store;
  for (const auto& r : index.records()) {
    const std::filesystem::path path = index.root() / r.path;
    store.insert(r.id, to_tensor(read_png(path.string())));
  }
  return store;
}

void ImageStore::insert(const std::string& id, Tensor<float> image) {
  if (image.rank() != 3) throw ConfigError("image '" + id + "' must be (c, h, w), got " + shape_string(image.shape()));
  images_[id] = std::move(image);
}

const Tensor<float>& ImageStore::get(const std::string& id) const {
  auto it = images_.find(id);
  if (it == images_.end()) throw DatasetError("image '" + id + "' has not been loaded");
  return it->second;
}

TaskDataset restrict_to_domain(const DatasetIndex& index, const AttributeTable& table, const DomainSpec& domain,
                               std::optional<std::size_t> few_shot_count, Rng& rng) {
  const auto attr = table.attribute_index(domain.attribute);
  if (!attr) {
    std::string available;
    for (const auto& n : table.attribute_names()) available += (available.empty() ? "" : ", ") + n;
    throw ConfigError("unknown attribute '" + domain.attribute + "' for domain '" + domain.name +
                      "'; available: " + available);
  }
  const auto train = index.ids(Split::kTrain);
  if (train.empty()) throw DatasetError("dataset has no training images");
  if (few_shot_count && *few_shot_count == 0) throw ConfigError("few-shot count must be positive");

  TaskDataset task{domain, {}, few_shot_count};
  for (const auto& id : train)
    if (table.contains(id) && table.row(id)[*attr] == domain.required_sign) task.member_ids.push_back(id);
  if (task.member_ids.empty())
    throw DatasetError("domain '" + domain.name + "' has no training images (" + domain.attribute +
                       " = " + std::to_string(domain.required_sign) + ")");
  if (few_shot_count && *few_shot_count < task.member_ids.size()) {
    auto picks = sample_positions(task.member_ids.size(), *few_shot_count, rng);
    std::sort(picks.begin(), picks.end());
    std::vector<std::string> subset;
    subset.reserve(picks.size());
    for (auto p : picks) subset.push_back(task.member_ids[p]);
    task.member_ids = std::move(subset);
  }
  return task;
}

std::vector<std::size_t> sample_positions(std::size_t pool_size, std::size_t count, Rng& rng) {
  if (pool_size == 0) throw DatasetError("cannot sample from an empty pool");
  if (count == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> out;
  out.reserve(count);
  if (pool_size < count) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(rng.uniform_index(pool_size));
    return out;
  }
  std::vector<std::size_t> perm(pool_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(pool_size - i);
    std::swap(perm[i], perm[j]);
    out.push_back(perm[i]);
  }
  return out;
}

SampledBatch sample_batch(const std::vector<std::string>& pool, const ImageStore& store, std::size_t batch_size,
                          Rng& rng) {
  SampledBatch out;
  for (auto p : sample_positions(pool.size(), batch_size, rng)) out.ids.push_back(pool[p]);
  out.images = stack_images(store, out.ids);
  return out;
}

SampledBatch sample_batch(const TaskDataset& task, const ImageStore& store, std::size_t batch_size, Rng& rng) {
  return sample_batch(task.member_ids, store, batch_size, rng);
}

SampledBatch sample_batch(const DatasetIndex& index, const ImageStore& store, std::size_t batch_size, Rng& rng) {
  return sample_batch(index.ids(Split::kTrain), store, batch_size, rng);
}

ImageBatch stack_images(const ImageStore& store, const std::vector<std::string>& ids) {
  std::vector<Tensor<float>> images;
  images.reserve(ids.size());
  for (const auto& id : ids) images.push_back(store.get(id));
  return stack(images);
}

ImageBatch stack(const std::vector<Tensor<float>>& images) {
  if (images.empty()) throw ConfigError("cannot stack an empty image list");
  const Shape& s = images.front().shape();
  Shape bs{static_cast<int>(images.size())};
  bs.insert(bs.end(), s.begin(), s.end());
  ImageBatch batch(bs);
  const std::size_t n = images.front().size();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != s) throw ConfigError("cannot stack images of different shapes");
    std::copy_n(images[i].data(), n, batch.data() + i * n);
  }
  return batch;
}

Tensor<float> batch_item(const ImageBatch& batch, std::size_t i) {
  if (batch.rank() != 4 || i >= static_cast<std::size_t>(batch.dim(0)))
    throw ConfigError("batch_item: index out of range for " + shape_string(batch.shape()));
  Tensor<float> out({batch.dim(1), batch.dim(2), batch.dim(3)});
  std::copy_n(batch.data() + i * out.size(), out.size(), out.data());
  return out;
}

std::unordered_map<std::string, Split> seeded_split(const std::vector<std::string>& ids, std::uint64_t seed) {
  std::vector<std::string> order = ids;
  Rng rng(derive_seed(seed, 0x5117));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  const std::size_t n_train = (order.size() * 9 + 9) / 10;
  std::unordered_map<std::string, Split> out;
  for (std::size_t i = 0; i < order.size(); ++i) out[order[i]] = i < n_train ? Split::kTrain : Split::kTest;
  return out;
}

LoadedDataset load_dataset_dir(const std::filesystem::path& dir, std::uint64_t split_seed) {
  const auto attr_path = dir / "attributes.txt";
  std::ifstream in(attr_path);
  if (!in) throw IoError("cannot open '" + attr_path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  LoadedDataset out{DatasetIndex(dir), parse_attribute_file(buf.str()), {}};

  std::unordered_map<std::string, Split> split;
  const auto manifest_path = dir / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream min(manifest_path);
    nlohmann::json manifest;
    try {
      min >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("'" + manifest_path.string() + "': " + e.what());
    }
    if (manifest.contains("split")) {
      for (const auto& id : manifest["split"].value("train", std::vector<std::string>{})) split[id] = Split::kTrain;
      for (const auto& id : manifest["split"].value("test", std::vector<std::string>{})) split[id] = Split::kTest;
    }
  }
  if (split.empty()) split = seeded_split(out.table.ids(), split_seed);
  for (const auto& id : out.table.ids()) {
    auto it = split.find(id);
    out.index.add({id, "images/" + id + ".png", it == split.end() ? Split::kTrain : it->second});
  }
  out.images = ImageStore::load(out.index);
  return out;
}

}  // namespace metalgan
