#include "metalgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace metalgan {
namespace {

constexpr char kMagic[8] = {'M', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U get(const std::string& in, std::size_t& pos, const std::string& source) {
  if (pos + sizeof(U) > in.size()) throw ParseError("checkpoint '" + source + "' is truncated");
  U v;
  std::memcpy(&v, in.data() + pos, sizeof(U));
  pos += sizeof(U);
  return v;
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"base_channels", c.base_channels},
          {"n_downsample", c.n_downsample},
          {"n_residual", c.n_residual},
          {"skip_connections", c.skip_connections},
          {"channels", c.channels}};
}

nlohmann::json to_json(const DiscriminatorConfig& c) {
  return {{"base_channels", c.base_channels}, {"n_layers", c.n_layers}, {"channels", c.channels}};
}

void append_arrays(nlohmann::json& arrays, const char* set, const ParameterSet<float>& p) {
  for (const auto& [name, t] : p.entries()) arrays.push_back({{"set", set}, {"name", name}, {"shape", t.shape()}});
}

}  // namespace

std::string checkpoint_payload(const Checkpoint& ck) {
  std::string out;
  for (const auto* set : {&ck.generator_params, &ck.discriminator_params})
    for (const auto& [_, t] : set->entries())
      out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
  return out;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  nlohmann::json header;
  header["format_version"] = ck.format_version;
  header["generator"] = to_json(ck.generator);
  header["discriminator"] = to_json(ck.discriminator);
  header["epoch"] = ck.epoch;
  header["rng_state"] = ck.rng_state;
  nlohmann::json arrays = nlohmann::json::array();
  append_arrays(arrays, "generator", ck.generator_params);
  append_arrays(arrays, "discriminator", ck.discriminator_params);
  header["arrays"] = std::move(arrays);
  const std::string h = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, ck.format_version);
  put<std::uint64_t>(out, h.size());
  out += h;
  out += checkpoint_payload(ck);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw ParseError("'" + source + "' is not a checkpoint file");
  std::size_t pos = sizeof kMagic;
  Checkpoint ck;
  ck.format_version = get<std::uint32_t>(bytes, pos, source);
  if (ck.format_version != kCheckpointFormatVersion)
    throw ConfigError("checkpoint '" + source + "' has format version " + std::to_string(ck.format_version) +
                      ", expected " + std::to_string(kCheckpointFormatVersion));
  const auto header_len = get<std::uint64_t>(bytes, pos, source);
  if (pos + header_len > bytes.size()) throw ParseError("checkpoint '" + source + "' is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
    pos += header_len;
    const auto& g = header.at("generator");
    ck.generator = {g.at("base_channels"), g.at("n_downsample"), g.at("n_residual"), g.at("skip_connections"),
                    g.at("channels")};
    const auto& d = header.at("discriminator");
    ck.discriminator = {d.at("base_channels"), d.at("n_layers"), d.at("channels")};
    ck.epoch = header.at("epoch");
    ck.rng_state = header.at("rng_state");
    for (const auto& a : header.at("arrays")) {
      const Shape shape = a.at("shape").get<Shape>();
      Tensor<float> t(shape);
      const std::size_t nbytes = t.size() * sizeof(float);
      if (pos + nbytes > bytes.size()) throw ParseError("checkpoint '" + source + "' is truncated");
      std::memcpy(t.data(), bytes.data() + pos, nbytes);
      pos += nbytes;
      const std::string set = a.at("set");
      auto& target = set == "generator" ? ck.generator_params : ck.discriminator_params;
      target.add(a.at("name"), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint '" + source + "' has a malformed header: " + e.what());
  }
  if (pos != bytes.size()) throw ParseError("checkpoint '" + source + "' has trailing bytes");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ck);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write checkpoint '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint to '" + path.string() + "': " + ec.message());
}

namespace {
std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}
}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path), path.string());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) { return fnv1a_hex(read_file(path)); }

}  // namespace metalgan
