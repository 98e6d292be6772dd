#pragma once

// Small fixtures shared by the unit tests.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "metalgan/synthetic.hpp"
#include "metalgan/trainer.hpp"

namespace support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "metalgan_test_XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// In-memory synthetic dataset at 16x16.
inline metalgan::LoadedDataset tiny_dataset(std::size_t count = 200, std::uint64_t seed = 3) {
  auto s = metalgan::synthetic::generate_synthetic_dataset({16, count, seed});
  return {std::move(s.index), std::move(s.table), std::move(s.images)};
}

/// A few hundred to a few thousand parameters; fast enough for loops of
/// dozens of iterations.
inline metalgan::ModelConfig tiny_model() { return {{4, 1, 1, true, 3}, {4, 2, 3}}; }

inline metalgan::InnerSettings tiny_inner() {
  metalgan::InnerSettings s;
  s.batch_size = 4;
  s.lambda_g = 1e-3;
  s.lambda_d = 1e-3;
  return s;
}

inline metalgan::TaskDataset task_for(const metalgan::LoadedDataset& data, const std::string& domain) {
  metalgan::Rng rng(0);
  return metalgan::restrict_to_domain(data.index, data.table, metalgan::DomainSpec::from_name(domain), std::nullopt,
                                      rng);
}

/// Largest |a - b| over two equally laid out parameter sets.
template <typename T>
double max_abs_diff(const metalgan::ParameterSet<T>& a, const metalgan::ParameterSet<T>& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.count(); ++k) {
    const auto& x = a.entries()[k].second;
    const auto& y = b.entries()[k].second;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(double(x[i]) - double(y[i])));
  }
  return m;
}

}  // namespace support
