#pragma once

#include <stdexcept>
#include <string>

namespace metalgan {

// Malformed text input (attribute files, config files, CSV).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing/unreadable/unwritable files. The message always carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible shapes or invalid configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset-level failures such as a domain restriction with no members.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses and similar numerical aborts inside training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace metalgan
