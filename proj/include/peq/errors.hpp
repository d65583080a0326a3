#pragma once

#include <stdexcept>
#include <string>

namespace peq {

// Reading past the information set H_t (any L_s or A_s with s beyond the
// allowed index) is a logic error, not a data problem.
class MaskedAccessError : public std::logic_error {
 public:
  explicit MaskedAccessError(const std::string& what) : std::logic_error(what) {}
};

class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when no evaluation trajectory follows a policy prefix, so the
// targeting weights at some step are all zero.
class DegenerateSupportError : public std::runtime_error {
 public:
  explicit DegenerateSupportError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace peq
