#pragma once

#include <stdexcept>
#include <string>

namespace vadapt {

// Shape/extent violations (mismatched dims, negative output extents, ...).
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse (non-scalar loss to backward, unknown preset, ...).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid model configuration (L not divisible by N, heads not dividing D, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File format and I/O failures.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vadapt
