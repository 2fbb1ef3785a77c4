#pragma once

#include <stdexcept>
#include <string>

namespace mogaf {

// Error taxonomy mirrored by the C API status codes: config/usage errors,
// numerical failures, and I/O failures.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/precondition violations on library inputs.
class DimensionError : public ConfigError {
public:
  explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

// Blend whose quaternion contributions cancel out.
class DegenerateBlendError : public NumericalError {
public:
  explicit DegenerateBlendError(const std::string& msg) : NumericalError(msg) {}
};

// Procrustes input with fewer than 3 points or rank-deficient geometry.
class DegenerateGeometryError : public NumericalError {
public:
  explicit DegenerateGeometryError(const std::string& msg)
      : NumericalError(msg) {}
};

// Point mapping to nonpositive camera-space depth.
class BehindCameraError : public NumericalError {
public:
  explicit BehindCameraError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace mogaf
