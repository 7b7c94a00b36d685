#pragma once

#include <stdexcept>
#include <string>

namespace nlfilm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// argument outside its mathematical domain (s not in (0,1), horizon > 1, ...)
struct DomainError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  ValidationError(const std::string& what, double radius)
      : Error(what + " (at r = " + std::to_string(radius) + ")"), radius(radius) {}
  double radius;
};

struct QuadratureError : Error {
  QuadratureError(const std::string& what, double lo, double hi)
      : Error(what + " on (" + std::to_string(lo) + ", " + std::to_string(hi) + "]"),
        lo(lo),
        hi(hi) {}
  double lo, hi;
};

struct ShapeError : Error {
  using Error::Error;
};

struct SamplingError : Error {
  SamplingError(const std::string& what, std::size_t node)
      : Error(what + " at node " + std::to_string(node)), node(node) {}
  std::size_t node;
};

struct IllConditionedError : Error {
  IllConditionedError(double fraction)
      : Error("inverse averaging ill-conditioned: clamped energy fraction " +
              std::to_string(fraction)),
        energy_fraction(fraction) {}
  double energy_fraction;
};

struct UnsupportedCaseError : Error {
  using Error::Error;
};

struct SizeError : Error {
  using Error::Error;
};

struct GeometryError : Error {
  GeometryError(const std::string& what, int axis)
      : Error(what + " (axis " + std::to_string(axis + 1) + ")"), axis(axis) {}
  int axis;
};

struct RegimeError : Error {
  using Error::Error;
};

struct ParameterError : Error {
  using Error::Error;
};

struct OptimizationError : Error {
  using Error::Error;
};

struct SupportError : Error {
  using Error::Error;
};

struct EnvelopeError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  ConfigError(const std::string& what, std::string key, int line)
      : Error(what + " [" + key + (line >= 0 ? ", line " + std::to_string(line) : "") + "]"),
        key(std::move(key)),
        line(line) {}
  std::string key;
  int line;
};

}  // namespace nlfilm
