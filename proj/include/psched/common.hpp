#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace psched {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (JSON shape, wrong types, missing keys).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or option combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Task requested on a unit that cannot process it.
class EligibilityError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked on a state that does not admit it.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Unknown name in a lookup table.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Numerical domain violation (bad probability level, empty sample, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Mixes a base seed with a list of stream coordinates (splitmix64 chain).
/// The result depends only on the arguments, never on thread scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords);

/// Runs body(i) for i in [0, n) on up to `workers` threads. workers <= 1 runs
/// inline. Exceptions from the body are rethrown on the calling thread.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

/// Writes a warning line to stderr; silenced by set_warnings_enabled(false).
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace psched
