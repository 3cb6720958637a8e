#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fg {

enum class ErrorKind {
  Parse,
  Ordering,
  Config,
  Injection,
  Fault,
  Io,
};

/// Every recoverable failure in the core is reported as an Error; the C API
/// maps the kind onto a status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

constexpr unsigned popcount64(uint64_t v) noexcept {
  return static_cast<unsigned>(__builtin_popcountll(v));
}

// SplitMix64 finalizer; also the base of the deterministic generators.
constexpr uint64_t mix64(uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace fg
