#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace solar {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base exception for pipeline failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text from a provider or an input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Transport or protocol failure talking to a provider.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// FNV-1a, 64-bit. Stable across platforms; used for content addressing and
// version guards, not for security.
constexpr std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

inline std::string fnv1a64_hex(std::string_view data) { return to_hex(fnv1a64(data)); }

/// 128-bit content hash (two FNV passes with distinct seeds), hex encoded.
std::string content_hash(std::string_view data);

std::string lowercase(std::string_view s);
std::string trim(std::string_view s);

/// Lowercases, strips punctuation, collapses whitespace. Used to compare
/// free-text value phrases.
std::string normalize_phrase(std::string_view s);

/// Splits a seed into a stream-specific seed so independent shuffles do not
/// correlate.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace solar
