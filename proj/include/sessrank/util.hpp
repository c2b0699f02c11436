#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sessrank::util {

// FNV-1a 64-bit hash, used to derive independent per-item RNG streams
// from a base seed and a stable string key.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string join(std::span<const std::string> parts, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

// Fixed-point rendering used by TSV outputs so files are byte-stable.
std::string format_fixed(double value, int digits);

// Shortest round-trip rendering for doubles (%.17g trimmed via retry).
std::string format_double(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace sessrank::util
