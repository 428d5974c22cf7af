#include "vw/core/digest.hpp"

#include <cstdio>

namespace vw {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string hex_digest(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

std::uint64_t derive_seed(std::uint64_t base, std::string_view key) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = fnv1a64(key) ^ (base + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace vw
