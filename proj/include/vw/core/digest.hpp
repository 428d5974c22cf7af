#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vw {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// 16 hex characters of the FNV-1a hash of `bytes`.
std::string hex_digest(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Mixes a base seed with a string key into a well-spread 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);

}  // namespace vw
