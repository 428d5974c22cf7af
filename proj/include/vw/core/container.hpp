#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "vw/core/types.hpp"

namespace vw::io {

// Layout on disk:
//   bytes [0, 4)   magic "VWC1"
//   bytes [4, 12)  header length H, unsigned 64-bit little-endian
//   bytes [12, 12 + H)  UTF-8 JSON header
//   remainder      float32 little-endian payload, tensors back to back in
//                  row-major order
// The header always carries a "tensors" array of {name, rows, cols, offset}
// where offset counts floats from the start of the payload.

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct Container {
  nlohmann::json header;
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, nlohmann::json header,
                     const std::vector<NamedTensor>& tensors);
Container read_container(const std::filesystem::path& path);

/// Rounds every entry to the nearest float32, matching a save/load cycle.
Matrix round_to_float(const Matrix& m);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace vw::io
