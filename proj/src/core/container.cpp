#include "vw/core/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vw/core/error.hpp"

namespace vw::io {

namespace {

constexpr char kMagic[4] = {'V', 'W', 'C', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f32(std::string& out, double value) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

const Matrix& Container::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw Error(ErrorCode::kNotFound, "tensor '" + name + "' not in container");
}

bool Container::has_tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

void write_container(const std::filesystem::path& path, nlohmann::json header,
                     const std::vector<NamedTensor>& tensors) {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    index.push_back({{"name", t.name},
                     {"rows", t.value.rows()},
                     {"cols", t.value.cols()},
                     {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.value.size());
  }
  header["tensors"] = std::move(index);
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 4);
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) put_f32(out, t.value(i, j));
    }
  }
  write_file_atomic(path, out);
}

Container read_container(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kFormat, path.string() + ": not a container file");
  }
  const std::uint64_t header_len = get_u64(p + 4);
  if (12 + header_len > bytes.size()) {
    throw Error(ErrorCode::kFormat, path.string() + ": truncated header");
  }
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": bad header json: " + e.what());
  }
  const size_t payload = 12 + header_len;
  const size_t n_floats = (bytes.size() - payload) / 4;
  for (const auto& entry : c.header.at("tensors")) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto offset = entry.at("offset").get<size_t>();
    if (offset + static_cast<size_t>(rows * cols) > n_floats) {
      throw Error(ErrorCode::kFormat, path.string() + ": truncated payload");
    }
    NamedTensor t{entry.at("name").get<std::string>(), Matrix(rows, cols)};
    const unsigned char* src = p + payload + offset * 4;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        t.value(i, j) = get_f32(src);
        src += 4;
      }
    }
    c.tensors.push_back(std::move(t));
  }
  return c;
}

Matrix round_to_float(const Matrix& m) {
  return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace vw::io
