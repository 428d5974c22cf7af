#include "vw/embedding/table.hpp"

#include "vw/core/container.hpp"
#include "vw/core/error.hpp"

namespace vw::embedding {

EmbeddingTable::EmbeddingTable(std::string model_id, std::vector<std::string> tokens,
                               Matrix matrix, std::set<std::string> special_tokens)
    : model_id_(std::move(model_id)),
      tokens_(std::move(tokens)),
      matrix_(std::move(matrix)),
      special_(std::move(special_tokens)) {
  if (matrix_.rows() != static_cast<Eigen::Index>(tokens_.size())) {
    throw Error(ErrorCode::kInvalidInput, "embedding table: row count differs from vocab size");
  }
  if (matrix_.cols() < 1) throw Error(ErrorCode::kInvalidInput, "embedding table: dimension < 1");
  if (!matrix_.allFinite()) throw Error(ErrorCode::kInvalidInput, "embedding table: non-finite entry");
  vocab_.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!vocab_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kInvalidInput, "embedding table: duplicate token '" + tokens_[i] + "'");
    }
  }
  for (const auto& s : special_) {
    if (!vocab_.count(s)) {
      throw Error(ErrorCode::kInvalidInput, "embedding table: special token '" + s + "' not in vocab");
    }
  }
}

std::optional<int> EmbeddingTable::find(std::string_view token) const {
  auto it = vocab_.find(std::string(token));
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

int EmbeddingTable::index(std::string_view token) const {
  auto i = find(token);
  if (!i) throw Error(ErrorCode::kNotFound, "token '" + std::string(token) + "' not in " + model_id_);
  return *i;
}

bool EmbeddingTable::is_special(std::string_view token) const {
  return special_.count(std::string(token)) > 0;
}

EmbeddingTable EmbeddingTable::with_matrix(Matrix matrix, std::string model_id) const {
  return EmbeddingTable(std::move(model_id), tokens_, std::move(matrix), special_);
}

void save_table(const std::filesystem::path& path, const EmbeddingTable& table) {
  nlohmann::json header = {
      {"kind", "embedding_table"},
      {"model_id", table.model_id()},
      {"n", table.size()},
      {"d", table.dim()},
      {"special_tokens", table.special_tokens()},
      {"tokens", table.tokens()},
  };
  io::write_container(path, std::move(header), {{"matrix", table.matrix()}});
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  const io::Container c = io::read_container(path);
  const auto& h = c.header;
  auto tokens = h.at("tokens").get<std::vector<std::string>>();
  if (static_cast<int>(tokens.size()) != h.at("n").get<int>()) {
    throw Error(ErrorCode::kFormat, path.string() + ": token count differs from n");
  }
  const Matrix& m = c.tensor("matrix");
  if (m.cols() != h.at("d").get<int>()) throw Error(ErrorCode::kFormat, path.string() + ": bad d");
  return EmbeddingTable(h.at("model_id").get<std::string>(), std::move(tokens), m,
                        h.at("special_tokens").get<std::set<std::string>>());
}

}  // namespace vw::embedding
