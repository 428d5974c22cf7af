#include "vw/embedding/alignment.hpp"

#include <algorithm>
#include <map>

#include "vw/core/error.hpp"

namespace vw::embedding {

namespace {

bool strip_prefix(std::string& s, std::string_view prefix) {
  if (s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0) {
    s.erase(0, prefix.size());
    return true;
  }
  return false;
}

bool strip_suffix(std::string& s, std::string_view suffix) {
  if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    s.erase(s.size() - suffix.size());
    return true;
  }
  return false;
}

// normalized form -> row, with -1 marking an ambiguous form
std::map<std::string, int> normalized_index(const EmbeddingTable& t, NormalizeRule rule) {
  std::map<std::string, int> out;
  for (int i = 0; i < t.size(); ++i) {
    const std::string& tok = t.tokens()[i];
    if (t.is_special(tok)) continue;
    std::string key = normalize_token(tok, rule);
    if (key.empty()) continue;
    auto [it, inserted] = out.emplace(std::move(key), i);
    if (!inserted) it->second = -1;
  }
  return out;
}

}  // namespace

std::string normalize_token(std::string_view token, NormalizeRule rule) {
  std::string s(token);
  if (rule == NormalizeRule::kExact) return s;
  strip_prefix(s, "\xE2\x96\x81");  // U+2581 sentencepiece boundary
  strip_prefix(s, "\xC4\xA0");      // U+0120 byte-level BPE space
  strip_prefix(s, "##");
  strip_suffix(s, "</w>");
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
  });
  return s;
}

AlignedVocabulary align_vocabularies(const EmbeddingTable& source, const EmbeddingTable& target,
                                     const AlignOptions& options) {
  const auto src = normalized_index(source, options.rule);
  const auto dst = normalized_index(target, options.rule);
  AlignedVocabulary av;
  av.source_model_id = source.model_id();
  av.target_model_id = target.model_id();
  for (const auto& [key, row] : src) {  // std::map iterates in sorted key order
    if (row < 0) continue;
    auto it = dst.find(key);
    if (it == dst.end() || it->second < 0) continue;
    av.pairs.push_back({key, row, it->second});
  }
  const int needed = std::max(source.dim(), target.dim()) + 1;
  if (options.require_fit_size && av.size() < needed) {
    throw Error(ErrorCode::kAlignmentTooSmall, std::to_string(av.size()) + " shared tokens, need " +
                                                   std::to_string(needed));
  }
  av.source.resize(av.size(), source.dim());
  av.target.resize(av.size(), target.dim());
  for (int i = 0; i < av.size(); ++i) {
    av.source.row(i) = source.matrix().row(av.pairs[i].source_row);
    av.target.row(i) = target.matrix().row(av.pairs[i].target_row);
  }
  return av;
}

}  // namespace vw::embedding
