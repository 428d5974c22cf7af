#include "vw/datasets/manifest.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "vw/core/container.hpp"
#include "vw/core/error.hpp"
#include "vw/tasks/metrics.hpp"

#ifndef VW_CONFIG_DIR
#define VW_CONFIG_DIR "config"
#endif

namespace vw::datasets {

using nlohmann::json;

const char* split_name(Split s) { return s == Split::kTrain ? "train" : "eval"; }

std::vector<ManifestEntry> DatasetManifest::select(const std::string& concept_name, Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if ((concept_name.empty() || e.concept_name == concept_name) && e.split == split) out.push_back(e);
  return out;
}

std::vector<std::string> DatasetManifest::concepts() const {
  std::set<std::string> s;
  for (const auto& e : entries) s.insert(e.concept_name);
  return {s.begin(), s.end()};
}

std::string serialize_manifest(const DatasetManifest& m) {
  std::string out;
  for (const auto& e : m.entries) {
    json boxes = json::array(), labels = json::array();
    for (const auto& b : e.boxes) {
      boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
      labels.push_back(b.class_label ? json(*b.class_label) : json(nullptr));
    }
    json line = {{"dataset_id", m.dataset_id}, {"image_path", e.image_path}, {"concept", e.concept_name},
                 {"boxes", boxes},           {"box_labels", labels},       {"class_label", e.class_label},
                 {"split", split_name(e.split)}};
    out += line.dump() + "\n";
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text) {
  DatasetManifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kFormat, "manifest line " + std::to_string(lineno) + ": " + ex.what());
    }
    const std::string id = j.at("dataset_id");
    if (m.entries.empty()) m.dataset_id = id;
    else if (id != m.dataset_id) throw Error(ErrorCode::kFormat, "manifest mixes dataset ids");
    ManifestEntry e;
    e.image_path = j.at("image_path");
    e.concept_name = j.at("concept");
    e.class_label = j.at("class_label");
    const std::string split = j.at("split");
    if (split != "train" && split != "eval") throw Error(ErrorCode::kFormat, "manifest: bad split '" + split + "'");
    e.split = split == "train" ? Split::kTrain : Split::kEval;
    const json& labels = j.value("box_labels", json::array());
    size_t i = 0;
    for (const auto& b : j.at("boxes")) {
      tasks::Box box{b.at(0), b.at(1), b.at(2), b.at(3), std::nullopt};
      if (i < labels.size() && !labels[i].is_null()) box.class_label = labels[i].get<std::string>();
      if (!box.valid()) throw Error(ErrorCode::kFormat, "manifest line " + std::to_string(lineno) + ": degenerate box");
      e.boxes.push_back(box);
      ++i;
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  io::write_file_atomic(path, serialize_manifest(m));
}

DatasetManifest read_manifest(const std::filesystem::path& path) { return parse_manifest(io::read_file(path)); }

std::vector<tasks::Example> load_examples(const std::filesystem::path& root,
                                          const std::vector<ManifestEntry>& entries) {
  std::vector<tasks::Example> out;
  for (const auto& e : entries) out.push_back({e.image_path, read_png(root / e.image_path), e.boxes, e.class_label});
  return out;
}

namespace {

std::vector<size_t> partial_shuffle(size_t n, size_t k, std::uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

std::vector<std::string> sample_concepts(const std::vector<std::string>& class_list, int n, std::uint64_t seed) {
  if (n < 0 || static_cast<size_t>(n) > class_list.size())
    throw Error(ErrorCode::kInvalidInput, "sample_concepts: n exceeds the class list");
  std::vector<std::string> out;
  for (size_t i : partial_shuffle(class_list.size(), static_cast<size_t>(n), seed)) out.push_back(class_list[i]);
  return out;
}

std::vector<ManifestEntry> select_examples(const std::vector<ManifestEntry>& pool, const std::string& concept_name,
                                           int n, std::uint64_t seed) {
  std::vector<const ManifestEntry*> matching;
  for (const auto& e : pool)
    if (e.concept_name == concept_name) matching.push_back(&e);
  if (n < 0 || static_cast<size_t>(n) > matching.size())
    throw Error(ErrorCode::kInsufficientPool, "select_examples: only " + std::to_string(matching.size()) +
                                                  " examples of '" + concept_name + "'");
  std::vector<ManifestEntry> out;
  for (size_t i : partial_shuffle(matching.size(), static_cast<size_t>(n), seed)) out.push_back(*matching[i]);
  return out;
}

std::string class_from_largest_box(const std::vector<tasks::Box>& boxes) {
  if (boxes.empty()) throw Error(ErrorCode::kInvalidInput, "class_from_largest_box: no boxes");
  const tasks::Box* best = nullptr;
  for (const auto& b : boxes) {
    if (!b.class_label) throw Error(ErrorCode::kInvalidInput, "class_from_largest_box: unlabeled box");
    if (!best || b.area() > best->area() || (b.area() == best->area() && *b.class_label < *best->class_label))
      best = &b;
  }
  return *best->class_label;
}

PseudoLabels pseudo_label_boxes(const tasks::DetectionBackend& det, const tasks::TextEncoderBackend& txt,
                                const std::vector<Image>& images, const std::string& concept_name,
                                double score_threshold, const std::string& template_text) {
  const auto pos = template_text.find("{}");
  const std::string caption = pos == std::string::npos
                                  ? concept_name
                                  : template_text.substr(0, pos) + concept_name + template_text.substr(pos + 2);
  const Vector text = tasks::encode_texts(txt, {caption}).row(0).transpose();
  PseudoLabels out;
  for (size_t i = 0; i < images.size(); ++i) {
    std::vector<tasks::Box> kept;
    for (auto& sb : tasks::detect(det, images[i], text)) {
      if (sb.score < score_threshold) continue;
      sb.box.class_label = concept_name;
      kept.push_back(sb.box);
    }
    if (kept.empty()) out.flagged.push_back(static_cast<int>(i));
    out.boxes.push_back(std::move(kept));
  }
  return out;
}

std::map<std::string, ConceptSet> load_concept_sets(const std::filesystem::path& path) {
  const json j = json::parse(io::read_file(path));
  std::map<std::string, ConceptSet> out;
  for (const auto& [id, v] : j.at("datasets").items()) {
    ConceptSet cs;
    cs.concepts = v.at("concepts").get<std::vector<std::string>>();
    cs.anchors = v.at("anchors").get<std::vector<std::string>>();
    cs.init_overrides = v.value("init_overrides", std::map<std::string, std::string>{});
    out.emplace(id, std::move(cs));
  }
  return out;
}

std::filesystem::path default_concept_sets_path() {
  if (const char* dir = std::getenv("VW_CONFIG_DIR")) return std::filesystem::path(dir) / "concept_sets.json";
  return std::filesystem::path(VW_CONFIG_DIR) / "concept_sets.json";
}

}  // namespace vw::datasets
