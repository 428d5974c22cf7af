#include "vw/bench/grid.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "vw/core/container.hpp"
#include "vw/core/digest.hpp"
#include "vw/core/error.hpp"
#include "vw/embedding/alignment.hpp"

namespace vw::bench {

using nlohmann::json;

namespace {

std::vector<tasks::TaskId> parse_tasks(const json& j) {
  std::vector<tasks::TaskId> out;
  for (const auto& t : j) out.push_back(tasks::parse_task(t.get<std::string>()));
  return out;
}

json task_names(const std::vector<tasks::TaskId>& tasks) {
  json out = json::array();
  for (auto t : tasks) out.push_back(tasks::task_name(t));
  return out;
}

json train_json(const learn::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"steps", c.steps},           {"batch_size", c.batch_size},
          {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2}, {"adam_epsilon", c.adam_epsilon}};
}

learn::TrainConfig parse_train(const json& j) {
  learn::TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  return c;
}

json cell_json(const Cell& c) {
  return {{"model", c.model},
          {"eval_model", c.eval_model},
          {"train_task", tasks::task_name(c.train_task)},
          {"eval_task", tasks::task_name(c.eval_task)},
          {"dataset", c.dataset},
          {"concept", c.concept_name},
          {"delta", c.delta ? json(*c.delta) : json(nullptr)},
          {"anchor", c.anchor},
          {"seed_index", c.seed_index},
          {"seed", c.seed}};
}

Cell parse_cell(const json& j) {
  Cell c;
  c.model = j.at("model").get<std::string>();
  c.eval_model = j.at("eval_model").get<std::string>();
  c.train_task = tasks::parse_task(j.at("train_task").get<std::string>());
  c.eval_task = tasks::parse_task(j.at("eval_task").get<std::string>());
  c.dataset = j.at("dataset").get<std::string>();
  c.concept_name = j.at("concept").get<std::string>();
  if (!j.at("delta").is_null()) c.delta = j.at("delta").get<double>();
  c.anchor = j.at("anchor").get<std::string>();
  c.seed_index = j.at("seed_index").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string slug(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-') ch = '_';
  return s;
}

}  // namespace

void GridSpec::validate() const {
  if (models.empty() || train_tasks.empty() || eval_tasks.empty() || datasets.empty() || concepts.empty())
    throw Error(ErrorCode::kInvalidInput, "grid spec: every axis needs at least one value");
  if (deltas.empty() && !include_unconstrained)
    throw Error(ErrorCode::kInvalidInput, "grid spec: no constrained or unconstrained runs");
  for (double d : deltas)
    if (!(d > 0)) throw Error(ErrorCode::kInvalidInput, "grid spec: deltas must be positive");
  if (init_seeds < 1 || eval_repeats < 1) throw Error(ErrorCode::kInvalidInput, "grid spec: trials must be >= 1");
  if (k < 1) throw Error(ErrorCode::kInvalidInput, "grid spec: k must be >= 1");
  train.validate();
}

GridSpec parse_grid_spec(const json& j) {
  GridSpec s;
  s.models = j.at("models").get<std::vector<std::string>>();
  s.eval_models = j.value("eval_models", std::vector<std::string>{});
  s.train_tasks = parse_tasks(j.at("train_tasks"));
  s.eval_tasks = parse_tasks(j.at("eval_tasks"));
  s.datasets = j.at("datasets").get<std::vector<std::string>>();
  s.concepts = j.at("concepts").get<std::vector<std::string>>();
  if (j.contains("deltas")) s.deltas = j.at("deltas").get<std::vector<double>>();
  s.include_unconstrained = j.value("include_unconstrained", true);
  s.anchors = j.value("anchors", std::vector<std::string>{});
  s.init_seeds = j.value("init_seeds", s.init_seeds);
  s.eval_repeats = j.value("eval_repeats", s.eval_repeats);
  s.base_seed = j.value("base_seed", s.base_seed);
  if (j.contains("train")) s.train = parse_train(j.at("train"));
  s.k = j.value("k", s.k);
  s.validate();
  return s;
}

json grid_spec_json(const GridSpec& s) {
  return {{"models", s.models},         {"eval_models", s.eval_models},
          {"train_tasks", task_names(s.train_tasks)},
          {"eval_tasks", task_names(s.eval_tasks)},
          {"datasets", s.datasets},     {"concepts", s.concepts},
          {"deltas", s.deltas},         {"include_unconstrained", s.include_unconstrained},
          {"anchors", s.anchors},       {"init_seeds", s.init_seeds},
          {"eval_repeats", s.eval_repeats}, {"base_seed", s.base_seed},
          {"train", train_json(s.train)}, {"k", s.k}};
}

GridSpec load_grid_spec(const std::filesystem::path& path) {
  try {
    return parse_grid_spec(json::parse(io::read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

std::string Cell::key() const {
  json j = cell_json(*this);
  j.erase("seed");
  j.erase("seed_index");
  return j.dump();
}

std::vector<Cell> enumerate_cells(const GridSpec& spec) {
  spec.validate();
  std::vector<std::optional<double>> deltas;
  if (spec.include_unconstrained) deltas.push_back(std::nullopt);
  for (double d : spec.deltas) deltas.push_back(d);

  std::vector<Cell> cells;
  for (const auto& model : spec.models) {
    const std::vector<std::string> evals = spec.eval_models.empty() ? std::vector<std::string>{model} : spec.eval_models;
    for (const auto& eval_model : evals)
      for (auto train_task : spec.train_tasks)
        for (auto eval_task : spec.eval_tasks)
          for (const auto& dataset : spec.datasets)
            for (const auto& concept_name : spec.concepts)
              for (const auto& delta : deltas)
                for (int s = 0; s < spec.init_seeds; ++s) {
                  Cell c{model, eval_model, train_task, eval_task, dataset, concept_name, delta, "", s, 0};
                  if (delta && !spec.anchors.empty()) c.anchor = spec.anchors[s % spec.anchors.size()];
                  // The seed ignores eval coordinates so every eval of one
                  // training run shares its prompt.
                  c.seed = derive_seed(spec.base_seed, model + "|" + tasks::task_name(train_task) + "|" + dataset +
                                                           "|" + concept_name + "|" + std::to_string(s));
                  cells.push_back(std::move(c));
                }
  }
  return cells;
}

const char* metric_name(tasks::TaskId task) {
  switch (task) {
    case tasks::TaskId::kGeneration: return "generation_accuracy";
    case tasks::TaskId::kDetection: return "map50";
    case tasks::TaskId::kClassification: return "classification_accuracy";
  }
  return "?";
}

json record_json(const RunRecord& r) {
  return {{"cell", cell_json(r.cell)},
          {"digest", r.digest},
          {"metric", r.metric_name},
          {"value", r.value},
          {"repeats", r.repeats},
          {"artifacts", r.artifacts},
          {"status", r.status == RunStatus::kOk ? "ok" : "failed"},
          {"error", r.error},
          {"wall_seconds", r.wall_seconds}};
}

RunRecord parse_record(const json& j) {
  RunRecord r;
  r.cell = parse_cell(j.at("cell"));
  r.digest = j.at("digest").get<std::string>();
  r.metric_name = j.at("metric").get<std::string>();
  r.value = j.at("value").get<double>();
  r.repeats = j.at("repeats").get<std::vector<double>>();
  r.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  r.status = j.at("status").get<std::string>() == "ok" ? RunStatus::kOk : RunStatus::kFailed;
  r.error = j.at("error").get<std::string>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

ResultStore::ResultStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  std::string text = io::read_file(path_);
  const auto last_newline = text.rfind('\n');
  const size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete != text.size()) {
    // Drop the torn tail so the next append starts on a fresh line.
    text.resize(complete);
    io::write_file_atomic(path_, text);
  }
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RunRecord r;
    try {
      r = parse_record(json::parse(line));
    } catch (const std::exception&) {
      continue;
    }
    if (index_.count(r.digest)) continue;
    index_[r.digest] = records_.size();
    records_.push_back(std::move(r));
  }
}

std::optional<RunRecord> ResultStore::find(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(digest);
  if (it == index_.end()) return std::nullopt;
  return records_[it->second];
}

bool ResultStore::append(const RunRecord& record) {
  std::lock_guard lock(mutex_);
  if (index_.count(record.digest)) return false;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const std::string line = record_json(record).dump() + "\n";
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot open " + path_.string());
  size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      ::close(fd);
      throw Error(ErrorCode::kIo, "write failed on " + path_.string());
    }
    written += static_cast<size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  index_[record.digest] = records_.size();
  records_.push_back(record);
  return true;
}

std::vector<RunRecord> ResultStore::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

size_t ResultStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string canonical_store_text(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    j.erase("wall_seconds");
    out += j.dump() + "\n";
  }
  return out;
}

std::string cell_digest(const Cell& cell, const GridSpec& spec, const Registry& registry) {
  json j = {{"cell", cell_json(cell)},
            {"train", train_json(spec.train)},
            {"k", spec.k},
            {"eval_repeats", spec.eval_repeats},
            {"model_fp", registry.fingerprint(cell.model)},
            {"eval_fp", registry.fingerprint(cell.eval_model)}};
  return hex_digest(j.dump());
}

namespace {

// Prompts depend on the training coordinates only, so evals on other tasks
// or models reuse them.
std::filesystem::path prompt_path(const Cell& cell, const GridSpec& spec, const Registry& registry) {
  json j = {{"model", cell.model},
            {"task", tasks::task_name(cell.train_task)},
            {"dataset", cell.dataset},
            {"concept", cell.concept_name},
            {"delta", cell.delta ? json(*cell.delta) : json(nullptr)},
            {"anchor", cell.anchor},
            {"seed", cell.seed},
            {"train", train_json(spec.train)},
            {"k", spec.k},
            {"fp", registry.fingerprint(cell.model)}};
  const std::string name = slug(cell.model) + "_" + tasks::task_name(cell.train_task) + "_" + slug(cell.concept_name) +
                           "_" + hex_digest(j.dump()) + ".vwc";
  return registry.cache_dir() / "prompts" / name;
}

embedding::TransferMap resolve_map(const std::string& src, const std::string& dst, const Registry& registry,
                                   std::filesystem::path& where) {
  const std::string tag = hex_digest(registry.fingerprint(src) + "|" + registry.fingerprint(dst));
  where = registry.cache_dir() / "maps" / (slug(src) + "__" + slug(dst) + "_" + tag + ".vwc");
  if (std::filesystem::exists(where)) return embedding::load_transfer_map(where);
  const auto vocab = embedding::align_vocabularies(registry.table(src), registry.table(dst));
  embedding::TransferMap map = embedding::fit_transfer(vocab);
  std::filesystem::create_directories(where.parent_path());
  embedding::save_transfer_map(where, map);
  return embedding::load_transfer_map(where);
}

}  // namespace

RunRecord run_cell(Cell cell, const GridSpec& spec, const Registry& registry, ResultStore& store) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.metric_name = metric_name(cell.eval_task);

  try {
    if (cell.delta && cell.anchor.empty()) {
      const auto anchors = registry.anchors(cell.dataset);
      if (anchors.empty()) throw Error(ErrorCode::kNotFound, "no anchor words for dataset " + cell.dataset);
      cell.anchor = anchors[static_cast<size_t>(cell.seed_index) % anchors.size()];
    }
    rec.cell = cell;
    rec.digest = cell_digest(cell, spec, registry);
    if (auto hit = store.find(rec.digest)) {
      hit->training_steps = 0;
      return *hit;
    }

    const std::filesystem::path ppath = prompt_path(cell, spec, registry);
    learn::SoftPrompt prompt;
    if (std::filesystem::exists(ppath)) {
      prompt = learn::load_prompt(ppath);
    } else {
      const auto& table = registry.table(cell.model);
      learn::ConceptSpec cs{cell.concept_name, cell.dataset, "", spec.k};
      cs.init_word = cell.delta ? cell.anchor
                                : learn::select_init_word(cell.concept_name, table, registry.init_overrides(cell.dataset));
      learn::SoftPrompt init = learn::init_prompt(table, cs, cell.train_task, 1e-4, cell.seed);
      if (cell.delta) init.constraint = learn::make_constraint(table, cell.anchor, *cell.delta);
      const auto train = registry.adapter(cell.model, cell.train_task, cell.dataset, cell.concept_name);
      learn::TrainConfig tc = spec.train;
      tc.seed = cell.seed;
      prompt = learn::optimize(std::move(init), *train, tc);
      rec.training_steps = tc.steps;
      std::filesystem::create_directories(ppath.parent_path());
      learn::save_prompt(ppath, prompt);
      prompt = learn::load_prompt(ppath);
    }
    rec.artifacts["prompt"] = ppath.lexically_relative(registry.cache_dir()).generic_string();

    Matrix vectors = prompt.vectors;
    if (cell.transferred()) {
      std::filesystem::path mpath;
      const auto map = resolve_map(cell.model, cell.eval_model, registry, mpath);
      rec.artifacts["transfer_map"] = mpath.lexically_relative(registry.cache_dir()).generic_string();
      vectors = embedding::apply_transfer(map, vectors);
    }
    const auto eval = registry.adapter(cell.eval_model, cell.eval_task, cell.dataset, cell.concept_name);
    double sum = 0;
    for (int r = 0; r < spec.eval_repeats; ++r) {
      std::mt19937_64 rng(derive_seed(cell.seed, "eval" + std::to_string(r)));
      const double v = eval->metric(vectors, rng);
      rec.repeats.push_back(v);
      sum += v;
    }
    rec.value = sum / spec.eval_repeats;
  } catch (const std::exception& e) {
    rec.cell = cell;
    if (rec.digest.empty()) rec.digest = hex_digest(cell.key() + std::to_string(cell.seed));
    rec.status = RunStatus::kFailed;
    rec.error = e.what();
    rec.repeats.clear();
    rec.value = 0.0;
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  store.append(rec);
  return rec;
}

std::vector<RunRecord> run_grid(const GridSpec& spec, const Registry& registry, ResultStore& store,
                                const GridOptions& options) {
  const std::vector<Cell> cells = enumerate_cells(spec);
  std::vector<RunRecord> out(cells.size());
  std::atomic<size_t> next{0}, done{0};
  std::mutex report_mutex;
  auto worker = [&] {
    for (size_t i = next++; i < cells.size(); i = next++) {
      out[i] = run_cell(cells[i], spec, registry, store);
      const size_t d = ++done;
      if (options.on_record) {
        std::lock_guard lock(report_mutex);
        options.on_record(out[i], d, cells.size());
      }
    }
  };
  const int n = std::max(1, options.workers);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return out;
}

}  // namespace vw::bench
