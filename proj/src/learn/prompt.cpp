#include "vw/learn/prompt.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vw/ad/tape.hpp"
#include "vw/core/container.hpp"
#include "vw/core/digest.hpp"
#include "vw/core/error.hpp"
#include "vw/embedding/alignment.hpp"
#include "vw/embedding/geometry.hpp"
#include "vw/optim/adam.hpp"

namespace vw::learn {

using nlohmann::json;

void ConceptSpec::validate(const embedding::EmbeddingTable& table) const {
  if (k < 1) throw Error(ErrorCode::kInvalidInput, "concept spec: k must be at least 1");
  if (!table.contains(init_word))
    throw Error(ErrorCode::kNotFound, "init word '" + init_word + "' is not a token of " + table.model_id());
}

ConstraintSpec make_constraint(const embedding::EmbeddingTable& table, const std::string& anchor,
                               double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidInput, "constraint: delta must be positive");
  return {anchor, delta, delta * embedding::anchor_scale(table, anchor)};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0 && batch_size > 0 && steps >= 0 && adam_beta1 > 0 && adam_beta2 > 0 &&
        adam_epsilon > 0 && adam_beta1 < 1 && adam_beta2 < 1))
    throw Error(ErrorCode::kInvalidInput, "train config: invalid hyperparameters");
}

std::string TrainConfig::digest() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "lr=%.17g;steps=%d;batch=%d;b1=%.17g;b2=%.17g;eps=%.17g;seed=%llu",
                learning_rate, steps, batch_size, adam_beta1, adam_beta2, adam_epsilon,
                static_cast<unsigned long long>(seed));
  return hex_digest(buf);
}

std::vector<std::string> vocabulary_tokens(const std::string& name, const embedding::EmbeddingTable& table) {
  const auto rule = embedding::NormalizeRule::kStripMarkerLowercase;
  std::map<std::string, std::string> by_form;
  for (const auto& tok : table.tokens()) {
    if (table.is_special(tok)) continue;
    by_form.emplace(embedding::normalize_token(tok, rule), tok);
  }
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (auto it = by_form.find(embedding::normalize_token(word, rule)); it != by_form.end())
      out.push_back(it->second);
    word.clear();
  };
  for (char c : name) {
    if (c == ' ' || c == '_' || c == '-') flush();
    else word += c;
  }
  flush();
  return out;
}

std::string select_init_word(const std::string& concept_name, const embedding::EmbeddingTable& table,
                             const TokenOverrides& overrides) {
  const auto tokens = vocabulary_tokens(concept_name, table);
  if (tokens.size() == 1) return tokens[0];
  if (auto it = overrides.find(concept_name); it != overrides.end()) {
    const auto over = vocabulary_tokens(it->second, table);
    if (over.size() != 1)
      throw Error(ErrorCode::kNotFound, "override '" + it->second + "' is not a single token");
    return over[0];
  }
  if (tokens.empty()) throw Error(ErrorCode::kNotFound, "'" + concept_name + "' yields no tokens");
  return tokens[0];
}

SoftPrompt init_prompt(const embedding::EmbeddingTable& table, const ConceptSpec& spec,
                       tasks::TaskId task, double jitter_sigma, std::uint64_t seed) {
  spec.validate(table);
  if (jitter_sigma < 0) throw Error(ErrorCode::kInvalidInput, "init_prompt: negative jitter");
  SoftPrompt p;
  p.spec = spec;
  p.model_id = table.model_id();
  p.task_id = task;
  p.vectors = table.embedding(spec.init_word).transpose().replicate(spec.k, 1);
  if (jitter_sigma > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, jitter_sigma);
    for (Eigen::Index i = 0; i < p.vectors.size(); ++i) p.vectors.data()[i] += normal(rng);
  }
  return p;
}

std::vector<int> draw_minibatch(int pool, int batch_size, std::mt19937_64& rng) {
  if (pool < 1) throw Error(ErrorCode::kInvalidInput, "minibatch: empty training set");
  std::vector<int> out;
  if (pool >= batch_size) {
    std::vector<int> idx(pool);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < batch_size; ++i) {
      std::uniform_int_distribution<int> pick(i, pool - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(idx[i]);
    }
  } else {
    std::uniform_int_distribution<int> pick(0, pool - 1);
    for (int i = 0; i < batch_size; ++i) out.push_back(pick(rng));
  }
  return out;
}

SoftPrompt optimize(SoftPrompt prompt, const tasks::TaskAdapter& adapter, const TrainConfig& config,
                    const OptimizeHooks& hooks) {
  config.validate();
  if (adapter.task() != prompt.task_id)
    throw Error(ErrorCode::kInvalidInput, std::string("optimize: adapter task ") + tasks::task_name(adapter.task()) +
                                             " does not match prompt task " + tasks::task_name(prompt.task_id));
  if (adapter.model_id() != prompt.model_id)
    throw Error(ErrorCode::kModelMismatch, "optimize: adapter model '" + adapter.model_id() +
                                               "' does not match prompt model '" + prompt.model_id + "'");
  if (!prompt.vectors.allFinite()) throw Error(ErrorCode::kInvalidInput, "optimize: non-finite prompt");
  prompt.config_digest = config.digest();

  std::optional<embedding::AnchorBall> ball;
  if (prompt.constraint) {
    const auto& c = *prompt.constraint;
    ball.emplace(adapter.text().embeddings(), c.anchor, c.delta);
    prompt.constraint->cached_cap = ball->radius();
  }

  optim::Adam adam({config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon});
  std::mt19937_64 rng(config.seed);
  for (int step = 0; step < config.steps; ++step) {
    const std::vector<int> batch = draw_minibatch(adapter.train_size(), config.batch_size, rng);
    ad::Tape tape;
    ad::Var v = tape.variable(prompt.vectors);
    ad::Var loss = adapter.loss(tape, v, batch, rng);
    const double value = loss.scalar();
    if (!std::isfinite(value)) throw DivergedError(step, value);
    tape.backward(loss);
    const Matrix& grad = v.grad();
    if (!grad.allFinite()) throw DivergedError(step, value);
    adam.update("vectors", prompt.vectors, grad);
    if (ball) {
      prompt.vectors = ball->project_rows(prompt.vectors);
      double worst = 0;
      for (Eigen::Index i = 0; i < prompt.vectors.rows(); ++i)
        worst = std::max(worst, ball->normalized_radius(prompt.vectors.row(i).transpose()));
      prompt.radius_trace.push_back(worst);
    }
    prompt.loss_trace.push_back({step, value});
    if (hooks.on_step) hooks.on_step(step, value, prompt.vectors);
  }
  return prompt;
}

std::filesystem::path loss_trace_path(const std::filesystem::path& prompt_path) {
  auto p = prompt_path;
  p += ".loss.csv";
  return p;
}

namespace {

json constraint_json(const std::optional<ConstraintSpec>& c) {
  if (!c) return nullptr;
  return {{"anchor", c->anchor}, {"delta", c->delta}, {"cached_cap", c->cached_cap}};
}

}  // namespace

void save_prompt(const std::filesystem::path& path, const SoftPrompt& p) {
  json h = {
      {"kind", "soft_prompt"},
      {"concept",
       {{"concept_name", p.spec.concept_name},
        {"dataset_id", p.spec.dataset_id},
        {"init_word", p.spec.init_word},
        {"k", p.spec.k}}},
      {"model_id", p.model_id},
      {"task_id", tasks::task_name(p.task_id)},
      {"constraint", constraint_json(p.constraint)},
      {"config_digest", p.config_digest},
      {"radius_trace", p.radius_trace},
  };
  io::write_container(path, h, {{"vectors", p.vectors}});
  std::ostringstream csv;
  csv << "step,loss\n";
  char buf[64];
  for (const auto& lp : p.loss_trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", lp.step, lp.loss);
    csv << buf;
  }
  io::write_file_atomic(loss_trace_path(path), csv.str());
}

SoftPrompt load_prompt(const std::filesystem::path& path) {
  const io::Container c = io::read_container(path);
  const json& h = c.header;
  if (h.value("kind", "") != "soft_prompt") throw Error(ErrorCode::kFormat, path.string() + " is not a soft prompt");
  SoftPrompt p;
  const json& cj = h.at("concept");
  p.spec = {cj.at("concept_name"), cj.at("dataset_id"), cj.at("init_word"), cj.at("k")};
  p.model_id = h.at("model_id");
  p.task_id = tasks::parse_task(h.at("task_id").get<std::string>());
  if (!h.at("constraint").is_null()) {
    const json& k = h.at("constraint");
    p.constraint = ConstraintSpec{k.at("anchor"), k.at("delta"), k.at("cached_cap")};
  }
  p.config_digest = h.value("config_digest", "");
  p.radius_trace = h.value("radius_trace", std::vector<double>{});
  p.vectors = c.tensor("vectors");
  const auto trace = loss_trace_path(path);
  if (std::filesystem::exists(trace)) {
    std::istringstream in(io::read_file(trace));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      p.loss_trace.push_back({std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    }
  }
  return p;
}

double evaluate_transferred(const tasks::TaskAdapter& train, const tasks::TaskAdapter& eval,
                            const embedding::TransferMap& map, const SoftPrompt& prompt,
                            std::mt19937_64& rng) {
  return tasks::evaluate_transferred(train, eval, map, prompt.model_id, prompt.vectors, rng);
}

}  // namespace vw::learn
