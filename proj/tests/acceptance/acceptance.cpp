// End-to-end acceptance run over the toy artifacts: one PASS/FAIL line per
// criterion, exit status 0 only when all of them pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vw/analysis/probe.hpp"
#include "vw/bench/grid.hpp"
#include "vw/bench/toy_registry.hpp"
#include "vw/core/container.hpp"
#include "vw/core/digest.hpp"
#include "vw/core/error.hpp"
#include "vw/embedding/geometry.hpp"
#include "vw/embedding/transfer.hpp"
#include "vw/tasks/metrics.hpp"
#include "vw/toy/family.hpp"
#include "vw/toy/scene.hpp"

using namespace vw;
using tasks::TaskId;

namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  bench::ArtifactLayout layout;
  fs::path work;
  std::unique_ptr<bench::ToyRegistry> registry;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0 means unbounded
  std::function<Outcome(Context&)> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix randn(int r, int c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

const char* kHoldout = "red triangle";

bench::GridSpec toy_spec(TaskId task, const std::string& concept_name) {
  bench::GridSpec s;
  s.models = {"toy-a"};
  s.train_tasks = {task};
  s.eval_tasks = {task};
  s.datasets = {bench::kToyDataset};
  s.concepts = {concept_name};
  s.deltas = {};
  s.include_unconstrained = true;
  s.init_seeds = 1;
  s.eval_repeats = 2;
  s.train.steps = 300;
  s.train.learning_rate = 1e-2;
  s.train.batch_size = 8;
  s.k = 4;
  return s;
}

// 1 -------------------------------------------------------------------------
Outcome transfer_oracle(Context&) {
  std::mt19937_64 rng(2024);
  double worst_rel = 0, worst_mse = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix y = randn(200, 16, rng);
    const Matrix x = randn(200, 24, rng);
    embedding::AlignedVocabulary av;
    av.source_model_id = "y";
    av.target_model_id = "x";
    av.source = y;
    av.target = x;
    for (int i = 0; i < 200; ++i) av.pairs.push_back({"w" + std::to_string(i), i, i});
    const auto map = embedding::fit_transfer(av);
    const Matrix oracle = testing::normal_equations_oracle(y, x);
    if (map.matrix.rows() != 16 || map.matrix.cols() != 24) return {false, "map has the wrong shape"};
    for (Eigen::Index i = 0; i < oracle.size(); ++i)
      worst_rel = std::max(worst_rel, std::abs(map.matrix.data()[i] - oracle.data()[i]) / std::abs(oracle.data()[i]));
    const double mse = (x - y * oracle).rowwise().squaredNorm().mean();
    worst_mse = std::max(worst_mse, std::abs(map.fit_mse - mse));
  }
  return {worst_rel <= 1e-5 && worst_mse <= 1e-8,
          fmt("20 systems, max entrywise rel err %.2e, max fit_mse diff %.2e", worst_rel, worst_mse)};
}

// 2 -------------------------------------------------------------------------
Outcome clone_control(Context& ctx) {
  std::ostringstream out;
  bool ok = true;
  for (TaskId task : tasks::kAllTasks) {
    bench::GridSpec s = toy_spec(task, kHoldout);
    s.eval_models = {"toy-a", "toy-a-clone"};
    s.init_seeds = 2;
    bench::ResultStore store(ctx.work / "clone" / (std::string(tasks::task_name(task)) + ".jsonl"));
    const auto recs = bench::run_grid(s, *ctx.registry, store);
    double worst = 0, in = 0;
    for (size_t i = 0; i < 2; ++i) {
      const auto& a = recs[i];
      const auto& b = recs[i + 2];
      if (a.status != bench::RunStatus::kOk || b.status != bench::RunStatus::kOk || !b.cell.transferred())
        return {false, std::string(tasks::task_name(task)) + ": " + a.error + b.error};
      worst = std::max(worst, std::abs(a.value - b.value));
      in += a.value / 2;
    }
    ok = ok && worst <= 0.02;
    out << tasks::task_name(task) << fmt(" in-domain %.3f max gap %.4f; ", in, worst);
  }
  return {ok, out.str()};
}

// 3 -------------------------------------------------------------------------
Outcome constraint_soundness(Context& ctx) {
  int runs = 0, steps = 0;
  double worst_excess = -1;
  for (TaskId task : {TaskId::kClassification, TaskId::kDetection}) {
    bench::GridSpec s = toy_spec(task, kHoldout);
    s.concepts = {"red triangle", "green cross"};
    s.deltas = {0.1, 0.2, 0.5, 1.0};
    s.include_unconstrained = false;
    s.init_seeds = 5;
    s.eval_repeats = 1;
    s.train.steps = 100;
    bench::ResultStore store(ctx.work / "soundness" / (std::string(tasks::task_name(task)) + ".jsonl"));
    for (const auto& r : bench::run_grid(s, *ctx.registry, store)) {
      if (r.status != bench::RunStatus::kOk) return {false, "run failed: " + r.error};
      const auto p = learn::load_prompt(ctx.registry->cache_dir() / r.artifacts.at("prompt"));
      if (!p.constraint || p.radius_trace.size() != static_cast<size_t>(s.train.steps))
        return {false, "prompt without a full radius trace"};
      const double delta = *r.cell.delta;
      for (double rad : p.radius_trace) worst_excess = std::max(worst_excess, rad - delta);
      const auto& table = ctx.registry->table(p.model_id);
      for (Eigen::Index i = 0; i < p.vectors.rows(); ++i)
        worst_excess = std::max(
            worst_excess, embedding::normalized_radius(table, p.vectors.row(i).transpose(), p.constraint->anchor) - delta);
      ++runs;
      steps += static_cast<int>(p.radius_trace.size());
    }
  }

  const auto& table = ctx.registry->table("toy-a");
  const auto& words = toy::vocabulary_words();
  const double deltas[] = {0.1, 0.2, 0.5, 1.0};
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n;
  int idempotent = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::string anchor = ctx.registry->family("toy-a").text->token_for(words[static_cast<size_t>(i) % words.size()]);
    const double delta = deltas[i % 4];
    const double spread = (i % 3 == 0 ? 0.02 : 2.0) * embedding::anchor_scale(table, anchor);
    Vector v = table.embedding(anchor);
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += spread * n(rng);
    const Vector once = embedding::project_to_ball(table, v, anchor, delta);
    const Vector twice = embedding::project_to_ball(table, once, anchor, delta);
    idempotent += once == twice;
  }
  return {runs >= 40 && worst_excess <= 1e-6 && idempotent == 1000,
          fmt("%d constrained runs, %d recorded steps, max radius - delta %.2e; idempotent %d/1000", runs, steps,
              worst_excess, idempotent)};
}

// 4 -------------------------------------------------------------------------
Outcome fracturing(Context& ctx) {
  std::ostringstream out;
  int tasks_ok = 0;
  for (TaskId task : tasks::kAllTasks) {
    bench::GridSpec s = toy_spec(task, kHoldout);
    s.deltas = {0.5};
    s.init_seeds = 5;
    s.eval_repeats = 3;
    bench::ResultStore store(ctx.work / "fracturing" / (std::string(tasks::task_name(task)) + ".jsonl"));
    const auto recs = bench::run_grid(s, *ctx.registry, store);
    std::map<int, double> free, bound;
    std::set<std::string> anchors;
    for (const auto& r : recs) {
      if (r.status != bench::RunStatus::kOk) return {false, "run failed: " + r.error};
      (r.cell.delta ? bound : free)[r.cell.seed_index] = r.value;
      if (r.cell.delta) anchors.insert(r.cell.anchor);
    }
    int close = 0;
    double worst = 0, mean_free = 0, mean_bound = 0;
    for (const auto& [seed, u] : free) {
      const double gap = std::abs(bound.at(seed) - u);
      worst = std::max(worst, gap);
      close += gap <= 0.10;
      mean_free += u / 5;
      mean_bound += bound.at(seed) / 5;
    }
    const bool pass = anchors.size() >= 5 && close == static_cast<int>(free.size());
    tasks_ok += pass;
    out << tasks::task_name(task)
        << fmt(" %s (free %.3f, delta 0.5 %.3f, %d/%zu within 0.10, max gap %.3f); ", pass ? "ok" : "no", mean_free,
               mean_bound, close, free.size(), worst);
  }
  return {tasks_ok >= 2, fmt("%d/3 tasks: ", tasks_ok) + out.str()};
}

// 5 -------------------------------------------------------------------------
Outcome metric_oracles(Context&) {
  using tasks::Box;
  using tasks::ScoredBox;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> n_img(1, 3), n_box(0, 5), level(0, 4), corner(0, 6), side(1, 4);
  const auto random_box = [&] {
    const double x = corner(rng), y = corner(rng);
    return Box{x, y, x + side(rng), y + side(rng), {}};
  };
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<ScoredBox>> preds;
    std::vector<std::vector<Box>> gt;
    size_t total = 0;
    for (int i = 0, imgs = n_img(rng); i < imgs; ++i) {
      std::vector<Box> g;
      std::vector<ScoredBox> p;
      const int ng = n_box(rng), np = n_box(rng);
      for (int k = 0; k < ng; ++k) g.push_back(random_box());
      for (int k = 0; k < np; ++k) p.push_back({(!g.empty() && k % 2 == 0) ? g[static_cast<size_t>(k) % g.size()] : random_box(), 0.2 * level(rng)});
      total += g.size();
      gt.push_back(g);
      preds.push_back(p);
    }
    if (total == 0) gt[0].push_back(random_box());
    worst = std::max(worst, std::abs(tasks::mean_average_precision(preds, gt) - testing::brute_force_ap(preds, gt, 0.5)));
  }
  const double fp_first =
      tasks::mean_average_precision({{{Box{5, 5, 7, 7, {}}, 0.9}, {Box{0, 0, 2, 2, {}}, 0.8}}}, {{Box{0, 0, 2, 2, {}}}});
  const double i = tasks::iou(Box{0, 0, 2, 2, {}}, Box{1, 1, 3, 3, {}});
  return {worst <= 1e-9 && fp_first == 0.5 && i == 1.0 / 7.0,
          fmt("50 scenarios max |mAP - oracle| %.1e; FP-above-TP AP %.3f; iou %.17g", worst, fp_first, i)};
}

// 6 -------------------------------------------------------------------------
Outcome gradient_checks(Context& ctx) {
  const auto& a = ctx.registry->family("toy-a");
  const auto& table = a.text->embeddings();
  std::ostringstream out;
  bool ok = true;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 0.3);
  for (TaskId task : tasks::kAllTasks) {
    const auto adapter = ctx.registry->adapter("toy-a", task, bench::kToyDataset, kHoldout);
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
      Matrix x(2, table.dim());
      x.row(0) = table.embedding(a.text->token_for("red")).transpose();
      x.row(1) = table.embedding(a.text->token_for("triangle")).transpose();
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += n(rng);
      const std::vector<int> items = {trial % adapter->train_size(), (trial + 3) % adapter->train_size()};
      const std::uint64_t seed = 500 + static_cast<std::uint64_t>(trial);
      const auto f = [&](ad::Tape& tape, ad::Var v) {
        std::mt19937_64 r(seed);
        return adapter->loss(tape, v, items, r);
      };
      worst = std::max(worst, testing::gradient_error(f, x));
    }
    ok = ok && worst <= 1e-3;
    out << tasks::task_name(task) << fmt(" %.1e; ", worst);
  }
  return {ok, "max relative error over 10 perturbations: " + out.str()};
}

// 7 -------------------------------------------------------------------------
Outcome truncation_identity(Context& ctx) {
  std::ostringstream out;
  bool ok = analysis::evenly_spaced_layers(16, 4) == std::vector<int>{4, 8, 12, 16};
  std::mt19937_64 rng(7);
  for (const char* id : {"toy-a", "toy-b"}) {
    const auto& txt = *ctx.registry->family(id).text;
    const int b = txt.block_count();
    int equal = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const int k = 1 + trial % 4;
      const Matrix v = randn(k, txt.embeddings().dim(), rng);
      const Vector truncated = analysis::truncated_encode(txt, txt.tokenize("a photo of {}", k), v, b);
      const Vector full = tasks::encode_prompt(txt, v, "a photo of {}");
      equal += truncated.size() == full.size() && std::equal(full.data(), full.data() + full.size(), truncated.data());
    }
    ok = ok && equal == 100;
    out << id << fmt(" (B=%d) %d/100 bitwise equal; ", b, equal);
  }
  return {ok, out.str() + "evenly_spaced_layers(16,4) = [4,8,12,16]"};
}

// 8 -------------------------------------------------------------------------
Outcome statistics(Context&) {
  const auto c = bench::aggregate_ci(std::vector<double>(50, 0.42), 0.95, 3);
  bool ok = c.high - c.low == 0.0;
  const double analytic = 2 * 1.96 * 0.1 / std::sqrt(100.0);
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.5, 0.1);
    std::vector<double> draws(100);
    for (double& d : draws) d = n(rng);
    const auto ci = bench::aggregate_ci(draws, 0.95, seed);
    worst = std::max(worst, std::abs((ci.high - ci.low) - analytic) / analytic);
  }
  ok = ok && worst <= 0.2;
  return {ok, fmt("constant width %.1e; N(0.5,0.1) widths within %.1f%% of %.4f over 5 draws", c.high - c.low,
                  100 * worst, analytic)};
}

// 9 -------------------------------------------------------------------------
bool same_tree(const fs::path& a, const fs::path& b, int& files) {
  std::set<fs::path> rel;
  for (const auto& root : {a, b})
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) rel.insert(e.path().lexically_relative(root));
  for (const auto& r : rel) {
    if (!fs::exists(a / r) || !fs::exists(b / r) || io::read_file(a / r) != io::read_file(b / r)) return false;
    ++files;
  }
  return true;
}

Outcome determinism(Context& ctx) {
  std::ostringstream out;
  bool ok = true;

  int traces = 0;
  for (TaskId task : tasks::kAllTasks) {
    const auto adapter = ctx.registry->adapter("toy-a", task, bench::kToyDataset, kHoldout);
    std::string bytes[2];
    for (int round = 0; round < 2; ++round) {
      learn::ConceptSpec cs{kHoldout, bench::kToyDataset, "red", 4};
      learn::TrainConfig tc;
      tc.steps = 40;
      tc.learning_rate = 1e-2;
      tc.seed = 99;
      const auto p = learn::optimize(learn::init_prompt(ctx.registry->table("toy-a"), cs, task, 1e-4, 99), *adapter, tc);
      const fs::path path = ctx.work / "determinism" / fmt("trace_%s_%d.vwc", tasks::task_name(task), round);
      fs::create_directories(path.parent_path());
      learn::save_prompt(path, p);
      bytes[round] = io::read_file(learn::loss_trace_path(path)) + io::read_file(path);
    }
    ok = ok && bytes[0] == bytes[1];
    traces += bytes[0] == bytes[1];
  }
  out << fmt("loss traces %d/3 identical; ", traces);

  toy::ShapesDatasetOptions opts;
  for (int round = 0; round < 2; ++round) toy::generate_shapes_dataset(ctx.work / "determinism" / fmt("data%d", round), opts);
  int files = 0;
  const bool data_same = same_tree(ctx.work / "determinism" / "data0", ctx.work / "determinism" / "data1", files);
  ok = ok && data_same;
  out << fmt("dataset %s over %d files; ", data_same ? "identical" : "differs", files);

  bench::GridSpec s = toy_spec(TaskId::kClassification, kHoldout);
  s.train_tasks = s.eval_tasks = {TaskId::kClassification, TaskId::kDetection};
  s.deltas = {0.5};
  s.init_seeds = 2;
  s.train.steps = 60;
  std::string canon[2];
  int trained = 0;
  for (int round = 0; round < 2; ++round) {
    bench::ToyRegistryOptions ro;
    ro.cache_dir = ctx.work / "determinism" / fmt("cache%d", round);
    bench::ToyRegistry reg(ctx.layout, ro);
    const fs::path store_path = ctx.work / "determinism" / fmt("store%d.jsonl", round);
    bench::ResultStore store(store_path);
    for (const auto& r : bench::run_grid(s, reg, store)) trained += r.training_steps;
    canon[round] = bench::canonical_store_text(store_path);
  }
  int cache_files = 0;
  const bool caches = same_tree(ctx.work / "determinism" / "cache0", ctx.work / "determinism" / "cache1", cache_files);
  ok = ok && canon[0] == canon[1] && caches && !canon[0].empty();
  out << fmt("grid stores %s, caches %s over %d files; ", canon[0] == canon[1] ? "identical" : "differ",
             caches ? "identical" : "differ", cache_files);

  bench::ToyRegistryOptions ro;
  ro.cache_dir = ctx.work / "determinism" / "cache0";
  bench::ToyRegistry reg(ctx.layout, ro);
  bench::ResultStore store(ctx.work / "determinism" / "store0.jsonl");
  const size_t before = store.size();
  int rerun_steps = 0;
  for (const auto& r : bench::run_grid(s, reg, store)) rerun_steps += r.training_steps;
  ok = ok && rerun_steps == 0 && store.size() == before && trained > 0;
  out << fmt("rerun of %zu cells did %d training steps", before, rerun_steps);
  return {ok, out.str()};
}

// 10 ------------------------------------------------------------------------
Outcome dataset_rules(Context& ctx) {
  const auto data = toy::load_shapes_dataset(ctx.layout.data());
  int labels = 0, checked = 0;
  std::string problem;
  for (const auto* m : {&data.pretrain, &data.concepts}) {
    std::map<std::string, std::set<std::string>> train;
    std::set<std::string> all_train;
    for (const auto& e : m->entries)
      if (e.split == datasets::Split::kTrain) train[e.concept_name].insert(e.image_path), all_train.insert(e.image_path);
    for (const auto& e : m->entries) {
      ++checked;
      if (e.boxes.empty()) problem = e.image_path + " has no boxes";
      else if (datasets::class_from_largest_box(e.boxes) != e.class_label) problem = e.image_path + " class label mismatch";
      else ++labels;
      if (e.class_label.empty()) problem = e.image_path + " has no class label";
      if (e.split == datasets::Split::kEval && (train[e.concept_name].count(e.image_path) || all_train.count(e.image_path)))
        problem = e.image_path + " is in both splits";
    }
  }
  const std::string pre = datasets::serialize_manifest(data.pretrain);
  const auto concepts = data.concepts.concepts();
  int holdouts = 0;
  for (const auto& [color, shape] : toy::ShapesDatasetOptions{}.holdout) {
    const std::string name = toy::concept_name(color, shape);
    ++holdouts;
    if (pre.find(name) != std::string::npos) problem = "pretraining split mentions " + name;
    if (data.concepts.select(name, datasets::Split::kTrain).empty() || data.concepts.select(name, datasets::Split::kEval).empty())
      problem = name + " missing from the concept splits";
  }
  return {problem.empty() && checked > 0,
          problem.empty() ? fmt("%d entries, %d largest-box labels, splits disjoint, %d holdouts absent from pretraining",
                                checked, labels, holdouts)
                          : problem};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks over the toy artifacts"};
  std::string root, work;
  std::vector<int> only;
  app.add_option("--root", root, "Artifact root (default $VW_ARTIFACT_ROOT or ./artifacts)");
  app.add_option("--work", work, "Scratch directory, wiped first (default <root>/acceptance)");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.layout.root = root.empty() ? bench::default_artifact_root() : fs::path(root);
  ctx.work = work.empty() ? ctx.layout.root / "acceptance" : fs::path(work);
  fs::remove_all(ctx.work);
  fs::create_directories(ctx.work);
  bench::ToyRegistryOptions ro;
  ro.cache_dir = ctx.work / "cache";
  ctx.registry = std::make_unique<bench::ToyRegistry>(ctx.layout, ro);

  const std::vector<Criterion> criteria = {
      {1, "transfer-map oracle", 5, transfer_oracle},
      {2, "clone positive control", 600, clone_control},
      {3, "constraint soundness", 0, constraint_soundness},
      {4, "fracturing at toy scale", 1800, fracturing},
      {5, "metric oracles", 0, metric_oracles},
      {6, "gradient checks", 0, gradient_checks},
      {7, "truncation identity", 0, truncation_identity},
      {8, "statistics", 0, statistics},
      {9, "determinism and idempotence", 0, determinism},
      {10, "dataset rules", 60, dataset_rules},
  };
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s budget]", c.budget_seconds);
    }
    std::printf("%s %2d %-28s %8.1fs  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
    ++ran;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
