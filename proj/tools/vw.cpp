// Command-line front end over the toy model suite and the experiment grid.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "vw/analysis/probe.hpp"
#include "vw/bench/grid.hpp"
#include "vw/bench/toy_registry.hpp"
#include "vw/core/container.hpp"
#include "vw/core/digest.hpp"
#include "vw/core/error.hpp"
#include "vw/embedding/alignment.hpp"
#include "vw/toy/family.hpp"
#include "vw/toy/scene.hpp"

using namespace vw;

namespace {

struct Common {
  std::string root;
  std::uint64_t seed = 0;
  bool keep = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--root", c.root, "Artifact root (default $VW_ARTIFACT_ROOT or ./artifacts)");
  cmd->add_option("--seed", c.seed, "Random seed");
}

bench::ArtifactLayout layout_of(const Common& c) {
  return {c.root.empty() ? bench::default_artifact_root() : std::filesystem::path(c.root)};
}

std::string slug(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-') ch = '_';
  return s;
}

int cmd_gen_data(const Common& c) {
  const auto layout = layout_of(c);
  if (c.keep && std::filesystem::exists(layout.data() / toy::kConceptManifest)) {
    std::printf("kept the dataset under %s\n", layout.data().c_str());
    return 0;
  }
  toy::ShapesDatasetOptions opts;
  opts.seed = c.seed;
  const auto d = toy::generate_shapes_dataset(layout.data(), opts);
  std::printf("wrote %zu pretraining and %zu concept entries under %s\n", d.pretrain.entries.size(),
              d.concepts.entries.size(), layout.data().c_str());
  return 0;
}

struct PretrainArgs {
  std::vector<std::string> variants = {"a", "b", "judge"};
  std::vector<std::string> clones = {"a"};
  toy::PretrainConfig config;
};

int cmd_pretrain(const Common& c, PretrainArgs& a) {
  const auto layout = layout_of(c);
  const auto data = toy::load_shapes_dataset(layout.data());
  std::filesystem::create_directories(layout.models());
  a.config.seed_offset = c.seed;
  a.config.on_step = [](const std::string& stage, int step, double loss) {
    if (step % 250 == 0) std::fprintf(stderr, "  %s step %d loss %.4f\n", stage.c_str(), step, loss);
  };
  std::map<std::string, toy::ToyFamily> trained;
  for (const auto& v : a.variants) {
    const toy::Variant variant = toy::parse_variant(v);
    if (c.keep && std::filesystem::exists(layout.model(toy::variant_config(variant).text.model_id))) {
      std::printf("kept %s\n", toy::variant_config(variant).text.model_id.c_str());
      continue;
    }
    std::fprintf(stderr, "pretraining %s\n", toy::variant_name(variant).c_str());
    toy::ToyFamily f = toy::pretrain_family(variant, layout.data(), data, a.config);
    const auto& r = f.report;
    std::printf("%s: held-in accuracy %.3f, holdout zero-shot %.3f (chance %.3f), detector mAP %.3f, denoiser loss %.4f\n",
                f.model_id.c_str(), r.held_in_accuracy, r.holdout_zero_shot_accuracy, r.holdout_chance, r.detector_map,
                r.denoiser_loss);
    toy::save_family(layout.model(f.model_id), f);
    trained.emplace(v, std::move(f));
  }
  for (const auto& v : a.clones) {
    auto it = trained.find(v);
    toy::ToyFamily base = it != trained.end()
                              ? it->second
                              : toy::load_family(layout.model(toy::variant_config(toy::parse_variant(v)).text.model_id));
    if (c.keep && it == trained.end() && std::filesystem::exists(layout.model(base.model_id + "-clone"))) continue;
    toy::ToyFamily clone = toy::make_clone(base, derive_seed(c.seed, "clone|" + base.model_id));
    toy::save_family(layout.model(clone.model_id), clone);
    std::printf("%s: linear reparameterization of %s\n", clone.model_id.c_str(), base.model_id.c_str());
  }
  return 0;
}

int cmd_fit_transfer(const Common& c, const std::string& src, const std::string& dst, std::string out, double ridge) {
  bench::ToyRegistry reg(layout_of(c));
  const auto vocab = embedding::align_vocabularies(reg.table(src), reg.table(dst));
  const auto map = embedding::fit_transfer(vocab, {ridge});
  if (out.empty()) out = (reg.layout().root / "maps" / (slug(src) + "__" + slug(dst) + ".vwc")).string();
  std::filesystem::create_directories(std::filesystem::path(out).parent_path());
  embedding::save_transfer_map(out, map);
  std::printf("%s -> %s: %d shared words, fit mse %.3e%s\nwrote %s\n", src.c_str(), dst.c_str(), map.n_fit_words,
              map.fit_mse, map.rank_deficient ? " (rank deficient)" : "", out.c_str());
  return 0;
}

struct LearnArgs {
  std::string model, task, concept_name, anchor, out, dataset = bench::kToyDataset;
  double delta = 0.0;
  int k = 4;
  learn::TrainConfig train;
};

int cmd_learn(const Common& c, LearnArgs& a) {
  bench::ToyRegistry reg(layout_of(c));
  const tasks::TaskId task = tasks::parse_task(a.task);
  const auto& table = reg.table(a.model);
  const bool constrained = a.delta > 0;
  if (constrained && a.anchor.empty()) throw Error(ErrorCode::kInvalidInput, "--delta needs --anchor");
  learn::ConceptSpec spec{a.concept_name, a.dataset, "", a.k};
  spec.init_word = constrained ? a.anchor
                               : learn::select_init_word(a.concept_name, table, reg.init_overrides(a.dataset));
  learn::SoftPrompt prompt = learn::init_prompt(table, spec, task, 1e-4, c.seed);
  if (constrained) prompt.constraint = learn::make_constraint(table, a.anchor, a.delta);
  const auto adapter = reg.adapter(a.model, task, a.dataset, a.concept_name);
  a.train.seed = c.seed;
  const int every = std::max(1, a.train.steps / 10);
  learn::OptimizeHooks hooks;
  hooks.on_step = [&](int step, double loss, const Matrix&) {
    if (step % every == 0) std::fprintf(stderr, "  step %d loss %.5f\n", step, loss);
  };
  prompt = learn::optimize(std::move(prompt), *adapter, a.train, hooks);
  if (a.out.empty()) {
    std::string name = slug(a.model) + "_" + a.task + "_" + slug(a.concept_name);
    if (constrained) name += "_" + slug(a.anchor) + "_d" + std::to_string(a.delta);
    a.out = (reg.layout().root / "prompts" / (name + "_s" + std::to_string(c.seed) + ".vwc")).string();
  }
  std::filesystem::create_directories(std::filesystem::path(a.out).parent_path());
  learn::save_prompt(a.out, prompt);
  std::mt19937_64 rng(derive_seed(c.seed, "eval"));
  const double metric = adapter->metric(learn::load_prompt(a.out).vectors, rng);
  std::printf("final loss %.5f, %s %.4f\nwrote %s\n", prompt.loss_trace.empty() ? 0.0 : prompt.loss_trace.back().loss,
              bench::metric_name(task), metric, a.out.c_str());
  return 0;
}

int cmd_transfer(const std::string& prompt_path, const std::string& map_path, std::string out) {
  learn::SoftPrompt p = learn::load_prompt(prompt_path);
  const auto map = embedding::load_transfer_map(map_path);
  if (map.source_model_id != p.model_id)
    throw Error(ErrorCode::kModelMismatch, "prompt is on '" + p.model_id + "' but the map starts at '" +
                                               map.source_model_id + "'");
  p.vectors = embedding::apply_transfer(map, p.vectors);
  p.model_id = map.target_model_id;
  // A transferred prompt keeps its spec but is no longer tied to the anchor ball.
  p.constraint.reset();
  p.radius_trace.clear();
  if (out.empty()) {
    std::filesystem::path in(prompt_path);
    out = (in.parent_path() / (in.stem().string() + "__" + slug(map.target_model_id) + ".vwc")).string();
  }
  learn::save_prompt(out, p);
  std::printf("wrote %s (%s)\n", out.c_str(), p.model_id.c_str());
  return 0;
}

int cmd_eval(const Common& c, const std::string& prompt_path, const std::string& task_name, int repeats) {
  bench::ToyRegistry reg(layout_of(c));
  const learn::SoftPrompt p = learn::load_prompt(prompt_path);
  const tasks::TaskId task = tasks::parse_task(task_name);
  const auto adapter = reg.adapter(p.model_id, task, p.spec.dataset_id, p.spec.concept_name);
  std::vector<double> values;
  for (int r = 0; r < repeats; ++r) {
    std::mt19937_64 rng(derive_seed(c.seed, "eval" + std::to_string(r)));
    values.push_back(adapter->metric(p.vectors, rng));
    std::printf("repeat %d: %s %.4f\n", r, bench::metric_name(task), values.back());
  }
  if (values.size() >= 2) {
    const auto ci = bench::aggregate_ci(values, 0.95, c.seed);
    std::printf("mean %.4f, 95%% CI [%.4f, %.4f]\n", ci.mean, ci.low, ci.high);
  }
  return 0;
}

int cmd_grid(const Common& c, const std::string& spec_path, std::string store_path, std::string report_dir,
             int workers) {
  bench::GridSpec spec = bench::load_grid_spec(spec_path);
  spec.base_seed ^= c.seed;
  bench::ToyRegistry reg(layout_of(c));
  if (store_path.empty()) store_path = (reg.layout().root / "results" / (std::filesystem::path(spec_path).stem().string() + ".jsonl")).string();
  bench::ResultStore store(store_path);
  bench::GridOptions opts;
  opts.workers = workers;
  int steps = 0, failed = 0;
  opts.on_record = [&](const bench::RunRecord& r, size_t done, size_t total) {
    steps += r.training_steps;
    if (r.status != bench::RunStatus::kOk) ++failed;
    std::fprintf(stderr, "[%zu/%zu] %s %s:%s -> %s:%s %s %s = %.4f%s\n", done, total, r.cell.concept_name.c_str(),
                 r.cell.model.c_str(), tasks::task_name(r.cell.train_task), r.cell.eval_model.c_str(),
                 tasks::task_name(r.cell.eval_task), r.cell.delta ? ("delta " + std::to_string(*r.cell.delta)).c_str() : "free",
                 r.cell.anchor.c_str(), r.value, r.status == bench::RunStatus::kOk ? "" : (" FAILED: " + r.error).c_str());
  };
  const auto records = bench::run_grid(spec, reg, store, opts);
  std::printf("%zu cells, %d training steps run, %d failed\nstore %s\n", records.size(), steps, failed,
              store_path.c_str());
  if (!report_dir.empty()) {
    const auto files = bench::emit_report(records, report_dir, spec.base_seed);
    std::printf("report %s\n", files.matrix_csv.parent_path().c_str());
  }
  return 0;
}

int cmd_probe(const Common& c, const std::string& prompt_path, int n_layers, int samples, std::string csv_out,
              std::string trace_out) {
  bench::ToyRegistry reg(layout_of(c));
  const learn::SoftPrompt p = learn::load_prompt(prompt_path);
  if (!p.constraint) throw Error(ErrorCode::kInvalidInput, "probe-layers needs a constrained prompt");
  const auto& fam = reg.family(p.model_id);
  if (!fam.denoiser) throw Error(ErrorCode::kInvalidInput, p.model_id + " has no denoiser");
  const auto& judge = reg.family(bench::kJudgeModel);
  const std::string anchor = p.constraint->anchor;
  std::vector<std::string> labels = toy::all_concepts();
  labels.push_back(anchor);
  const auto layers = analysis::evenly_spaced_layers(fam.text->block_count(), n_layers);
  std::mt19937_64 rng(c.seed);
  analysis::ProbeOptions opts;
  opts.samples_per_layer = samples;
  const auto report = analysis::truncated_generation_probe(*fam.denoiser, *fam.text, p.vectors,
                                                           analysis::make_sample_judge(judge.judge(), labels), anchor,
                                                           p.spec.concept_name, layers, rng, opts);
  const std::string csv = analysis::probe_csv(report);
  std::fputs(csv.c_str(), stdout);
  if (report.transition_layer) std::printf("transition layer %d\n", *report.transition_layer);
  else std::printf("no transition layer\n");
  std::filesystem::path in(prompt_path);
  if (csv_out.empty()) csv_out = (in.parent_path() / (in.stem().string() + "_probe.csv")).string();
  io::write_file_atomic(csv_out, csv);
  if (trace_out.empty()) trace_out = (in.parent_path() / (in.stem().string() + "_trace.vwc")).string();
  analysis::save_trace(trace_out, analysis::capture_activations(*fam.text, p.vectors, opts.template_text, layers,
                                                                in.stem().string(), anchor, p.spec.concept_name));
  std::printf("wrote %s and %s\n", csv_out.c_str(), trace_out.c_str());
  return 0;
}

int cmd_report(const Common& c, const std::string& store_path, std::string out) {
  bench::ResultStore store(store_path);
  if (out.empty()) out = (std::filesystem::path(store_path).parent_path() / (std::filesystem::path(store_path).stem().string() + "_report")).string();
  const auto files = bench::emit_report(store.records(), out, c.seed);
  std::printf("%s\n%s\n%s\n%s\n%s\n", files.matrix_csv.c_str(), files.delta_csv.c_str(), files.efficiency_csv.c_str(),
              files.matrix_svg.c_str(), files.delta_svg.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft-prompt transfer experiments on a desk-scale multimodal model suite"};
  app.require_subcommand(1);

  Common gen_c, pre_c, fit_c, learn_c, tr_c, eval_c, grid_c, probe_c, rep_c;

  auto* gen = app.add_subcommand("gen-data", "Render the toy shapes dataset");
  add_common(gen, gen_c);
  gen->add_flag("--keep-existing", gen_c.keep, "Do nothing when the dataset is already there");

  PretrainArgs pa;
  auto* pre = app.add_subcommand("pretrain", "Train the toy families and their clones");
  add_common(pre, pre_c);
  pre->add_option("--variants", pa.variants, "Families to train (a, b, judge)");
  pre->add_option("--clones", pa.clones, "Families to clone after training");
  pre->add_option("--classifier-steps", pa.config.classifier_steps);
  pre->add_option("--detector-steps", pa.config.detector_steps);
  pre->add_option("--denoiser-steps", pa.config.denoiser_steps);
  pre->add_option("--min-accuracy", pa.config.min_accuracy, "Held-in accuracy bar");
  pre->add_flag("--keep-existing", pre_c.keep, "Skip families whose checkpoint exists");

  std::string fit_src, fit_dst, fit_out;
  double ridge = 0.0;
  auto* fit = app.add_subcommand("fit-transfer", "Fit the linear map between two models' embeddings");
  add_common(fit, fit_c);
  fit->add_option("src", fit_src)->required();
  fit->add_option("dst", fit_dst)->required();
  fit->add_option("--out", fit_out);
  fit->add_option("--ridge", ridge);

  LearnArgs la;
  la.train.learning_rate = 1e-2;
  la.train.steps = 300;
  auto* lrn = app.add_subcommand("learn", "Train a soft prompt for one concept on one task");
  add_common(lrn, learn_c);
  lrn->add_option("model", la.model)->required();
  lrn->add_option("task", la.task)->required()->check(CLI::IsMember({"generation", "detection", "classification"}));
  lrn->add_option("concept", la.concept_name)->required();
  lrn->add_option("--delta", la.delta, "Normalized radius of the anchor ball");
  lrn->add_option("--anchor", la.anchor, "Anchor word for constrained runs");
  lrn->add_option("--dataset", la.dataset);
  lrn->add_option("--k", la.k, "Number of prompt vectors");
  lrn->add_option("--steps", la.train.steps);
  lrn->add_option("--lr", la.train.learning_rate);
  lrn->add_option("--batch", la.train.batch_size);
  lrn->add_option("--out", la.out);

  std::string tr_prompt, tr_map, tr_out;
  auto* tr = app.add_subcommand("transfer", "Map a prompt into another model's embedding space");
  add_common(tr, tr_c);
  tr->add_option("prompt", tr_prompt)->required();
  tr->add_option("map", tr_map)->required();
  tr->add_option("--out", tr_out);

  std::string ev_prompt, ev_task;
  int repeats = 1;
  auto* ev = app.add_subcommand("eval", "Score a prompt on a task of its model");
  add_common(ev, eval_c);
  ev->add_option("prompt", ev_prompt)->required();
  ev->add_option("task", ev_task)->required()->check(CLI::IsMember({"generation", "detection", "classification"}));
  ev->add_option("--repeats", repeats)->check(CLI::PositiveNumber);

  std::string grid_spec, grid_store, grid_report;
  int workers = 1;
  auto* grid = app.add_subcommand("grid", "Run every cell of a grid spec");
  add_common(grid, grid_c);
  grid->add_option("spec", grid_spec)->required()->check(CLI::ExistingFile);
  grid->add_option("--store", grid_store, "Results JSONL (default <root>/results/<spec>.jsonl)");
  grid->add_option("--report", grid_report, "Also write a report to this directory");
  grid->add_option("--workers", workers)->check(CLI::PositiveNumber);

  std::string pr_prompt, pr_csv, pr_trace;
  int pr_layers = 4, pr_samples = 32;
  auto* probe = app.add_subcommand("probe-layers", "Generate from truncated text encoders of a constrained prompt");
  add_common(probe, probe_c);
  probe->add_option("prompt", pr_prompt)->required();
  probe->add_option("--layers", pr_layers, "Number of evenly spaced depths");
  probe->add_option("--samples", pr_samples, "Samples per depth");
  probe->add_option("--csv", pr_csv);
  probe->add_option("--trace", pr_trace);

  std::string rep_store, rep_out;
  auto* rep = app.add_subcommand("report", "Aggregate a results store into tables and plots");
  add_common(rep, rep_c);
  rep->add_option("store", rep_store)->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_data(gen_c);
    if (*pre) return cmd_pretrain(pre_c, pa);
    if (*fit) return cmd_fit_transfer(fit_c, fit_src, fit_dst, fit_out, ridge);
    if (*lrn) return cmd_learn(learn_c, la);
    if (*tr) return cmd_transfer(tr_prompt, tr_map, tr_out);
    if (*ev) return cmd_eval(eval_c, ev_prompt, ev_task, repeats);
    if (*grid) return cmd_grid(grid_c, grid_spec, grid_store, grid_report, workers);
    if (*probe) return cmd_probe(probe_c, pr_prompt, pr_layers, pr_samples, pr_csv, pr_trace);
    if (*rep) return cmd_report(rep_c, rep_store, rep_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", error_code_name(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
