#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "vw/core/container.hpp"
#include "vw/core/error.hpp"
#include "vw/embedding/alignment.hpp"
#include "vw/embedding/transfer.hpp"
#include "vw/learn/prompt.hpp"
#include "vw/toy/family.hpp"
#include "vw/toy/pipeline.hpp"

using namespace vw;
using namespace vw::toy;
using datasets::Split;

namespace {

const std::filesystem::path& small_root() {
  static const std::filesystem::path root = [] {
    const auto dir = std::filesystem::temp_directory_path() / "vw_toy_small";
    std::filesystem::remove_all(dir);
    ShapesDatasetOptions o;
    o.seed = 21;
    o.n_train = 96;
    o.n_eval = 24;
    o.concept_train_per = 8;
    o.concept_eval_per = 4;
    generate_shapes_dataset(dir, o);
    return dir;
  }();
  return root;
}

const ShapesDataset& small_data() {
  static const ShapesDataset d = load_shapes_dataset(small_root());
  return d;
}

const ToyFamily& family_a() {
  static const ToyFamily f = init_family(Variant::kA);
  return f;
}

std::vector<const datasets::ManifestEntry*> all_entries(const ShapesDataset& d) {
  std::vector<const datasets::ManifestEntry*> out;
  for (const auto& e : d.pretrain.entries) out.push_back(&e);
  for (const auto& e : d.concepts.entries) out.push_back(&e);
  return out;
}

// Bounding box of the non-black pixels inside `region`.
tasks::Box ink_box(const Image& img, const tasks::Box& region) {
  int x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
  for (int y = static_cast<int>(region.y_min); y < static_cast<int>(region.y_max); ++y)
    for (int x = static_cast<int>(region.x_min); x < static_cast<int>(region.x_max); ++x) {
      const auto* p = img.at(x, y);
      if (p[0] || p[1] || p[2]) x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
    }
  return {double(x0), double(y0), double(x1 + 1), double(y1 + 1), {}};
}

Vector pooled(const tasks::TextEncoderBackend& txt, const std::string& text) {
  return tasks::encode_texts(txt, {text}).row(0).transpose();
}

}  // namespace

TEST_CASE("rendered objects fill their boxes to within a pixel") {
  std::mt19937_64 rng(4);
  for (const auto& shape : kShapes)
    for (int size : {8, 12, 16}) {
      const auto mask = shape_mask(shape, size);
      REQUIRE(mask.size() == static_cast<size_t>(size * size));
      for (int trial = 0; trial < 5; ++trial) {
        std::uniform_int_distribution<int> pos(0, 32 - size);
        const double x = pos(rng), y = pos(rng);
        ShapeScene scene;
        scene.objects.push_back({shape, kColors[static_cast<size_t>(trial) % kColors.size()], {x, y, x + size, y + size, {}}});
        const Image img = render_scene(scene);
        const tasks::Box ink = ink_box(img, {0, 0, 32, 32, {}});
        const tasks::Box& box = scene.objects[0].box;
        CHECK(std::abs(ink.x_min - box.x_min) <= 1);
        CHECK(std::abs(ink.y_min - box.y_min) <= 1);
        CHECK(std::abs(ink.x_max - box.x_max) <= 1);
        CHECK(std::abs(ink.y_max - box.y_max) <= 1);
      }
    }
  CHECK_THROWS_AS(shape_mask("hexagon", 8), Error);
}

TEST_CASE("generated dataset is deterministic") {
  const auto dir = std::filesystem::temp_directory_path() / "vw_toy_again";
  std::filesystem::remove_all(dir);
  ShapesDatasetOptions o;
  o.seed = 21;
  o.n_train = 96;
  o.n_eval = 24;
  o.concept_train_per = 8;
  o.concept_eval_per = 4;
  const ShapesDataset again = generate_shapes_dataset(dir, o);
  CHECK(io::read_file(dir / kPretrainManifest) == io::read_file(small_root() / kPretrainManifest));
  CHECK(io::read_file(dir / kConceptManifest) == io::read_file(small_root() / kConceptManifest));
  for (size_t i = 0; i < again.concepts.entries.size(); i += 37) {
    const auto& p = again.concepts.entries[i].image_path;
    CHECK(io::read_file(dir / p) == io::read_file(small_root() / p));
  }
}

TEST_CASE("dataset scenes, labels, splits and holdouts") {
  const ShapesDataset& d = small_data();
  const ShapesDatasetOptions defaults;
  std::set<std::string> holdout;
  for (const auto& [c, s] : defaults.holdout) holdout.insert(concept_name(c, s));
  CHECK(held_in_concepts(defaults.holdout).size() == all_concepts().size() - holdout.size());

  // Holdout-caption hygiene, at string level over the serialized split.
  const std::string pre = datasets::serialize_manifest(d.pretrain);
  for (const auto& h : holdout) CHECK(pre.find(h) == std::string::npos);
  CHECK(d.pretrain.select("", Split::kTrain).size() == 96);
  CHECK(d.pretrain.select("", Split::kEval).size() == 24);

  const auto concepts = d.concepts.concepts();
  CHECK(concepts.size() == all_concepts().size());
  for (const auto& h : holdout) CHECK(std::count(concepts.begin(), concepts.end(), h) == 1);

  for (const auto* manifest : {&d.pretrain, &d.concepts}) {
    for (const auto& name : manifest->concepts()) {
      std::set<std::string> train;
      for (const auto& e : manifest->select(name, Split::kTrain)) train.insert(e.image_path);
      for (const auto& e : manifest->select(name, Split::kEval)) CHECK(train.count(e.image_path) == 0);
    }
  }
  for (const auto& name : concepts) {
    CHECK(d.concepts.select(name, Split::kTrain).size() == 8);
    CHECK(d.concepts.select(name, Split::kEval).size() == 4);
  }

  for (const auto* e : all_entries(d)) {
    REQUIRE(!e->boxes.empty());
    CHECK(e->boxes.size() <= 3);
    CHECK(e->class_label == datasets::class_from_largest_box(e->boxes));
    for (size_t i = 0; i < e->boxes.size(); ++i) {
      const auto& b = e->boxes[i];
      CHECK(b.x_min >= 0);
      CHECK(b.y_min >= 0);
      CHECK(b.x_max <= 32);
      CHECK(b.y_max <= 32);
      for (size_t j = i + 1; j < e->boxes.size(); ++j) CHECK(tasks::iou(b, e->boxes[j]) == 0.0);
    }
  }
}

TEST_CASE("every dataset box has an anchor at IoU 0.5") {
  const auto& det = *family_a().detector;
  for (const auto* e : all_entries(small_data()))
    for (const auto& b : e->boxes) {
      double best = 0;
      for (const auto& a : det.anchors()) best = std::max(best, tasks::iou(a, b));
      CHECK(best >= 0.5);
    }
}

TEST_CASE("denoiser schedule invariants") {
  const auto& s = family_a().denoiser->schedule();
  REQUIRE(s.n_steps() == 50);
  for (int t = 0; t < 50; ++t) {
    CHECK(s.alpha_bar[t] > 0);
    CHECK(s.alpha_bar[t] <= 1);
    if (t) CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
  }
}

TEST_CASE("injecting a word's embedding encodes like the word") {
  const ToyFamily b = init_family(Variant::kB);
  const ToyFamily clone = make_clone(family_a(), 8);
  for (const ToyFamily* f : {&family_a(), &b, &clone}) {
    const auto& txt = *f->text;
    CHECK(txt.block_count() == f->config.text.blocks);
    for (const auto& word : vocabulary_words()) {
      const Matrix e = txt.embeddings().embedding(txt.token_for(word)).transpose();
      const Vector injected = tasks::encode_prompt(txt, e, "a photo of {}");
      const Vector plain = pooled(txt, "a photo of " + word);
      CHECK((injected - plain).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("clone is functionally identical and exactly linearly related") {
  const ToyFamily& a = family_a();
  const ToyFamily c = make_clone(a, 8);
  CHECK(c.model_id == a.model_id + "-clone");
  CHECK(c.text->model_id() == c.model_id);
  double worst = 0;
  for (const auto& word : vocabulary_words())
    worst = std::max(worst, (pooled(*a.text, word) - pooled(*c.text, word)).cwiseAbs().maxCoeff());
  CHECK(worst <= 1e-4);
  CHECK((a.text->embeddings().matrix() - c.text->embeddings().matrix()).cwiseAbs().maxCoeff() > 1e-2);

  const auto vocab = embedding::align_vocabularies(a.text->embeddings(), c.text->embeddings());
  CHECK(vocab.pairs.size() >= vocabulary_words().size());
  const auto map = embedding::fit_transfer(vocab);
  CHECK(map.fit_mse <= 1e-8);
  CHECK_FALSE(map.rank_deficient);

  const Image img = render_scene({32, 32, {{"circle", "red", {8, 8, 24, 24, {}}}}});
  CHECK((a.classifier->embed_image(img) - c.classifier->embed_image(img)).norm() == 0.0);
  CHECK(make_clone(a, 8).text->embeddings().matrix() == c.text->embeddings().matrix());
  CHECK_THROWS_AS(make_clone(a, 8, 1.0), Error);
}

TEST_CASE("family checkpoints round trip") {
  ToyFamily a = init_family(Variant::kA, 3);
  a.report.held_in_accuracy = 0.93;
  a.config.denoiser.guidance = 2.5;
  a.denoiser = std::make_shared<ToyDenoiser>(a.model_id, a.config.denoiser, a.denoiser->params());
  const auto path = std::filesystem::temp_directory_path() / "vw_family_rt.vwc";
  save_family(path, a);
  const ToyFamily back = load_family(path);
  CHECK(back.model_id == a.model_id);
  CHECK(back.fingerprint() == a.fingerprint());
  CHECK(back.denoiser->guidance_scale() == 2.5);
  CHECK(back.report.held_in_accuracy == 0.93);
  CHECK(init_family(Variant::kA, 3).fingerprint() != init_family(Variant::kA).fingerprint());
  CHECK(init_family(Variant::kB).config.text.dim != a.config.text.dim);
  const ToyFamily j = init_family(Variant::kJudge);
  CHECK(j.detector == nullptr);
  CHECK(j.denoiser == nullptr);
}

TEST_CASE("task losses match finite differences on toy backends") {
  const ToyFamily& a = family_a();
  const ToyFamily judge = init_family(Variant::kJudge);
  const auto data = concept_data(small_root(), small_data().concepts, "red triangle",
                                 {"red triangle", "green cross", "blue circle"}, 4, 2);
  tasks::AdapterOptions opts;
  opts.negatives_per_batch = 3;
  const auto& table = a.text->embeddings();
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 0.3);
  for (const auto task : tasks::kAllTasks) {
    const auto adapter = make_adapter(task, a, judge, data, opts);
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
      Matrix x(2, table.dim());
      x.row(0) = table.embedding(a.text->token_for("red")).transpose();
      x.row(1) = table.embedding(a.text->token_for("triangle")).transpose();
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += n(rng);
      const std::vector<int> items = {trial % 4, (trial + 1) % 4};
      const std::uint64_t loss_seed = 100 + static_cast<std::uint64_t>(trial);
      const auto f = [&](ad::Tape& tape, ad::Var v) {
        std::mt19937_64 r(loss_seed);
        return adapter->loss(tape, v, items, r);
      };
      worst = std::max(worst, testing::gradient_error(f, x));
    }
    INFO(tasks::task_name(task));
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("prompt training leaves every backend weight untouched") {
  const ToyFamily& a = family_a();
  const auto data = concept_data(small_root(), small_data().concepts, "green cross", {"green cross", "red circle"}, 4, 1);
  const std::string before = a.fingerprint();
  for (const auto task : tasks::kAllTasks) {
    const auto adapter = make_adapter(task, a, a, data);
    learn::ConceptSpec cs{"green cross", "toy-shapes", "green", 2};
    learn::TrainConfig tc;
    tc.steps = 3;
    tc.batch_size = 2;
    tc.learning_rate = 1e-2;
    const auto p = learn::optimize(learn::init_prompt(a.text->embeddings(), cs, task), *adapter, tc);
    CHECK(p.loss_trace.size() == 3);
  }
  CHECK(a.fingerprint() == before);
}

TEST_CASE("concept data assembles train, eval, negatives and distractors") {
  const auto d = concept_data(small_root(), small_data().concepts, "blue circle", {"blue circle", "red cross", "cyan square"}, 5, 9);
  CHECK(d->name == "blue circle");
  CHECK(d->train.size() == 5);
  CHECK(d->eval.size() == 4);
  CHECK(d->negatives.size() == 16);
  CHECK(d->distractors.size() == 8);
  for (const auto& e : d->train) CHECK(e.label == "blue circle");
  for (const auto& e : d->negatives) CHECK(e.label != "blue circle");
  const auto again = concept_data(small_root(), small_data().concepts, "blue circle", {"blue circle", "red cross", "cyan square"}, 5, 9);
  for (size_t i = 0; i < d->train.size(); ++i) CHECK(d->train[i].path == again->train[i].path);
  CHECK_THROWS_AS(concept_data(small_root(), small_data().concepts, "blue circle", {"blue circle"}, 9, 9), Error);
}
