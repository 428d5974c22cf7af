#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "test_doubles.hpp"
#include "vw/analysis/probe.hpp"
#include "vw/core/error.hpp"
#include "vw/tasks/metrics.hpp"
#include "vw/toy/family.hpp"

using namespace vw;
using namespace vw::analysis;

namespace {

toy::ToyTextEncoder random_encoder(toy::Variant v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return toy::ToyTextEncoder(toy::variant_config(v).text, rng);
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// White when the condition matches `reference`, black otherwise.
class MatchGenerator : public testing::CannedGenerator {
 public:
  explicit MatchGenerator(Vector reference) : CannedGenerator({testing::solid(0, 0, 0)}), ref_(std::move(reference)) {}
  std::vector<Image> sample(const Matrix& cond, std::mt19937_64&) const override {
    std::vector<Image> out;
    for (Eigen::Index i = 0; i < cond.rows(); ++i) {
      const bool match = (cond.row(i).transpose() - ref_).norm() < 1e-12;
      out.push_back(match ? testing::solid(255, 255, 255) : testing::solid(0, 0, 0));
    }
    return out;
  }

 private:
  Vector ref_;
};

}  // namespace

TEST_CASE("evenly spaced layers") {
  CHECK(evenly_spaced_layers(16, 4) == std::vector<int>{4, 8, 12, 16});
  CHECK(evenly_spaced_layers(4, 4) == std::vector<int>{1, 2, 3, 4});
  CHECK(evenly_spaced_layers(6, 4) == std::vector<int>{1, 3, 4, 6});
  CHECK_THROWS_AS(evenly_spaced_layers(4, 5), Error);
  CHECK_THROWS_AS(evenly_spaced_layers(4, 0), Error);
  for (int b = 1; b <= 20; ++b)
    for (int n = 1; n <= b; ++n) {
      const auto l = evenly_spaced_layers(b, n);
      REQUIRE(l.size() == static_cast<size_t>(n));
      CHECK(l.back() == b);
      CHECK(l.front() >= 1);
      CHECK(std::adjacent_find(l.begin(), l.end(), std::greater_equal<int>()) == l.end());
    }
}

TEST_CASE("truncated encode at full depth equals the standard encode bitwise") {
  for (auto v : {toy::Variant::kA, toy::Variant::kB}) {
    const auto txt = random_encoder(v, 17);
    const int b = txt.block_count();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const int k = 1 + trial % 4;
      const Matrix vectors = random_matrix(k, txt.embeddings().dim(), rng);
      const auto seq = txt.tokenize("a photo of {}", k);
      const Vector truncated = truncated_encode(txt, seq, vectors, b);
      const Vector full = tasks::encode_prompt(txt, vectors, "a photo of {}");
      REQUIRE(truncated.size() == full.size());
      CHECK(std::equal(truncated.data(), truncated.data() + truncated.size(), full.data()));
      if (trial < 5) CHECK((truncated_encode(txt, seq, vectors, b - 1) - full).norm() > 1e-6);
    }
    CHECK_THROWS_AS(truncated_encode(txt, txt.tokenize("red circle"), Matrix(), 0), Error);
    CHECK_THROWS_AS(truncated_encode(txt, txt.tokenize("red circle"), Matrix(), b + 1), Error);
  }
}

TEST_CASE("captured activations equal the truncated encodes") {
  const auto txt = random_encoder(toy::Variant::kB, 3);
  std::mt19937_64 rng(11);
  const Matrix vectors = random_matrix(2, txt.embeddings().dim(), rng);
  const auto layers = evenly_spaced_layers(txt.block_count(), 4);
  const ActivationTrace trace = capture_activations(txt, vectors, "a photo of {}", layers, "p", "harp", "red triangle");
  const auto seq = txt.tokenize("a photo of {}", 2);
  for (size_t i = 0; i < layers.size(); ++i) {
    const Vector t = truncated_encode(txt, seq, vectors, layers[i]);
    CHECK((trace.features.row(static_cast<Eigen::Index>(i)).transpose() - t).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(capture_activations(txt, vectors, "a photo of {}", {3, 2}), Error);
  CHECK_THROWS_AS(capture_activations(txt, vectors, "a photo of {}", {txt.block_count() + 1}), Error);

  const auto path = std::filesystem::temp_directory_path() / "vw_trace_test.vwc";
  save_trace(path, trace);
  const ActivationTrace back = load_trace(path);
  CHECK(back.model_id == trace.model_id);
  CHECK(back.layer_indices == trace.layer_indices);
  CHECK(back.anchor == "harp");
  CHECK(back.target == "red triangle");
  CHECK((back.features - trace.features).cwiseAbs().maxCoeff() < 1e-6);
  std::filesystem::remove(path);
}

TEST_CASE("probe report and transition layer with judge doubles") {
  const auto txt = random_encoder(toy::Variant::kA, 9);
  std::mt19937_64 rng(2);
  const Matrix vectors = random_matrix(1, txt.embeddings().dim(), rng);
  const int b = txt.block_count();
  const auto layers = evenly_spaced_layers(b, b);
  ProbeOptions opts;
  opts.samples_per_layer = 4;

  MatchGenerator gen(tasks::encode_prompt(txt, vectors, "a photo of {}"));
  const SampleJudge always_anchor = [](const Image&) { return std::string("harp"); };
  auto r = truncated_generation_probe(gen, txt, vectors, always_anchor, "harp", "red triangle", layers, rng, opts);
  CHECK_FALSE(r.transition_layer.has_value());
  CHECK(r.layers.size() == layers.size());
  for (const auto& f : r.layers) CHECK(f.anchor == 1.0);

  // Only the full-depth feature produces white images, judged as the target.
  const SampleJudge by_color = [](const Image& im) { return std::string(im.at(0, 0)[0] > 128 ? "red triangle" : "harp"); };
  r = truncated_generation_probe(gen, txt, vectors, by_color, "harp", "red triangle", layers, rng, opts);
  REQUIRE(r.transition_layer.has_value());
  CHECK(*r.transition_layer == b);
  CHECK(r.layers.back().target == 1.0);
  CHECK(r.layers.front().anchor == 1.0);

  const SampleJudge neither = [](const Image&) { return std::string("blue circle"); };
  r = truncated_generation_probe(gen, txt, vectors, neither, "harp", "red triangle", {b}, rng, opts);
  CHECK(r.layers[0].other == 1.0);
  CHECK(probe_csv(r) == "layer,anchor_fraction,target_fraction,other_fraction\n" + std::to_string(b) +
                             ",0.000000,0.000000,1.000000\n");
  CHECK_THROWS_AS(truncated_generation_probe(gen, txt, vectors, neither, "", "red triangle", {b}, rng, opts), Error);
}

TEST_CASE("probe fractions match a per-sample re-judging loop on toy backends") {
  toy::FamilyConfig fc = toy::variant_config(toy::Variant::kA);
  std::mt19937_64 init(21);
  toy::ToyTextEncoder txt(fc.text, init);
  toy::ToyDenoiser gen(fc.text.model_id, fc.denoiser, init);
  toy::ToyClassifier cls(fc.text.model_id, fc.classifier, init);
  const tasks::Judge judge{&cls, &txt, "a photo of {}"};
  std::vector<std::string> labels = toy::all_concepts();
  labels.push_back("harp");
  std::mt19937_64 r0(4);
  const Matrix vectors = random_matrix(2, txt.embeddings().dim(), r0, 0.3);
  const std::vector<int> layers = {1, 2, 4};
  ProbeOptions opts;
  opts.samples_per_layer = 6;

  std::mt19937_64 rng(77);
  const auto report = truncated_generation_probe(gen, txt, vectors, make_sample_judge(judge, labels), "harp",
                                                 "red triangle", layers, rng, opts);

  std::mt19937_64 replay(77);
  const auto seq = txt.tokenize("a photo of {}", 2);
  for (size_t i = 0; i < layers.size(); ++i) {
    const Vector f = truncated_encode(txt, seq, vectors, layers[i]);
    const auto images = gen.sample(f.transpose().replicate(opts.samples_per_layer, 1), replay);
    int anchor = 0, target = 0;
    for (const Image& im : images) {
      const std::string label = labels[tasks::judge_images(judge, {im}, labels).front()];
      anchor += label == "harp";
      target += label == "red triangle";
    }
    CHECK(report.layers[i].layer == layers[i]);
    CHECK(report.layers[i].anchor == doctest::Approx(anchor / 6.0));
    CHECK(report.layers[i].target == doctest::Approx(target / 6.0));
    CHECK(report.layers[i].anchor + report.layers[i].target + report.layers[i].other == doctest::Approx(1.0));
  }
}

TEST_CASE("2d projection is deterministic, finite and handles degenerate input") {
  std::mt19937_64 rng(1);
  const Matrix pts = random_matrix(30, 10, rng);
  const Projection a = project_2d(pts, 5), b = project_2d(pts, 5);
  CHECK(a.coords.rows() == 30);
  CHECK(a.coords.cols() == 2);
  CHECK(a.coords.allFinite());
  CHECK(a.coords == b.coords);
  CHECK_FALSE(a.degenerate);

  const Projection same = project_2d(Matrix::Ones(6, 4), 0);
  CHECK(same.degenerate);
  CHECK(same.coords == Matrix::Zero(6, 2));
  CHECK_THROWS_AS(project_2d(Matrix::Ones(1, 4), 0), Error);
}

TEST_CASE("2d projection keeps well separated blobs apart") {
  std::mt19937_64 rng(8);
  const int per = 40, dim = 50;
  Matrix pts = random_matrix(2 * per, dim, rng);
  std::vector<std::string> labels;
  for (int i = 0; i < 2 * per; ++i) {
    if (i >= per) pts.row(i).array() += 8.0;
    labels.push_back(i < per ? "a" : "b");
  }
  const Projection p = project_2d(pts, 3);
  CHECK(cluster_purity(p.coords, labels) >= 0.95);
}

TEST_CASE("cluster purity worked examples") {
  // 1-D points; the singleton class "c" is a centroid but is not scored.
  Matrix pts(6, 1);
  pts << 0, 1, 4, 10, 11, 5;
  const std::vector<std::string> labels = {"a", "a", "a", "b", "b", "c"};
  // Only a=4 is closer to c (5) than to its own leave-one-out centroid (0.5).
  CHECK(cluster_purity(pts, labels) == doctest::Approx(0.8));

  // b={0,2}: from 0 the own centroid (2) and a's centroid (-2) tie and "a" wins.
  Matrix tie(4, 1);
  tie << 0, 2, -2, -2;
  CHECK(cluster_purity(tie, {"b", "b", "a", "a"}) == doctest::Approx(0.75));

  Matrix sep(4, 2);
  sep << 0, 0, 0, 1, 50, 50, 50, 51;
  CHECK(cluster_purity(sep, {"x", "x", "y", "y"}) == 1.0);

  CHECK_THROWS_AS(cluster_purity(sep, {"x", "x", "x", "x"}), Error);
  CHECK_THROWS_AS(cluster_purity(sep, {"x", "y"}), Error);
}

TEST_CASE("cluster purity is order invariant and at chance on one blob") {
  std::mt19937_64 rng(12);
  const Matrix pts = random_matrix(20, 3, rng);
  std::vector<std::string> labels;
  for (int i = 0; i < 20; ++i) labels.push_back(i % 3 == 0 ? "p" : "q");
  std::vector<int> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix shuffled(20, 3);
  std::vector<std::string> shuffled_labels;
  for (int i = 0; i < 20; ++i) shuffled.row(i) = pts.row(perm[i]), shuffled_labels.push_back(labels[perm[i]]);
  CHECK(cluster_purity(pts, labels) == cluster_purity(shuffled, shuffled_labels));

  double total = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const Matrix blob = random_matrix(40, 8, rng, 0.01);
    std::vector<std::string> random_labels;
    for (int i = 0; i < 40; ++i) random_labels.push_back(i < 20 ? "u" : "v");
    std::shuffle(random_labels.begin(), random_labels.end(), rng);
    total += cluster_purity(blob, random_labels);
  }
  CHECK(total / trials == doctest::Approx(0.5).epsilon(0.2));
}
