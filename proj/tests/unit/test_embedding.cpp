#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "vw/core/error.hpp"
#include "vw/embedding/alignment.hpp"
#include "vw/embedding/geometry.hpp"
#include "vw/embedding/table.hpp"
#include "vw/embedding/transfer.hpp"

using namespace vw;
using namespace vw::embedding;
using vw::testing::normal_equations_oracle;

namespace {

Matrix randn(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

EmbeddingTable make_table(const std::string& id, std::vector<std::string> tokens, int d, unsigned seed,
                          std::set<std::string> special = {}) {
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(tokens.size());
  return EmbeddingTable(id, std::move(tokens), randn(n, d, rng), std::move(special));
}

AlignedVocabulary raw_system(const Matrix& Y, const Matrix& X) {
  AlignedVocabulary av;
  av.source_model_id = "y";
  av.target_model_id = "x";
  av.source = Y;
  av.target = X;
  for (Eigen::Index i = 0; i < Y.rows(); ++i) av.pairs.push_back({"w" + std::to_string(i), static_cast<int>(i), static_cast<int>(i)});
  return av;
}

std::vector<std::string> word_list(int n, const std::string& prefix = "w") {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("embedding table enforces its invariants") {
  CHECK_THROWS_AS(EmbeddingTable("m", {"a", "a"}, Matrix::Zero(2, 2)), Error);
  CHECK_THROWS_AS(EmbeddingTable("m", {"a"}, Matrix::Zero(2, 2)), Error);
  Matrix bad = Matrix::Zero(1, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(EmbeddingTable("m", {"a"}, bad), Error);
  const auto t = make_table("m", {"a", "b"}, 3, 1, {"b"});
  CHECK(t.index("a") == 0);
  CHECK(t.is_special("b"));
  CHECK_THROWS_AS(t.index("zzz"), Error);
}

TEST_CASE("table and transfer map round-trip through the container format") {
  const auto dir = std::filesystem::temp_directory_path() / "vw_test_embedding";
  const auto t = make_table("model-a", {"<bos>", "cat", "dog"}, 4, 2, {"<bos>"});
  save_table(dir / "t.vwc", t);
  const auto u = load_table(dir / "t.vwc");
  CHECK(u.model_id() == "model-a");
  CHECK(u.tokens() == t.tokens());
  CHECK(u.special_tokens() == t.special_tokens());
  CHECK((u.matrix() - t.matrix()).cwiseAbs().maxCoeff() < 1e-6);

  TransferMap m{"a", "b", Matrix::Identity(4, 3), 0.25, 17, true};
  save_transfer_map(dir / "m.vwc", m);
  const auto n = load_transfer_map(dir / "m.vwc");
  CHECK(n.source_model_id == "a");
  CHECK(n.target_model_id == "b");
  CHECK(n.fit_mse == 0.25);
  CHECK(n.n_fit_words == 17);
  CHECK(n.rank_deficient);
  CHECK(n.matrix == m.matrix);
}

TEST_CASE("align_vocabularies: identical tables pair every non-special token") {
  auto tokens = word_list(98);
  tokens.push_back("<bos>");
  tokens.push_back("<pool>");
  const auto t = make_table("m", tokens, 8, 3, {"<bos>", "<pool>"});
  const auto av = align_vocabularies(t, t, {.rule = NormalizeRule::kExact});
  CHECK(av.size() == 98);
  CHECK(av.source == av.target);
  CHECK(std::is_sorted(av.pairs.begin(), av.pairs.end(),
                       [](const AlignedPair& a, const AlignedPair& b) { return a.token < b.token; }));
}

TEST_CASE("align_vocabularies: exact rule is a set intersection") {
  const auto a = make_table("a", {"cat", "dog"}, 2, 4);
  const auto b = make_table("b", {"cat", "bird"}, 2, 5);
  const auto av = align_vocabularies(a, b, {.rule = NormalizeRule::kExact, .require_fit_size = false});
  REQUIRE(av.size() == 1);
  CHECK(av.pairs[0].token == "cat");
  CHECK(av.source.row(0) == a.matrix().row(0));
  CHECK(av.target.row(0) == b.matrix().row(0));
  CHECK_THROWS_AS(align_vocabularies(a, b, {.rule = NormalizeRule::kExact}), Error);
}

TEST_CASE("align_vocabularies: decorated tokenizers sharing 96 words match a brute-force intersection") {
  // Vocabulary A: 4 specials + 96 plain words. Vocabulary B: 4 specials,
  // the same 96 words with a boundary marker and mixed case.
  std::vector<std::string> ta = {"<bos>", "<pool>", "<pad>", "<v>"};
  std::vector<std::string> tb = {"[BOS]", "[POOL]", "[PAD]", "[V]"};
  for (int i = 0; i < 96; ++i) {
    ta.push_back("word" + std::to_string(i));
    tb.push_back("\xE2\x96\x81Word" + std::to_string(i));
  }
  const auto a = make_table("a", ta, 32, 6, {"<bos>", "<pool>", "<pad>", "<v>"});
  const auto b = make_table("b", tb, 48, 7, {"[BOS]", "[POOL]", "[PAD]", "[V]"});
  const auto av = align_vocabularies(a, b);

  std::set<std::string> na, nb, both;
  for (const auto& t : ta)
    if (!a.is_special(t)) na.insert(normalize_token(t, NormalizeRule::kStripMarkerLowercase));
  for (const auto& t : tb)
    if (!b.is_special(t)) nb.insert(normalize_token(t, NormalizeRule::kStripMarkerLowercase));
  std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::inserter(both, both.begin()));
  CHECK(both.size() == 96);
  CHECK(av.size() == 96);
  for (const auto& p : av.pairs) CHECK(both.count(p.token) == 1);
}

TEST_CASE("align_vocabularies drops ambiguous normalized forms") {
  const auto a = make_table("a", {"Cat", "cat", "dog"}, 1, 8);
  const auto b = make_table("b", {"cat", "dog"}, 1, 9);
  const auto av = align_vocabularies(a, b, {.require_fit_size = false});
  REQUIRE(av.size() == 1);
  CHECK(av.pairs[0].token == "dog");
}

TEST_CASE("normalize_token strips common boundary markers") {
  const auto r = NormalizeRule::kStripMarkerLowercase;
  CHECK(normalize_token("\xE2\x96\x81Hello", r) == "hello");
  CHECK(normalize_token("\xC4\xA0World", r) == "world");
  CHECK(normalize_token("cat</w>", r) == "cat");
  CHECK(normalize_token("##ing", r) == "ing");
  CHECK(normalize_token("Cat", NormalizeRule::kExact) == "Cat");
}

TEST_CASE("fit_transfer: identity alignment recovers the identity") {
  std::mt19937_64 rng(10);
  const Matrix X = randn(60, 12, rng);
  const auto map = fit_transfer(raw_system(X, X));
  CHECK((map.matrix - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(map.fit_mse <= 1e-10);
  CHECK_FALSE(map.rank_deficient);
  CHECK(map.n_fit_words == 60);
}

TEST_CASE("fit_transfer: exact linear relation is reproduced (positive control)") {
  std::mt19937_64 rng(11);
  const Matrix X = randn(80, 10, rng);
  const Matrix Q = randn(10, 10, rng) + 3.0 * Matrix::Identity(10, 10);
  const Matrix Y = X * Q;
  const auto map = fit_transfer(raw_system(Y, X));
  CHECK(map.fit_mse <= 1e-8);
  CHECK((Y * map.matrix - X).cwiseAbs().maxCoeff() < 1e-5);
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    const Vector rec = apply_transfer(map, Vector(Y.row(i).transpose()));
    CHECK((rec - X.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("fit_transfer matches the normal-equations oracle and satisfies the normal equations") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix Y = randn(200, 16, rng);
    const Matrix X = randn(200, 24, rng);
    const auto map = fit_transfer(raw_system(Y, X));
    const Matrix oracle = normal_equations_oracle(Y, X);
    REQUIRE(map.matrix.rows() == 16);
    REQUIRE(map.matrix.cols() == 24);
    const double rel = ((map.matrix - oracle).cwiseAbs().array() / (oracle.cwiseAbs().array() + 1e-12))
                           .maxCoeff();
    const double abs_scaled = (map.matrix - oracle).cwiseAbs().maxCoeff() / oracle.cwiseAbs().maxCoeff();
    CHECK(std::min(rel, abs_scaled) <= 1e-5);
    const Matrix oracle_res = X - Y * oracle;
    CHECK(map.fit_mse == doctest::Approx(oracle_res.rowwise().squaredNorm().mean()).epsilon(1e-10));
    const Matrix normal = Y.transpose() * (X - Y * map.matrix);
    CHECK(normal.cwiseAbs().maxCoeff() <= 1e-4 * (Y.transpose() * X).cwiseAbs().maxCoeff());
  }
}

TEST_CASE("fit_transfer falls back to the pseudo-inverse on rank deficiency") {
  std::mt19937_64 rng(13);
  Matrix Y = randn(50, 6, rng);
  Y.col(5) = Y.col(0) * 2.0;
  const Matrix X = randn(50, 4, rng);
  const auto map = fit_transfer(raw_system(Y, X));
  CHECK(map.rank_deficient);
  CHECK(map.matrix.allFinite());
  const Matrix normal = Y.transpose() * (X - Y * map.matrix);
  CHECK(normal.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_transfer with ridge shrinks the map") {
  std::mt19937_64 rng(14);
  const Matrix Y = randn(40, 5, rng), X = randn(40, 5, rng);
  const auto plain = fit_transfer(raw_system(Y, X));
  const auto ridge = fit_transfer(raw_system(Y, X), {.ridge = 10.0});
  CHECK(ridge.matrix.norm() < plain.matrix.norm());
  CHECK(ridge.fit_mse >= plain.fit_mse);
}

TEST_CASE("fit_transfer rejects non-finite input") {
  Matrix Y = Matrix::Ones(5, 2);
  Y(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(fit_transfer(raw_system(Y, Matrix::Ones(5, 2))), Error);
}

TEST_CASE("apply_transfer is a row-wise product and is linear") {
  std::mt19937_64 rng(15);
  TransferMap map{"a", "b", randn(6, 9, rng), 0.0, 0, false};
  const Matrix v = randn(4, 6, rng);
  const Matrix out = apply_transfer(map, v);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 9; ++j) {
      double acc = 0;
      for (int k = 0; k < 6; ++k) acc += v(i, k) * map.matrix(k, j);
      CHECK(out(i, j) == doctest::Approx(acc).epsilon(1e-6));
    }
  }
  const Matrix w = randn(4, 6, rng);
  CHECK((apply_transfer(map, Matrix(v + w)) - out - apply_transfer(map, w)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((apply_transfer(map, Matrix(2.5 * v)) - 2.5 * out).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(apply_transfer(map, Vector(Vector::Zero(6))).isZero());
  TransferMap id{"a", "a", Matrix::Identity(6, 6), 0.0, 0, false};
  CHECK(apply_transfer(id, v) == v);
  CHECK_THROWS_AS(apply_transfer(map, randn(2, 5, rng)), Error);
}

TEST_CASE("nearest_word matches an exhaustive scan") {
  const auto t = make_table("m", word_list(40), 5, 16, {"w0"});
  const Vector cat = t.embedding("w7");
  const auto self = nearest_word(t, cat);
  CHECK(self.token == "w7");
  CHECK(self.distance == 0.0);
  const auto other = nearest_word(t, cat, {"w7"});
  std::string best;
  double bd = 1e300;
  for (int i = 0; i < t.size(); ++i) {
    const std::string& tok = t.tokens()[i];
    if (tok == "w0" || tok == "w7") continue;
    const double d = (t.row(i) - cat).norm();
    if (d < bd) bd = d, best = tok;
  }
  CHECK(other.token == best);
  CHECK(other.distance == doctest::Approx(bd));
}

TEST_CASE("nearest_word breaks ties lexicographically and rejects empty candidates") {
  Matrix m(3, 1);
  m << -1.0, 1.0, 5.0;
  const EmbeddingTable t("m", {"zeta", "alpha", "far"}, m);
  CHECK(nearest_word(t, Vector::Zero(1)).token == "alpha");
  CHECK_THROWS_AS(nearest_word(t, Vector::Zero(1), {"zeta", "alpha", "far"}), Error);
}

TEST_CASE("normalized_radius definition") {
  const auto t = make_table("m", word_list(30), 4, 17);
  const Vector a = t.embedding("w3");
  CHECK(normalized_radius(t, a, "w3") == 0.0);
  const auto nn = nearest_word(t, a, {"w3"});
  CHECK(normalized_radius(t, t.embedding(nn.token), "w3") == doctest::Approx(1.0));
  std::mt19937_64 rng(18);
  const Vector v = randn(4, 1, rng).col(0);
  double denom = 1e300;
  for (int i = 0; i < t.size(); ++i)
    if (t.tokens()[i] != "w3") denom = std::min(denom, (t.row(i) - a).norm());
  CHECK(normalized_radius(t, v, "w3") == doctest::Approx((v - a).norm() / denom));
  Matrix dup(2, 2);
  dup << 1, 1, 1, 1;
  const EmbeddingTable d("m", {"a", "b"}, dup);
  CHECK_THROWS_AS(normalized_radius(d, Vector::Zero(2), "a"), Error);
}

TEST_CASE("project_to_ball: forced scaling and the inside case") {
  Matrix m(3, 3);
  m << 0, 0, 0, 2, 0, 0, 0, 10, 0;
  const EmbeddingTable t("m", {"anchor", "near", "far"}, m);
  Vector u(3);
  u << 0, 0, 3;
  const Vector p = project_to_ball(t, u, "anchor", 0.5);
  CHECK((p - u / 3.0).norm() < 1e-15);
  Vector inside(3);
  inside << 0.3, 0.2, 0.1;
  CHECK(project_to_ball(t, inside, "anchor", 0.5) == inside);
  CHECK_THROWS_AS(project_to_ball(t, inside, "anchor", 0.0), Error);
}

TEST_CASE("project_to_ball returns the closest ball point (rejection-sampled oracle, d=3)") {
  const auto t = make_table("m", word_list(10), 3, 19);
  std::mt19937_64 rng(20);
  std::normal_distribution<double> n;
  const double delta = 0.7;
  const AnchorBall ball(t, "w2", delta);
  for (int trial = 0; trial < 10; ++trial) {
    Vector v = ball.center();
    for (int k = 0; k < 3; ++k) v(k) += 3.0 * ball.radius() * n(rng);
    const Vector p = ball.project(v);
    double best = 1e300;
    for (int s = 0; s < 20000; ++s) {
      Vector dir(3);
      for (int k = 0; k < 3; ++k) dir(k) = n(rng);
      const Vector q = ball.center() + dir.normalized() * ball.radius();
      best = std::min(best, (q - v).norm());
    }
    CHECK((p - v).norm() <= best + 1e-12);
    CHECK((p - v).norm() >= best - 0.05 * ball.radius());
  }
}

TEST_CASE("project_to_ball is idempotent and never leaves the ball") {
  const auto t = make_table("m", word_list(25), 8, 21);
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n;
  for (double delta : {0.1, 0.2, 0.5, 1.0}) {
    const AnchorBall ball(t, "w5", delta);
    for (int i = 0; i < 250; ++i) {
      Vector v(8);
      for (int k = 0; k < 8; ++k) v(k) = ball.center()(k) + n(rng) * (i % 2 ? 0.01 : 3.0);
      const Vector once = ball.project(v);
      const Vector twice = ball.project(once);
      CHECK(once == twice);
      CHECK(normalized_radius(t, once, "w5") <= delta + 1e-9);
      if (ball.normalized_radius(v) > delta * (1 + 1e-12)) {
        CHECK(ball.normalized_radius(once) == doctest::Approx(delta).epsilon(1e-9));
      }
    }
  }
}
