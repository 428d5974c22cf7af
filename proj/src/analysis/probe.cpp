#include "vw/analysis/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "vw/core/container.hpp"
#include "vw/core/error.hpp"
#include "vw/tasks/metrics.hpp"

namespace vw::analysis {

using nlohmann::json;

std::vector<int> evenly_spaced_layers(int block_count, int n) {
  if (n < 1 || n > block_count)
    throw Error(ErrorCode::kInvalidInput, "evenly_spaced_layers: need 1 <= n <= block count");
  std::vector<int> out;
  for (int i = 1; i <= n; ++i) out.push_back(i * block_count / n);
  return out;
}

Vector truncated_encode(const tasks::TextEncoderBackend& txt, const tasks::TokenSequence& tokens,
                        const Matrix& injected, int n_blocks) {
  if (n_blocks < 1 || n_blocks > txt.block_count())
    throw Error(ErrorCode::kInvalidInput, "truncated_encode: n_blocks outside [1, " +
                                              std::to_string(txt.block_count()) + "]");
  ad::Tape tape;
  const ad::Var inj = injected.size() > 0 ? tape.constant(injected) : ad::Var();
  tasks::EncodeOptions options;
  options.n_blocks = n_blocks;
  return txt.encode(tape, {tokens}, inj, options).features.value().row(0).transpose();
}

ActivationTrace capture_activations(const tasks::TextEncoderBackend& txt, const Matrix& vectors,
                                    const std::string& template_text, const std::vector<int>& layers,
                                    std::string prompt_id, std::string anchor, std::string target) {
  if (layers.empty()) throw Error(ErrorCode::kInvalidInput, "capture_activations: no layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] < 1 || layers[i] > txt.block_count() || (i > 0 && layers[i] <= layers[i - 1]))
      throw Error(ErrorCode::kInvalidInput, "capture_activations: layers must increase within [1, B]");
  }
  ad::Tape tape;
  tasks::EncodeOptions options;
  options.capture_layers = layers;
  const tasks::TokenSequence seq = txt.tokenize(template_text, static_cast<int>(vectors.rows()));
  const tasks::Encoded enc = txt.encode(tape, {seq}, tape.constant(vectors), options);

  ActivationTrace trace{txt.model_id(), std::move(prompt_id), layers, Matrix(layers.size(), txt.feature_dim()),
                        std::move(anchor), std::move(target)};
  for (size_t i = 0; i < layers.size(); ++i) trace.features.row(static_cast<Eigen::Index>(i)) = enc.captured[i].value().row(0);
  return trace;
}

void save_trace(const std::filesystem::path& path, const ActivationTrace& trace) {
  json h = {{"kind", "activation_trace"}, {"model_id", trace.model_id}, {"prompt_id", trace.prompt_id},
            {"layer_indices", trace.layer_indices}, {"anchor", trace.anchor}, {"target", trace.target}};
  io::write_container(path, h, {{"features", trace.features}});
}

ActivationTrace load_trace(const std::filesystem::path& path) {
  const io::Container c = io::read_container(path);
  const json& h = c.header;
  if (h.value("kind", "") != "activation_trace")
    throw Error(ErrorCode::kFormat, path.string() + " is not an activation trace");
  ActivationTrace t;
  t.model_id = h.at("model_id").get<std::string>();
  t.prompt_id = h.at("prompt_id").get<std::string>();
  t.layer_indices = h.at("layer_indices").get<std::vector<int>>();
  t.anchor = h.at("anchor").get<std::string>();
  t.target = h.at("target").get<std::string>();
  t.features = c.tensor("features");
  if (t.features.rows() != static_cast<Eigen::Index>(t.layer_indices.size()))
    throw Error(ErrorCode::kFormat, "activation trace: feature rows differ from layer count");
  return t;
}

SampleJudge make_sample_judge(const tasks::Judge& judge, std::vector<std::string> labels) {
  if (labels.empty()) throw Error(ErrorCode::kInvalidInput, "sample judge: no labels");
  return [judge, labels = std::move(labels)](const Image& image) {
    return labels[tasks::judge_images(judge, {image}, labels).front()];
  };
}

ProbeReport truncated_generation_probe(const tasks::GenerationBackend& gen, const tasks::TextEncoderBackend& txt,
                                       const Matrix& vectors, const SampleJudge& judge, const std::string& anchor,
                                       const std::string& target, const std::vector<int>& layers,
                                       std::mt19937_64& rng, const ProbeOptions& options) {
  if (anchor.empty()) throw Error(ErrorCode::kInvalidInput, "probe: prompt has no anchor");
  if (options.samples_per_layer < 1) throw Error(ErrorCode::kInvalidInput, "probe: samples_per_layer < 1");
  const tasks::TokenSequence seq = txt.tokenize(options.template_text, static_cast<int>(vectors.rows()));
  ProbeReport report;
  for (int layer : layers) {
    const Vector feature = truncated_encode(txt, seq, vectors, layer);
    const Matrix cond = feature.transpose().replicate(options.samples_per_layer, 1);
    int n_anchor = 0, n_target = 0;
    for (const Image& image : gen.sample(cond, rng)) {
      const std::string label = judge(image);
      if (label == target) ++n_target;
      else if (label == anchor) ++n_anchor;
    }
    const double n = options.samples_per_layer;
    LayerFractions f{layer, n_anchor / n, n_target / n, (n - n_anchor - n_target) / n};
    if (!report.transition_layer && n_target > n_anchor) report.transition_layer = layer;
    report.layers.push_back(f);
  }
  return report;
}

std::string probe_csv(const ProbeReport& report) {
  std::ostringstream out;
  out << "layer,anchor_fraction,target_fraction,other_fraction\n";
  char buf[128];
  for (const auto& f : report.layers) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f\n", f.layer, f.anchor, f.target, f.other);
    out << buf;
  }
  return out.str();
}

namespace {

// Row i of P conditioned on point i, with the Gaussian precision found by
// bisection so that the entropy matches log(perplexity).
void conditional_row(const Matrix& d2, int i, double perplexity, Matrix& p) {
  const int n = static_cast<int>(d2.rows());
  const double target = std::log(perplexity);
  double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    double sum = 0.0, weighted = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = std::exp(-beta * d2(i, j));
      p(i, j) = w;
      sum += w;
      weighted += w * d2(i, j);
    }
    if (sum <= 0) {
      hi = beta;
      beta = (lo + hi) / 2;
      continue;
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    for (int j = 0; j < n; ++j) p(i, j) /= sum;
    const double diff = entropy - target;
    if (std::abs(diff) < 1e-5) break;
    if (diff > 0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2 : (lo + hi) / 2;
    } else {
      hi = beta;
      beta = (lo + hi) / 2;
    }
  }
  p(i, i) = 0.0;
}

}  // namespace

Projection project_2d(const Matrix& points, std::uint64_t seed, const TsneOptions& options) {
  const int n = static_cast<int>(points.rows());
  if (n < 2) throw Error(ErrorCode::kInvalidInput, "project_2d: need at least 2 points");
  if (!points.allFinite()) throw Error(ErrorCode::kInvalidInput, "project_2d: non-finite input");

  Matrix d2(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d2(i, j) = (points.row(i) - points.row(j)).squaredNorm();
  Projection out;
  if (d2.maxCoeff() == 0.0) {
    out.coords = Matrix::Zero(n, 2);
    out.degenerate = true;
    return out;
  }
  // Distances scaled to unit mean keep the bisection well conditioned.
  d2 /= d2.sum() / (static_cast<double>(n) * (n - 1));

  const double perplexity = std::max(1.0, std::min(options.perplexity, (n - 1) / 3.0));
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) conditional_row(d2, i, perplexity, p);
  p = (p + p.transpose()) / (2.0 * n);
  p = p.cwiseMax(1e-12);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1e-4);
  Matrix y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
  Matrix step = Matrix::Zero(n, 2), gains = Matrix::Ones(n, 2), grad(n, 2), num(n, n);

  for (int iter = 0; iter < options.iterations; ++iter) {
    const double exaggeration = iter < options.exaggeration_iterations ? options.exaggeration : 1.0;
    const double momentum = iter < options.exaggeration_iterations ? 0.5 : 0.8;
    double num_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = num(j, i) = v;
        num_sum += 2 * v;
      }
    }
    grad.setZero();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(num(i, j) / num_sum, 1e-12);
        grad.row(i) += 4.0 * (exaggeration * p(i, j) - q) * num(i, j) * (y.row(i) - y.row(j));
      }
    }
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      double& g = gains.data()[k];
      g = (grad.data()[k] > 0) != (step.data()[k] > 0) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      step.data()[k] = momentum * step.data()[k] - options.learning_rate * g * grad.data()[k];
    }
    y += step;
    y.rowwise() -= y.colwise().mean();
  }
  out.coords = y;
  return out;
}

double cluster_purity(const Matrix& points, const std::vector<std::string>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != points.rows())
    throw Error(ErrorCode::kDimensionMismatch, "cluster_purity: one label per point");
  std::map<std::string, std::vector<int>> members;
  for (size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<int>(i));
  if (members.size() < 2) throw Error(ErrorCode::kInvalidInput, "cluster_purity: need at least 2 labels");

  std::vector<std::string> names;
  std::vector<Vector> sums;
  for (const auto& [name, idx] : members) {
    Vector s = Vector::Zero(points.cols());
    for (int i : idx) s += points.row(i).transpose();
    names.push_back(name);
    sums.push_back(std::move(s));
  }

  int scored = 0, correct = 0;
  for (size_t c = 0; c < names.size(); ++c) {
    const auto& idx = members[names[c]];
    if (idx.size() < 2) continue;
    for (int i : idx) {
      const Vector x = points.row(i).transpose();
      int best = -1;
      double best_d = 0.0;
      for (size_t k = 0; k < names.size(); ++k) {
        const auto count = static_cast<double>(members[names[k]].size());
        const Vector centroid = k == c ? Vector((sums[k] - x) / (count - 1)) : Vector(sums[k] / count);
        const double d = (x - centroid).squaredNorm();
        if (best < 0 || d < best_d) best = static_cast<int>(k), best_d = d;
      }
      ++scored;
      if (best == static_cast<int>(c)) ++correct;
    }
  }
  if (scored == 0) throw Error(ErrorCode::kInvalidInput, "cluster_purity: every class has a single member");
  return static_cast<double>(correct) / scored;
}

}  // namespace vw::analysis
