#include "vw/toy/family.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "vw/ad/ops.hpp"
#include "vw/core/container.hpp"
#include "vw/core/digest.hpp"
#include "vw/core/error.hpp"
#include "vw/datasets/manifest.hpp"
#include "vw/optim/adam.hpp"
#include "vw/tasks/metrics.hpp"

namespace vw::toy {

using nlohmann::json;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kA: return "A";
    case Variant::kB: return "B";
    case Variant::kJudge: return "J";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "A" || s == "a") return Variant::kA;
  if (s == "B" || s == "b") return Variant::kB;
  if (s == "J" || s == "j" || s == "judge") return Variant::kJudge;
  throw Error(ErrorCode::kInvalidInput, "unknown toy variant '" + s + "'");
}

FamilyConfig variant_config(Variant v) {
  FamilyConfig c;
  switch (v) {
    case Variant::kA:
      c.text = {"toy-a", TokenStyle::kPlain, 32, 4, 2, 16, 4, 32};
      c.seed = 1101;
      break;
    case Variant::kB:
      c.text = {"toy-b", TokenStyle::kMarker, 48, 6, 3, 16, 4, 48};
      c.seed = 2202;
      break;
    case Variant::kJudge:
      c.text = {"toy-judge", TokenStyle::kPlain, 32, 2, 2, 16, 4, 32};
      c.seed = 3303;
      c.has_detector = false;
      c.has_denoiser = false;
      break;
  }
  c.classifier.feature_dim = c.text.feature_dim;
  c.detector.feature_dim = c.text.feature_dim;
  c.denoiser.cond_dim = c.text.feature_dim;
  return c;
}

const std::vector<std::string>& caption_templates() {
  static const std::vector<std::string> t = {
      "a photo of {}",      "a picture of a {}",        "an image of the {}", "a drawing of one {}",
      "this is a {}",       "there is a {} in the image", "a rendering of a {} shape", "a {} object",
  };
  return t;
}

std::vector<std::string> captions(const std::vector<std::string>& names, const std::string& template_text) {
  const auto pos = template_text.find("{}");
  if (pos == std::string::npos) throw Error(ErrorCode::kInvalidInput, "template without '{}'");
  std::vector<std::string> out;
  for (const auto& n : names) out.push_back(template_text.substr(0, pos) + n + template_text.substr(pos + 2));
  return out;
}

std::string ToyFamily::fingerprint() const {
  std::string all = text->params().fingerprint() + classifier->params().fingerprint();
  if (detector) all += detector->params().fingerprint();
  if (denoiser) all += denoiser->params().fingerprint();
  return hex_digest(all);
}

namespace {

double lr_at(double base, int step, int total) {
  const int warm = std::min(50, std::max(1, total / 10));
  if (step < warm) return base * (step + 1) / warm;
  const double p = static_cast<double>(step - warm) / std::max(1, total - warm);
  return base * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(M_PI * p)));
}

/// Cycles through shuffled epochs of [0, n).
class BatchSampler {
 public:
  BatchSampler(int n, std::mt19937_64& rng) : order_(static_cast<size_t>(n)), rng_(rng) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
  std::vector<int> next(int b) {
    std::vector<int> out;
    for (int i = 0; i < b; ++i) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<int> order_;
  std::mt19937_64& rng_;
  size_t pos_ = 0;
};

int index_of(const std::vector<std::string>& names, const std::string& n) {
  auto it = std::find(names.begin(), names.end(), n);
  if (it == names.end()) throw Error(ErrorCode::kInvalidInput, "label '" + n + "' outside the training concepts");
  return static_cast<int>(it - names.begin());
}

void check_finite(double loss, int step) {
  if (!std::isfinite(loss)) throw DivergedError(step, loss);
}

struct Sample {
  Matrix pixels;
  Matrix coarse;  // empty unless augmenting
  std::vector<tasks::Box> boxes;
  int label = 0;
};

/// Tokenized captions of every (concept, template) pair.
std::vector<std::vector<tasks::TokenSequence>> caption_tokens(const ToyTextEncoder& text,
                                                              const std::vector<std::string>& names) {
  std::vector<std::vector<tasks::TokenSequence>> out;
  for (const auto& tpl : caption_templates()) {
    std::vector<tasks::TokenSequence> row;
    for (const auto& c : captions(names, tpl)) row.push_back(text.tokenize(c));
    out.push_back(std::move(row));
  }
  return out;
}

void train_classifier(ToyFamily& f, const std::vector<Sample>& train, const std::vector<std::string>& names,
                      const PretrainConfig& cfg, std::mt19937_64& rng, bool augment) {
  ad::ParamSet tp = f.text->params(), cp = f.classifier->params();
  optim::Adam opt_t({cfg.classifier_lr}), opt_c({cfg.classifier_lr});
  const auto toks = caption_tokens(*f.text, names);
  BatchSampler sampler(static_cast<int>(train.size()), rng);
  std::uniform_int_distribution<size_t> pick_tpl(0, toks.size() - 1);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, 0.05);
  const int px = f.config.classifier.image_size * f.config.classifier.image_size;
  double tail = 0;
  int tail_n = 0;
  for (int step = 0; step < cfg.classifier_steps; ++step) {
    const auto idx = sampler.next(cfg.classifier_batch);
    const int n = static_cast<int>(idx.size());
    Matrix pixels(static_cast<Eigen::Index>(n) * px, 3);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      const Sample& s = train[idx[i]];
      auto block = pixels.middleRows(static_cast<Eigen::Index>(i) * px, px);
      block = augment && coin(rng) ? s.coarse : s.pixels;
      if (augment)
        for (Eigen::Index k = 0; k < block.size(); ++k) block.data()[k] += noise(rng);
      labels.push_back(s.label);
    }
    std::vector<tasks::TokenSequence> seqs;
    for (size_t c = 0; c < names.size(); ++c) seqs.push_back(toks[pick_tpl(rng)][c]);

    ad::Tape tape;
    ad::Binding bt(tape, tp, [](const std::string&) { return true; });
    ad::Binding bc(tape, cp, [](const std::string&) { return true; });
    ad::Var text = ad::l2_normalize_rows(f.text->forward(bt, seqs, ad::Var()).features);
    ad::Var img = ad::l2_normalize_rows(f.classifier->forward(bc, pixels, n));
    ad::Var loss = ad::softmax_cross_entropy(ad::scale(ad::matmul_nt(img, text), cfg.logit_scale), labels);
    const double lv = loss.value()(0, 0);
    check_finite(lv, step);
    tape.backward(loss);
    const double lr = lr_at(cfg.classifier_lr, step, cfg.classifier_steps);
    opt_t.set_learning_rate(lr);
    opt_c.set_learning_rate(lr);
    opt_t.update(tp, bt.gradients());
    opt_c.update(cp, bc.gradients());
    if (step >= cfg.classifier_steps - 100) tail += lv, ++tail_n;
    if (cfg.on_step) cfg.on_step("classifier", step, lv);
  }
  tp.round_to_float();
  cp.round_to_float();
  f.text->set_params(std::move(tp));
  f.classifier->set_params(std::move(cp));
  f.report.classifier_loss = tail_n ? tail / tail_n : 0.0;
}

/// Features of every (template, concept) caption, one matrix per template.
std::vector<Matrix> caption_features(const ToyTextEncoder& text, const std::vector<std::string>& names) {
  std::vector<Matrix> out;
  for (const auto& tpl : caption_templates()) out.push_back(tasks::encode_texts(text, captions(names, tpl)));
  return out;
}

Matrix normalized(Matrix m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = m.row(r).norm();
    if (n > 0) m.row(r) /= n;
  }
  return m;
}

void train_detector(ToyFamily& f, const std::vector<Sample>& train, const std::vector<std::string>& names,
                    const PretrainConfig& cfg, std::mt19937_64& rng) {
  ad::ParamSet dp = f.detector->params();
  optim::Adam opt({cfg.detector_lr});
  std::vector<Matrix> feats = caption_features(*f.text, names);
  for (Matrix& m : feats) m = normalized(m);
  const auto& anchors = f.detector->anchors();
  const int bg = static_cast<int>(names.size());

  struct Assign {
    std::vector<std::pair<int, int>> pos;  // anchor, label
    std::vector<int> neg;
  };
  std::vector<Assign> assign(train.size());
  for (size_t i = 0; i < train.size(); ++i) {
    for (size_t a = 0; a < anchors.size(); ++a) {
      double best = 0;
      int label = -1;
      for (const auto& b : train[i].boxes) {
        const double v = tasks::iou(anchors[a], b);
        if (v > best) best = v, label = index_of(names, *b.class_label);
      }
      if (best >= 0.5) assign[i].pos.emplace_back(static_cast<int>(a), label);
      else if (best < 0.3) assign[i].neg.push_back(static_cast<int>(a));
    }
  }

  BatchSampler sampler(static_cast<int>(train.size()), rng);
  std::uniform_int_distribution<size_t> pick_tpl(0, feats.size() - 1);
  const int px = f.config.detector.image_size * f.config.detector.image_size;
  double tail = 0;
  int tail_n = 0;
  for (int step = 0; step < cfg.detector_steps; ++step) {
    const auto idx = sampler.next(cfg.detector_batch);
    const int n = static_cast<int>(idx.size());
    Matrix pixels(static_cast<Eigen::Index>(n) * px, 3);
    std::vector<std::pair<int, int>> regions;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      const Sample& s = train[idx[i]];
      pixels.middleRows(static_cast<Eigen::Index>(i) * px, px) = s.pixels;
      const Assign& as = assign[idx[i]];
      for (const auto& [a, l] : as.pos) regions.emplace_back(i, a), labels.push_back(l);
      std::uniform_int_distribution<size_t> pick(0, as.neg.size() - 1);
      const size_t n_neg = std::max<size_t>(3 * as.pos.size(), 8);
      for (size_t j = 0; j < n_neg && !as.neg.empty(); ++j) regions.emplace_back(i, as.neg[pick(rng)]), labels.push_back(bg);
    }
    const Matrix& text = feats[pick_tpl(rng)];
    ad::Tape tape;
    ad::Binding bd(tape, dp, [](const std::string&) { return true; });
    ad::Var fmap = f.detector->feature_map(bd, pixels, n);
    ad::Var reg = ad::l2_normalize_rows(f.detector->region_features(bd, fmap, n, regions));
    ad::Var classes = ad::concat_rows({tape.constant(text), ad::l2_normalize_rows(bd("bg"))});
    ad::Var loss = ad::softmax_cross_entropy(ad::scale(ad::matmul_nt(reg, classes), cfg.logit_scale), labels);
    const double lv = loss.value()(0, 0);
    check_finite(lv, step);
    tape.backward(loss);
    opt.set_learning_rate(lr_at(cfg.detector_lr, step, cfg.detector_steps));
    opt.update(dp, bd.gradients());
    if (step >= cfg.detector_steps - 100) tail += lv, ++tail_n;
    if (cfg.on_step) cfg.on_step("detector", step, lv);
  }
  dp.round_to_float();
  f.detector->set_params(std::move(dp));
  f.report.detector_loss = tail_n ? tail / tail_n : 0.0;
}

void train_denoiser(ToyFamily& f, const std::vector<Sample>& train, const std::vector<std::string>& names,
                    const PretrainConfig& cfg, std::mt19937_64& rng) {
  ad::ParamSet gp = f.denoiser->params();
  optim::Adam opt({cfg.denoiser_lr});
  const std::vector<Matrix> feats = caption_features(*f.text, names);
  const tasks::DiffusionSchedule& sched = f.denoiser->schedule();
  const tasks::LatentShape ls = f.denoiser->latent_shape();
  std::vector<Matrix> latents;
  const int s = f.config.denoiser.image_size;
  for (const Sample& smp : train) {
    Matrix z(ls.pixels(), 3);
    for (int y = 0; y < s / 2; ++y)
      for (int x = 0; x < s / 2; ++x)
        z.row(y * (s / 2) + x) = 0.25 * (smp.pixels.row(2 * y * s + 2 * x) + smp.pixels.row(2 * y * s + 2 * x + 1) +
                                         smp.pixels.row((2 * y + 1) * s + 2 * x) +
                                         smp.pixels.row((2 * y + 1) * s + 2 * x + 1));
    latents.push_back(std::move(z));
  }
  BatchSampler sampler(static_cast<int>(train.size()), rng);
  std::uniform_int_distribution<size_t> pick_tpl(0, feats.size() - 1);
  std::uniform_int_distribution<int> pick_t(0, sched.n_steps() - 1);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution drop(f.config.denoiser.cond_dropout);
  double tail = 0;
  int tail_n = 0;
  for (int step = 0; step < cfg.denoiser_steps; ++step) {
    const auto idx = sampler.next(cfg.denoiser_batch);
    const int n = static_cast<int>(idx.size());
    Matrix z_t(static_cast<Eigen::Index>(n) * ls.pixels(), 3), vel(z_t.rows(), 3), cond(n, f.config.denoiser.cond_dim);
    Matrix e(ls.pixels(), 3);
    std::vector<int> ts(n);
    for (int i = 0; i < n; ++i) {
      ts[i] = pick_t(rng);
      const double ab = sched.alpha_bar[ts[i]];
      for (Eigen::Index k = 0; k < e.size(); ++k) e.data()[k] = normal(rng);
      const Matrix& z0 = latents[idx[i]];
      z_t.middleRows(static_cast<Eigen::Index>(i) * ls.pixels(), ls.pixels()) = std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * e;
      vel.middleRows(static_cast<Eigen::Index>(i) * ls.pixels(), ls.pixels()) = std::sqrt(ab) * e - std::sqrt(1.0 - ab) * z0;
      cond.row(i) = feats[pick_tpl(rng)].row(train[idx[i]].label);
      if (drop(rng)) cond.row(i).setZero();
    }
    ad::Tape tape;
    ad::Binding bg(tape, gp, [](const std::string&) { return true; });
    ad::Var pred = f.denoiser->forward(bg, tape.constant(std::move(z_t)), ts, tape.constant(std::move(cond)));
    ad::Var loss = ad::mse(pred, tape.constant(std::move(vel)));
    const double lv = loss.value()(0, 0);
    check_finite(lv, step);
    tape.backward(loss);
    opt.set_learning_rate(lr_at(cfg.denoiser_lr, step, cfg.denoiser_steps));
    opt.update(gp, bg.gradients());
    if (step >= cfg.denoiser_steps - 200) tail += lv, ++tail_n;
    if (cfg.on_step) cfg.on_step("denoiser", step, lv);
  }
  gp.round_to_float();
  f.denoiser->set_params(std::move(gp));
  f.report.denoiser_loss = tail_n ? tail / tail_n : 0.0;
}

std::vector<Sample> to_samples(const std::vector<tasks::Example>& xs, const std::vector<std::string>& names,
                               bool coarse) {
  std::vector<Sample> out;
  for (const auto& e : xs) {
    Sample s;
    s.pixels = image_to_matrix(e.image);
    if (coarse) s.coarse = image_to_matrix(coarsen(e.image));
    s.boxes = e.boxes;
    s.label = index_of(names, e.label);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<tasks::Example> render_pool(int n, const std::vector<std::string>& names, std::mt19937_64& rng) {
  std::vector<ColorShape> pairs;
  for (const auto& nm : names) {
    const auto sp = nm.find(' ');
    pairs.emplace_back(nm.substr(0, sp), nm.substr(sp + 1));
  }
  std::vector<tasks::Example> out;
  for (int i = 0; i < n; ++i) {
    const ShapeScene scene = sample_scene(pairs[static_cast<size_t>(i) % pairs.size()], pairs, rng);
    tasks::Example e;
    e.image = render_scene(scene, &rng);
    e.boxes = scene.boxes();
    e.label = datasets::class_from_largest_box(e.boxes);
    out.push_back(std::move(e));
  }
  return out;
}

double accuracy_on(const ToyFamily& f, const std::vector<tasks::Example>& xs, const std::vector<std::string>& names) {
  if (xs.empty()) return 0.0;
  std::vector<Image> imgs;
  std::vector<int> labels;
  for (const auto& e : xs) imgs.push_back(e.image), labels.push_back(index_of(names, e.label));
  return tasks::classifier_accuracy(f.classifier->embed_images(imgs), labels,
                                    tasks::encode_texts(*f.text, captions(names, "a photo of {}")));
}

double detector_map_on(const ToyFamily& f, const std::vector<tasks::Example>& xs, const std::vector<std::string>& names) {
  const Matrix text = tasks::encode_texts(*f.text, captions(names, "a photo of {}"));
  std::vector<double> per_class;
  for (size_t c = 0; c < names.size(); ++c) {
    std::vector<std::vector<tasks::ScoredBox>> preds;
    std::vector<std::vector<tasks::Box>> gt;
    for (const auto& e : xs) {
      if (e.label != names[c]) continue;
      preds.push_back(tasks::detect(*f.detector, e.image, text.row(static_cast<Eigen::Index>(c)).transpose()));
      std::vector<tasks::Box> g;
      for (const auto& b : e.boxes)
        if (b.class_label == names[c]) g.push_back(b);
      gt.push_back(std::move(g));
    }
    if (!preds.empty()) per_class.push_back(tasks::mean_average_precision(preds, gt));
  }
  return tasks::mean_over_classes(per_class);
}

ToyFamily fresh_family(Variant variant, const FamilyConfig& cfg, std::mt19937_64& rng) {
  ToyFamily f;
  f.variant = variant;
  f.config = cfg;
  f.model_id = cfg.text.model_id;
  f.text = std::make_shared<ToyTextEncoder>(cfg.text, rng);
  f.classifier = std::make_shared<ToyClassifier>(f.model_id, cfg.classifier, rng);
  if (cfg.has_detector) f.detector = std::make_shared<ToyDetector>(f.model_id, cfg.detector, rng);
  if (cfg.has_denoiser) f.denoiser = std::make_shared<ToyDenoiser>(f.model_id, cfg.denoiser, rng);
  // Held at checkpoint precision from the start.
  const auto rounded = [](ad::ParamSet p) {
    p.round_to_float();
    return p;
  };
  f.text->set_params(rounded(f.text->params()));
  f.classifier->set_params(rounded(f.classifier->params()));
  if (f.detector) f.detector->set_params(rounded(f.detector->params()));
  if (f.denoiser) f.denoiser->set_params(rounded(f.denoiser->params()));
  return f;
}

}  // namespace

ToyFamily init_family(Variant variant, std::uint64_t seed_offset) {
  FamilyConfig fc = variant_config(variant);
  fc.seed += seed_offset;
  std::mt19937_64 rng(fc.seed);
  return fresh_family(variant, fc, rng);
}

ToyFamily pretrain_family(Variant variant, const std::filesystem::path& root, const ShapesDataset& data,
                          const PretrainConfig& config) {
  FamilyConfig fc = variant_config(variant);
  fc.seed += config.seed_offset;
  std::mt19937_64 rng(fc.seed);
  ToyFamily f = fresh_family(variant, fc, rng);

  std::set<std::string> pre_names;
  for (const auto& e : data.pretrain.entries) pre_names.insert(e.class_label);
  for (const auto& n : data.concepts.concepts())
    if (!pre_names.count(n)) f.report.holdout.push_back(n);
  const bool judge = variant == Variant::kJudge;
  const std::vector<std::string> names = judge ? all_concepts() : held_in_concepts({});
  std::vector<std::string> held_in;
  for (const auto& n : names)
    if (judge || pre_names.count(n)) held_in.push_back(n);
  f.report.held_in = held_in;
  for (const auto& e : data.pretrain.entries)
    for (const auto& b : e.boxes)
      if (b.class_label && !pre_names.count(*b.class_label))
        throw Error(ErrorCode::kInvalidInput, "pretraining split mentions '" + *b.class_label + "'");

  std::vector<tasks::Example> train_x, eval_x;
  if (judge) {
    train_x = render_pool(config.judge_pool, held_in, rng);
    eval_x = render_pool(config.judge_pool / 6, held_in, rng);
  } else {
    train_x = datasets::load_examples(root, data.pretrain.select("", datasets::Split::kTrain));
    eval_x = datasets::load_examples(root, data.pretrain.select("", datasets::Split::kEval));
  }
  const std::vector<Sample> train = to_samples(train_x, held_in, judge);

  train_classifier(f, train, held_in, config, rng, judge);
  f.report.held_in_accuracy = accuracy_on(f, eval_x, held_in);
  if (f.report.held_in_accuracy < config.min_accuracy)
    throw Error(ErrorCode::kPretrainingFailed, "held-in accuracy " + std::to_string(f.report.held_in_accuracy) +
                                                   " below " + std::to_string(config.min_accuracy));
  if (!judge && !f.report.holdout.empty()) {
    std::vector<tasks::Example> holdout_x;
    for (const auto& h : f.report.holdout) {
      auto xs = datasets::load_examples(root, data.concepts.select(h, datasets::Split::kEval));
      holdout_x.insert(holdout_x.end(), xs.begin(), xs.end());
    }
    f.report.holdout_zero_shot_accuracy = accuracy_on(f, holdout_x, all_concepts());
    f.report.holdout_chance = 1.0 / static_cast<double>(all_concepts().size());
  }
  if (f.detector) {
    train_detector(f, train, held_in, config, rng);
    f.report.detector_map = detector_map_on(f, eval_x, held_in);
  }
  if (f.denoiser) train_denoiser(f, train, held_in, config, rng);
  return f;
}

ToyFamily make_clone(const ToyFamily& family, std::uint64_t q_seed, double max_condition) {
  const int d = family.config.text.dim;
  std::mt19937_64 rng(q_seed);
  std::normal_distribution<double> normal;
  Matrix q;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw Error(ErrorCode::kInvalidInput, "make_clone: no well-conditioned Q");
    q = Matrix::Identity(d, d);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] += normal(rng) / std::sqrt(static_cast<double>(d));
    Eigen::JacobiSVD<Matrix> svd(q);
    const auto& sv = svd.singularValues();
    if (sv(d - 1) > 0 && sv(0) / sv(d - 1) <= max_condition) break;
  }
  ad::ParamSet tp = family.text->params();
  tp.get("tok_embed") = io::round_to_float(tp.get("tok_embed") * q);
  tp.get("w_in") = io::round_to_float(q.partialPivLu().solve(tp.get("w_in")));

  ToyFamily c;
  c.model_id = family.model_id + "-clone";
  c.variant = family.variant;
  c.config = family.config;
  c.config.text.model_id = c.model_id;
  c.report = family.report;
  c.text = std::make_shared<ToyTextEncoder>(c.config.text, std::move(tp));
  c.classifier = std::make_shared<ToyClassifier>(c.model_id, c.config.classifier, family.classifier->params());
  if (family.detector) c.detector = std::make_shared<ToyDetector>(c.model_id, c.config.detector, family.detector->params());
  if (family.denoiser) c.denoiser = std::make_shared<ToyDenoiser>(c.model_id, c.config.denoiser, family.denoiser->params());
  return c;
}

namespace {

json config_json(const FamilyConfig& c) {
  return {{"text",
           {{"model_id", c.text.model_id},
            {"style", c.text.style == TokenStyle::kMarker ? "marker" : "plain"},
            {"dim", c.text.dim},
            {"blocks", c.text.blocks},
            {"heads", c.text.heads},
            {"max_len", c.text.max_len},
            {"mlp_mult", c.text.mlp_mult},
            {"feature_dim", c.text.feature_dim}}},
          {"classifier",
           {{"channels", c.classifier.channels},
            {"feature_dim", c.classifier.feature_dim},
            {"image_size", c.classifier.image_size}}},
          {"detector",
           {{"channels", c.detector.channels},
            {"hidden", c.detector.hidden},
            {"feature_dim", c.detector.feature_dim},
            {"scales", c.detector.scales},
            {"grid", c.detector.grid},
            {"image_size", c.detector.image_size}}},
          {"denoiser",
           {{"c1", c.denoiser.c1},
            {"c2", c.denoiser.c2},
            {"cond_dim", c.denoiser.cond_dim},
            {"time_dim", c.denoiser.time_dim},
            {"hidden", c.denoiser.hidden},
            {"n_steps", c.denoiser.n_steps},
            {"image_size", c.denoiser.image_size},
            {"cond_dropout", c.denoiser.cond_dropout},
            {"guidance", c.denoiser.guidance}}},
          {"seed", c.seed},
          {"has_detector", c.has_detector},
          {"has_denoiser", c.has_denoiser}};
}

FamilyConfig config_from_json(const json& j) {
  FamilyConfig c;
  const json& t = j.at("text");
  c.text = {t.at("model_id"), t.at("style") == "marker" ? TokenStyle::kMarker : TokenStyle::kPlain,
            t.at("dim"),      t.at("blocks"),
            t.at("heads"),    t.at("max_len"),
            t.at("mlp_mult"), t.at("feature_dim")};
  const json& k = j.at("classifier");
  c.classifier = {k.at("channels").get<std::vector<int>>(), k.at("feature_dim"), k.at("image_size")};
  const json& d = j.at("detector");
  c.detector = {d.at("channels").get<std::vector<int>>(), d.at("hidden"), d.at("feature_dim"),
                d.at("scales").get<std::vector<int>>(),   d.at("grid"),   d.at("image_size")};
  const json& g = j.at("denoiser");
  c.denoiser = {g.at("c1"),     g.at("c2"),      g.at("cond_dim"), g.at("time_dim"),
                g.at("hidden"), g.at("n_steps"), g.at("image_size"),
                g.value("cond_dropout", 0.0), g.value("guidance", 1.0)};
  c.seed = j.at("seed");
  c.has_detector = j.at("has_detector");
  c.has_denoiser = j.at("has_denoiser");
  return c;
}

json report_json(const PretrainReport& r) {
  return {{"held_in_accuracy", r.held_in_accuracy},
          {"holdout_zero_shot_accuracy", r.holdout_zero_shot_accuracy},
          {"holdout_chance", r.holdout_chance},
          {"detector_map", r.detector_map},
          {"denoiser_loss", r.denoiser_loss},
          {"classifier_loss", r.classifier_loss},
          {"detector_loss", r.detector_loss},
          {"held_in", r.held_in},
          {"holdout", r.holdout}};
}

PretrainReport report_from_json(const json& j) {
  PretrainReport r;
  r.held_in_accuracy = j.at("held_in_accuracy");
  r.holdout_zero_shot_accuracy = j.at("holdout_zero_shot_accuracy");
  r.holdout_chance = j.at("holdout_chance");
  r.detector_map = j.at("detector_map");
  r.denoiser_loss = j.at("denoiser_loss");
  r.classifier_loss = j.at("classifier_loss");
  r.detector_loss = j.at("detector_loss");
  r.held_in = j.at("held_in").get<std::vector<std::string>>();
  r.holdout = j.at("holdout").get<std::vector<std::string>>();
  return r;
}

}  // namespace

void save_family(const std::filesystem::path& path, const ToyFamily& f) {
  std::vector<io::NamedTensor> tensors = f.text->params().to_tensors("text/");
  auto append = [&](const ad::ParamSet& p, const std::string& prefix) {
    auto t = p.to_tensors(prefix);
    tensors.insert(tensors.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  };
  append(f.classifier->params(), "cls/");
  if (f.detector) append(f.detector->params(), "det/");
  if (f.denoiser) append(f.denoiser->params(), "gen/");
  json header = {{"kind", "toy_family"},
                 {"model_id", f.model_id},
                 {"variant", variant_name(f.variant)},
                 {"config", config_json(f.config)},
                 {"report", report_json(f.report)}};
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  io::write_container(path, std::move(header), tensors);
}

ToyFamily load_family(const std::filesystem::path& path) {
  const io::Container c = io::read_container(path);
  if (c.header.value("kind", "") != "toy_family")
    throw Error(ErrorCode::kFormat, path.string() + " is not a toy family checkpoint");
  ToyFamily f;
  f.model_id = c.header.at("model_id");
  f.variant = parse_variant(c.header.at("variant"));
  f.config = config_from_json(c.header.at("config"));
  f.report = report_from_json(c.header.at("report"));
  f.text = std::make_shared<ToyTextEncoder>(f.config.text, ad::ParamSet::from_container(c, "text/"));
  f.classifier = std::make_shared<ToyClassifier>(f.model_id, f.config.classifier, ad::ParamSet::from_container(c, "cls/"));
  if (f.config.has_detector)
    f.detector = std::make_shared<ToyDetector>(f.model_id, f.config.detector, ad::ParamSet::from_container(c, "det/"));
  if (f.config.has_denoiser)
    f.denoiser = std::make_shared<ToyDenoiser>(f.model_id, f.config.denoiser, ad::ParamSet::from_container(c, "gen/"));
  return f;
}

}  // namespace vw::toy
