#include "vw/toy/vision.hpp"

#include <algorithm>
#include <cmath>

#include "vw/ad/ops.hpp"
#include "vw/core/error.hpp"

namespace vw::toy {

namespace {

Matrix gaussian(int rows, int cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void add_conv(ad::ParamSet& p, const std::string& name, int cin, int cout, std::mt19937_64& rng, double gain = 1.0) {
  p.add(name + ".w", gaussian(9 * cin, cout, gain * std::sqrt(2.0 / (9.0 * cin)), rng));
  p.add(name + ".b", Matrix::Zero(1, cout));
}

void add_linear(ad::ParamSet& p, const std::string& name, int in, int out, std::mt19937_64& rng, double sd) {
  p.add(name + ".w", gaussian(in, out, sd, rng));
  p.add(name + ".b", Matrix::Zero(1, out));
}

ad::Var conv(ad::Binding& p, const std::string& name, ad::Var x, ad::MapShape shape) {
  return ad::conv3x3(x, p(name + ".w"), p(name + ".b"), shape);
}

ad::Var linear(ad::Binding& p, const std::string& name, ad::Var x) {
  return ad::add_row(ad::matmul(x, p(name + ".w")), p(name + ".b"));
}

Matrix pool2(const Matrix& m, int w, int h) {
  Matrix out(static_cast<Eigen::Index>(w / 2) * (h / 2), m.cols());
  for (int y = 0; y < h / 2; ++y)
    for (int x = 0; x < w / 2; ++x)
      out.row(y * (w / 2) + x) = 0.25 * (m.row(2 * y * w + 2 * x) + m.row(2 * y * w + 2 * x + 1) +
                                         m.row((2 * y + 1) * w + 2 * x) + m.row((2 * y + 1) * w + 2 * x + 1));
  return out;
}

Matrix nearest2(const Matrix& m, int w, int h) {
  Matrix out(static_cast<Eigen::Index>(4) * w * h, m.cols());
  for (int y = 0; y < 2 * h; ++y)
    for (int x = 0; x < 2 * w; ++x) out.row(y * 2 * w + x) = m.row((y / 2) * w + x / 2);
  return out;
}

}  // namespace

Matrix stack_images(const std::vector<const Image*>& images) {
  if (images.empty()) throw Error(ErrorCode::kInvalidInput, "stack_images: no images");
  const Eigen::Index px = static_cast<Eigen::Index>(images[0]->width) * images[0]->height;
  Matrix out(px * static_cast<Eigen::Index>(images.size()), 3);
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i]->width * images[i]->height != px) throw Error(ErrorCode::kDimensionMismatch, "stack_images: sizes differ");
    out.middleRows(static_cast<Eigen::Index>(i) * px, px) = image_to_matrix(*images[i]);
  }
  return out;
}

Image coarsen(const Image& image) {
  const Matrix m = image_to_matrix(image);
  return matrix_to_image(nearest2(pool2(m, image.width, image.height), image.width / 2, image.height / 2), image.width,
                         image.height);
}

// ---------------------------------------------------------------- classifier

ToyClassifier::ToyClassifier(std::string model_id, ClassifierConfig config, std::mt19937_64& rng)
    : model_id_(std::move(model_id)), config_(std::move(config)) {
  int cin = 3;
  for (size_t i = 0; i < config_.channels.size(); ++i) {
    add_conv(params_, "conv" + std::to_string(i), cin, config_.channels[i], rng);
    cin = config_.channels[i];
  }
  params_.add("proj", gaussian(cin, config_.feature_dim, 1.0 / std::sqrt(cin), rng));
}

ToyClassifier::ToyClassifier(std::string model_id, ClassifierConfig config, ad::ParamSet params)
    : model_id_(std::move(model_id)), config_(std::move(config)), params_(std::move(params)) {}

ad::Var ToyClassifier::forward(ad::Binding& p, const Matrix& pixels, int n) const {
  ad::Tape& tape = p.tape();
  int size = config_.image_size;
  ad::Var h = tape.constant(pixels);
  for (size_t i = 0; i < config_.channels.size(); ++i) {
    const ad::MapShape shape{n, size, size};
    h = ad::silu(conv(p, "conv" + std::to_string(i), h, shape));
    if (i + 1 < config_.channels.size()) {
      h = ad::avg_pool2(h, shape);
      size /= 2;
    }
  }
  std::vector<ad::PoolBox> whole;
  for (int i = 0; i < n; ++i) whole.push_back({i, 0, 0, size, size});
  return ad::matmul(ad::box_mean_pool(h, {n, size, size}, whole), p("proj"));
}

Vector ToyClassifier::embed_image(const Image& image) const { return embed_images({image}).row(0).transpose(); }

Matrix ToyClassifier::embed_images(const std::vector<Image>& images) const {
  Matrix out(static_cast<Eigen::Index>(images.size()), config_.feature_dim);
  constexpr size_t kChunk = 64;
  for (size_t start = 0; start < images.size(); start += kChunk) {
    const size_t end = std::min(images.size(), start + kChunk);
    std::vector<const Image*> ptrs;
    for (size_t i = start; i < end; ++i) ptrs.push_back(&images[i]);
    ad::Tape tape;
    ad::Binding b(tape, params_);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
        forward(b, stack_images(ptrs), static_cast<int>(ptrs.size())).value();
  }
  return out;
}

// ------------------------------------------------------------------ detector

ToyDetector::ToyDetector(std::string model_id, DetectorConfig config, std::mt19937_64& rng)
    : model_id_(std::move(model_id)), config_(std::move(config)) {
  int cin = 3;
  for (size_t i = 0; i < config_.channels.size(); ++i) {
    add_conv(params_, "conv" + std::to_string(i), cin, config_.channels[i], rng);
    cin = config_.channels[i];
  }
  const int in = 3 * cin + static_cast<int>(config_.scales.size());
  add_linear(params_, "r1", in, config_.hidden, rng, std::sqrt(2.0 / in));
  add_linear(params_, "r2", config_.hidden, config_.feature_dim, rng, 1.0 / std::sqrt(config_.hidden));
  params_.add("bg", gaussian(1, config_.feature_dim, 1.0, rng));
  build_anchors();
}

ToyDetector::ToyDetector(std::string model_id, DetectorConfig config, ad::ParamSet params)
    : model_id_(std::move(model_id)), config_(std::move(config)), params_(std::move(params)) {
  build_anchors();
}

void ToyDetector::build_anchors() {
  const int stride = config_.image_size / config_.grid;
  for (size_t si = 0; si < config_.scales.size(); ++si) {
    const int s = config_.scales[si];
    for (int y = 0; y + s <= config_.image_size; y += stride)
      for (int x = 0; x + s <= config_.image_size; x += stride)
        anchors_.push_back({double(x), double(y), double(x + s), double(y + s), std::nullopt});
  }
}

ad::Var ToyDetector::feature_map(ad::Binding& p, const Matrix& pixels, int n) const {
  const int full = config_.image_size, half = map_size();
  ad::Var h = ad::silu(conv(p, "conv0", p.tape().constant(pixels), {n, full, full}));
  h = ad::avg_pool2(h, {n, full, full});
  for (size_t i = 1; i < config_.channels.size(); ++i) h = ad::silu(conv(p, "conv" + std::to_string(i), h, {n, half, half}));
  return h;
}

ad::Var ToyDetector::region_features(ad::Binding& p, ad::Var fmap, int n,
                                     const std::vector<std::pair<int, int>>& regions) const {
  const int m = map_size();
  auto cells = [&](double lo, double hi, int item, double ylo, double yhi) {
    auto c0 = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / 2)), 0, m - 1); };
    auto c1 = [&](double v, int start) { return std::clamp(static_cast<int>(std::ceil(v / 2)), start + 1, m); };
    const int x0 = c0(lo), y0 = c0(ylo);
    return ad::PoolBox{item, y0, x0, c1(yhi, y0), c1(hi, x0)};
  };
  std::vector<ad::PoolBox> inner, centre, context;
  Matrix scale_hot = Matrix::Zero(static_cast<Eigen::Index>(regions.size()), static_cast<Eigen::Index>(config_.scales.size()));
  for (size_t r = 0; r < regions.size(); ++r) {
    const auto [item, a] = regions[r];
    const tasks::Box& b = anchors_.at(static_cast<size_t>(a));
    const double q = b.width() / 4;
    inner.push_back(cells(b.x_min, b.x_max, item, b.y_min, b.y_max));
    centre.push_back(cells(b.x_min + q, b.x_max - q, item, b.y_min + q, b.y_max - q));
    context.push_back(cells(b.x_min - q, b.x_max + q, item, b.y_min - q, b.y_max + q));
    const auto si = std::find(config_.scales.begin(), config_.scales.end(), static_cast<int>(b.width())) - config_.scales.begin();
    scale_hot(static_cast<Eigen::Index>(r), si) = 1.0;
  }
  const ad::MapShape shape{n, m, m};
  ad::Var x = ad::concat_cols({ad::box_mean_pool(fmap, shape, inner), ad::box_mean_pool(fmap, shape, centre),
                               ad::box_mean_pool(fmap, shape, context), p.tape().constant(std::move(scale_hot))});
  return linear(p, "r2", ad::silu(linear(p, "r1", x)));
}

tasks::RegionSet ToyDetector::propose(const Image& image) const {
  ad::Tape tape;
  ad::Binding b(tape, params_);
  ad::Var fmap = feature_map(b, stack_images({&image}), 1);
  std::vector<std::pair<int, int>> all;
  for (size_t a = 0; a < anchors_.size(); ++a) all.emplace_back(0, static_cast<int>(a));
  return {anchors_, region_features(b, fmap, 1, all).value()};
}

// ------------------------------------------------------------------ denoiser

ToyDenoiser::ToyDenoiser(std::string model_id, DenoiserConfig config, std::mt19937_64& rng)
    : model_id_(std::move(model_id)), config_(std::move(config)), schedule_(tasks::DiffusionSchedule::cosine(config_.n_steps)) {
  const int c1 = config_.c1, c2 = config_.c2, e = config_.hidden;
  const int cin = config_.cond_dim + config_.time_dim;
  add_linear(params_, "emb", cin, e, rng, std::sqrt(1.0 / cin));
  add_linear(params_, "film0", e, 2 * c1, rng, 0.02);
  add_linear(params_, "film1", e, 2 * c2, rng, 0.02);
  add_linear(params_, "film2", e, 2 * c1, rng, 0.02);
  add_conv(params_, "in", 3, c1, rng);
  add_conv(params_, "in2", c1, c1, rng);
  add_conv(params_, "down", c1, c2, rng);
  add_conv(params_, "mid", c2, c2, rng);
  add_conv(params_, "up", c1 + c2, c1, rng);
  add_conv(params_, "out", c1, 3, rng, 0.1);
}

ToyDenoiser::ToyDenoiser(std::string model_id, DenoiserConfig config, ad::ParamSet params)
    : model_id_(std::move(model_id)),
      config_(std::move(config)),
      params_(std::move(params)),
      schedule_(tasks::DiffusionSchedule::cosine(config_.n_steps)) {}

tasks::LatentShape ToyDenoiser::latent_shape() const {
  return {config_.image_size / 2, config_.image_size / 2, 3};
}

Matrix ToyDenoiser::encode_latent(const Image& image) const {
  if (image.width != config_.image_size || image.height != config_.image_size)
    throw Error(ErrorCode::kDimensionMismatch, "denoiser: image size");
  return pool2(image_to_matrix(image), image.width, image.height);
}

Image ToyDenoiser::decode_latent(const Matrix& latent) const {
  const int h = config_.image_size / 2;
  return matrix_to_image(nearest2(latent, h, h), config_.image_size, config_.image_size);
}

Matrix ToyDenoiser::time_embedding(const std::vector<int>& t) const {
  const int half = config_.time_dim / 2;
  Matrix out(static_cast<Eigen::Index>(t.size()), config_.time_dim);
  for (size_t i = 0; i < t.size(); ++i) {
    const double pos = 1000.0 * t[i] / config_.n_steps;
    for (int k = 0; k < half; ++k) {
      const double f = std::pow(10000.0, -static_cast<double>(k) / half);
      out(static_cast<Eigen::Index>(i), k) = std::sin(pos * f);
      out(static_cast<Eigen::Index>(i), half + k) = std::cos(pos * f);
    }
  }
  return out;
}

ad::Var ToyDenoiser::predict_noise(ad::Tape& tape, ad::Var z_t, const std::vector<int>& t, ad::Var cond) const {
  ad::Binding b(tape, params_);
  ad::Var v = forward(b, z_t, t, cond);
  // eps = sqrt(1 - ab) z + sqrt(ab) v
  const Eigen::Index n = static_cast<Eigen::Index>(t.size());
  Matrix sz(n, 3), sv(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ab = schedule_.alpha_bar[t[static_cast<size_t>(i)]];
    sz.row(i).setConstant(std::sqrt(1.0 - ab) - 1.0);
    sv.row(i).setConstant(std::sqrt(ab) - 1.0);
  }
  const int pixels = latent_shape().pixels();
  ad::Var zero = tape.constant(Matrix::Zero(n, 3));
  return ad::add(ad::film(z_t, tape.constant(std::move(sz)), zero, pixels),
                 ad::film(v, tape.constant(std::move(sv)), zero, pixels));
}

ad::Var ToyDenoiser::forward(ad::Binding& p, ad::Var z_t, const std::vector<int>& t, ad::Var cond) const {
  const int n = static_cast<int>(t.size());
  const int s = config_.image_size / 2, c1 = config_.c1, c2 = config_.c2;
  if (cond.rows() != n || cond.cols() != config_.cond_dim)
    throw Error(ErrorCode::kDimensionMismatch, "denoiser: condition shape");
  if (z_t.rows() != static_cast<Eigen::Index>(n) * s * s || z_t.cols() != 3)
    throw Error(ErrorCode::kDimensionMismatch, "denoiser: latent shape");
  for (int ti : t)
    if (ti < 0 || ti >= config_.n_steps) throw Error(ErrorCode::kInvalidInput, "denoiser: timestep out of range");
  ad::Tape& tape = p.tape();
  ad::Var e = ad::silu(linear(p, "emb", ad::concat_cols({cond, tape.constant(time_embedding(t))})));
  auto film = [&](const std::string& name, ad::Var h, int c, int pixels) {
    ad::Var ss = linear(p, name, e);
    return ad::film(h, ad::slice_cols(ss, 0, c), ad::slice_cols(ss, c, c), pixels);
  };
  const ad::MapShape hi{n, s, s}, lo{n, s / 2, s / 2};
  ad::Var h = film("film0", conv(p, "in", z_t, hi), c1, hi.pixels());
  ad::Var h1 = ad::silu(conv(p, "in2", ad::silu(h), hi));
  ad::Var d = film("film1", conv(p, "down", ad::avg_pool2(h1, hi), lo), c2, lo.pixels());
  ad::Var h2 = ad::silu(conv(p, "mid", ad::silu(d), lo));
  ad::Var u = ad::concat_cols({ad::upsample2(h2, lo), h1});
  ad::Var h3 = film("film2", conv(p, "up", u, hi), c1, hi.pixels());
  return conv(p, "out", ad::silu(h3), hi);
}

}  // namespace vw::toy
