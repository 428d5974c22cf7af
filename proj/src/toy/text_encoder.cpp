#include "vw/toy/text_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "vw/ad/ops.hpp"
#include "vw/core/error.hpp"
#include "vw/toy/scene.hpp"

namespace vw::toy {

namespace {

Matrix gaussian(int rows, int cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::string block_name(int b, const char* leaf) { return "blk" + std::to_string(b) + "." + leaf; }

}  // namespace

void ToyTextEncoder::build_vocabulary() {
  const bool marker = config_.style == TokenStyle::kMarker;
  const std::vector<std::string> specials = marker ? std::vector<std::string>{"[BOS]", "[POOL]", "[PAD]", "[V]"}
                                                   : std::vector<std::string>{"<bos>", "<pool>", "<pad>", "<v>"};
  tokens_ = specials;
  specials_ = {specials.begin(), specials.end()};
  for (const auto& w : vocabulary_words()) tokens_.push_back(token_for(w));
  bos_ = 0, pool_ = 1, pad_ = 2, placeholder_ = 3;
}

std::string ToyTextEncoder::token_for(const std::string& word) const {
  return config_.style == TokenStyle::kMarker ? "\xE2\x96\x81" + word : word;
}

ToyTextEncoder::ToyTextEncoder(TextConfig config, std::mt19937_64& rng) : config_(std::move(config)) {
  build_vocabulary();
  const int d = config_.dim, v = static_cast<int>(tokens_.size());
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  params_.add("tok_embed", gaussian(v, d, 0.3, rng));
  params_.add("w_in", gaussian(d, d, s, rng) + Matrix::Identity(d, d));
  params_.add("pos_embed", gaussian(config_.max_len, d, 0.1, rng));
  const double out_scale = s / std::sqrt(2.0 * config_.blocks);
  for (int b = 0; b < config_.blocks; ++b) {
    params_.add(block_name(b, "ln1.g"), Matrix::Ones(1, d));
    params_.add(block_name(b, "ln1.b"), Matrix::Zero(1, d));
    params_.add(block_name(b, "wq"), gaussian(d, d, s, rng));
    params_.add(block_name(b, "wk"), gaussian(d, d, s, rng));
    params_.add(block_name(b, "wv"), gaussian(d, d, s, rng));
    params_.add(block_name(b, "wo"), gaussian(d, d, out_scale, rng));
    params_.add(block_name(b, "ln2.g"), Matrix::Ones(1, d));
    params_.add(block_name(b, "ln2.b"), Matrix::Zero(1, d));
    params_.add(block_name(b, "w1"), gaussian(d, config_.mlp_mult * d, s, rng));
    params_.add(block_name(b, "b1"), Matrix::Zero(1, config_.mlp_mult * d));
    params_.add(block_name(b, "w2"), gaussian(config_.mlp_mult * d, d, out_scale, rng));
    params_.add(block_name(b, "b2"), Matrix::Zero(1, d));
  }
  params_.add("ln_f.g", Matrix::Ones(1, d));
  params_.add("ln_f.b", Matrix::Zero(1, d));
  params_.add("proj", gaussian(d, config_.feature_dim, s, rng));
  table_ = std::make_shared<embedding::EmbeddingTable>(config_.model_id, tokens_, params_.get("tok_embed"), specials_);
}

ToyTextEncoder::ToyTextEncoder(TextConfig config, ad::ParamSet params) : config_(std::move(config)) {
  build_vocabulary();
  set_params(std::move(params));
}

void ToyTextEncoder::set_params(ad::ParamSet params) {
  const Matrix& e = params.get("tok_embed");
  if (e.rows() != static_cast<Eigen::Index>(tokens_.size()) || e.cols() != config_.dim)
    throw Error(ErrorCode::kDimensionMismatch, "text encoder: token embedding shape");
  params_ = std::move(params);
  table_ = std::make_shared<embedding::EmbeddingTable>(config_.model_id, tokens_, params_.get("tok_embed"), specials_);
}

void ToyTextEncoder::set_model_id(std::string id) {
  config_.model_id = std::move(id);
  table_ = std::make_shared<embedding::EmbeddingTable>(config_.model_id, tokens_, params_.get("tok_embed"), specials_);
}

tasks::TokenSequence ToyTextEncoder::tokenize(std::string_view text, int k) const {
  tasks::TokenSequence seq;
  seq.ids.push_back(bos_);
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j == i) break;
    std::string_view word = text.substr(i, j - i);
    // "{}" may be glued to neighbouring words only through spaces.
    if (word == "{}") {
      if (k < 1) throw Error(ErrorCode::kInvalidInput, "tokenize: placeholder without vectors");
      for (int r = 0; r < k; ++r) {
        seq.placeholders.push_back(static_cast<int>(seq.ids.size()));
        seq.ids.push_back(placeholder_);
      }
    } else {
      const auto id = table_->find(token_for(std::string(word)));
      if (!id) throw Error(ErrorCode::kNotFound, "tokenize: '" + std::string(word) + "' is not in the vocabulary");
      seq.ids.push_back(*id);
    }
    i = j;
  }
  seq.pool = static_cast<int>(seq.ids.size());
  seq.ids.push_back(pool_);
  if (static_cast<int>(seq.ids.size()) > config_.max_len)
    throw Error(ErrorCode::kInvalidInput, "tokenize: sequence longer than " + std::to_string(config_.max_len));
  return seq;
}

tasks::Encoded ToyTextEncoder::encode(ad::Tape& tape, const std::vector<tasks::TokenSequence>& seqs,
                                      ad::Var injected, const tasks::EncodeOptions& options) const {
  ad::Binding binding(tape, params_);
  return forward(binding, seqs, injected, options);
}

tasks::Encoded ToyTextEncoder::forward(ad::Binding& p, const std::vector<tasks::TokenSequence>& seqs,
                                       ad::Var injected, const tasks::EncodeOptions& options) const {
  if (seqs.empty()) throw Error(ErrorCode::kInvalidInput, "encode: no sequences");
  const int n_blocks = options.n_blocks == 0 ? config_.blocks : options.n_blocks;
  if (n_blocks < 1 || n_blocks > config_.blocks)
    throw Error(ErrorCode::kInvalidInput, "encode: n_blocks outside [1, " + std::to_string(config_.blocks) + "]");
  for (int layer : options.capture_layers)
    if (layer < 1 || layer > n_blocks) throw Error(ErrorCode::kInvalidInput, "encode: capture layer out of range");

  const int n = static_cast<int>(seqs.size());
  int len = 0;
  for (const auto& s : seqs) len = std::max(len, static_cast<int>(s.ids.size()));
  std::vector<int> ids(static_cast<size_t>(n) * len, pad_), pos(ids.size()), pools, slots;
  for (int s = 0; s < n; ++s) {
    for (int j = 0; j < len; ++j) pos[static_cast<size_t>(s) * len + j] = j;
    for (size_t j = 0; j < seqs[s].ids.size(); ++j) ids[static_cast<size_t>(s) * len + j] = seqs[s].ids[j];
    pools.push_back(s * len + seqs[s].pool);
    if (injected.valid() && !seqs[s].placeholders.empty()) {
      if (static_cast<Eigen::Index>(seqs[s].placeholders.size()) != injected.rows())
        throw Error(ErrorCode::kDimensionMismatch, "encode: placeholder count differs from injected rows");
      for (int ph : seqs[s].placeholders) slots.push_back(s * len + ph);
    }
  }
  if (injected.valid() && injected.cols() != config_.dim)
    throw Error(ErrorCode::kDimensionMismatch, "encode: injected width");

  ad::Var x = ad::rows(p("tok_embed"), ids);
  if (!slots.empty()) {
    const int copies = static_cast<int>(slots.size() / injected.rows());
    std::vector<ad::Var> parts(copies, injected);
    x = ad::replace_rows(x, slots, copies == 1 ? injected : ad::concat_rows(parts));
  }
  ad::Var h = ad::add(ad::matmul(x, p("w_in")), ad::rows(p("pos_embed"), pos));

  auto head = [&](ad::Var hidden) {
    ad::Var pooled = ad::rows(hidden, pools);
    return ad::matmul(ad::layer_norm(pooled, p("ln_f.g"), p("ln_f.b")), p("proj"));
  };

  tasks::Encoded out;
  for (int b = 0; b < n_blocks; ++b) {
    ad::Var a = ad::layer_norm(h, p(block_name(b, "ln1.g")), p(block_name(b, "ln1.b")));
    ad::Var att = ad::attention(ad::matmul(a, p(block_name(b, "wq"))), ad::matmul(a, p(block_name(b, "wk"))),
                                ad::matmul(a, p(block_name(b, "wv"))), n, len, config_.heads, true);
    h = ad::add(h, ad::matmul(att, p(block_name(b, "wo"))));
    ad::Var m = ad::layer_norm(h, p(block_name(b, "ln2.g")), p(block_name(b, "ln2.b")));
    m = ad::silu(ad::add_row(ad::matmul(m, p(block_name(b, "w1"))), p(block_name(b, "b1"))));
    h = ad::add(h, ad::add_row(ad::matmul(m, p(block_name(b, "w2"))), p(block_name(b, "b2"))));
    if (std::find(options.capture_layers.begin(), options.capture_layers.end(), b + 1) != options.capture_layers.end())
      out.captured.push_back(head(h));
  }
  out.features = head(h);
  return out;
}

}  // namespace vw::toy
