#include "vw/ad/params.hpp"

#include <cstring>

#include "vw/core/digest.hpp"
#include "vw/core/error.hpp"

namespace vw::ad {

Matrix& ParamSet::add(const std::string& name, Matrix init) {
  auto [it, inserted] = params_.emplace(name, std::move(init));
  if (!inserted) throw Error(ErrorCode::kInvalidInput, "duplicate parameter '" + name + "'");
  return it->second;
}

Matrix& ParamSet::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::kNotFound, "parameter '" + name + "'");
  return it->second;
}

const Matrix& ParamSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::kNotFound, "parameter '" + name + "'");
  return it->second;
}

size_t ParamSet::scalar_count() const {
  size_t n = 0;
  for (const auto& [_, m] : params_) n += static_cast<size_t>(m.size());
  return n;
}

std::string ParamSet::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, m] : params_) {
    h = fnv1a64(name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double)), h);
  }
  return hex64(h);
}

void ParamSet::round_to_float() {
  for (auto& [_, m] : params_) m = io::round_to_float(m);
}

std::vector<io::NamedTensor> ParamSet::to_tensors(const std::string& prefix) const {
  std::vector<io::NamedTensor> out;
  out.reserve(params_.size());
  for (const auto& [name, m] : params_) out.push_back({prefix + name, m});
  return out;
}

ParamSet ParamSet::from_container(const io::Container& c, const std::string& prefix) {
  ParamSet p;
  for (const auto& t : c.tensors) {
    if (t.name.rfind(prefix, 0) == 0) p.add(t.name.substr(prefix.size()), t.value);
  }
  return p;
}

Binding::Binding(Tape& tape, const ParamSet& params, Predicate trainable)
    : tape_(tape), params_(params), trainable_(std::move(trainable)) {}

Var Binding::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Matrix& value = params_.get(name);
  Var v = trainable_ && trainable_(name) ? tape_.variable(value) : tape_.constant(value);
  bound_.emplace(name, v);
  return v;
}

std::map<std::string, Matrix> Binding::gradients() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, v] : bound_) {
    if (v.requires_grad()) out.emplace(name, v.grad());
  }
  return out;
}

}  // namespace vw::ad
