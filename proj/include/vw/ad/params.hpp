#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vw/ad/tape.hpp"
#include "vw/core/container.hpp"

namespace vw::ad {

/// Named, ordered collection of model weights.
class ParamSet {
 public:
  Matrix& add(const std::string& name, Matrix init);
  Matrix& get(const std::string& name);
  const Matrix& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  const std::map<std::string, Matrix>& all() const { return params_; }
  size_t size() const { return params_.size(); }
  size_t scalar_count() const;

  /// Hash over every value; equal fingerprints mean identical weights.
  std::string fingerprint() const;
  void round_to_float();

  std::vector<io::NamedTensor> to_tensors(const std::string& prefix = "") const;
  /// Loads every tensor whose name starts with `prefix`, stripping the prefix.
  static ParamSet from_container(const io::Container& c, const std::string& prefix = "");

 private:
  std::map<std::string, Matrix> params_;
};

/// Binds parameters onto a tape, as gradient leaves when `trainable(name)`
/// holds and as constants otherwise.
class Binding {
 public:
  using Predicate = std::function<bool(const std::string&)>;

  Binding(Tape& tape, const ParamSet& params, Predicate trainable = nullptr);

  Var operator()(const std::string& name);
  Tape& tape() const { return tape_; }

  /// Gradients of every trainable parameter bound so far.
  std::map<std::string, Matrix> gradients() const;

 private:
  Tape& tape_;
  const ParamSet& params_;
  Predicate trainable_;
  std::map<std::string, Var> bound_;
};

}  // namespace vw::ad
