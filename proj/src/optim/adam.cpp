#include "vw/optim/adam.hpp"

#include <cmath>

#include "vw/core/error.hpp"

namespace vw::optim {

void Adam::update(const std::string& key, Matrix& param, const Matrix& grad) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "adam: gradient shape for '" + key + "'");
  }
  Moments& s = state_[key];
  if (s.t == 0) {
    s.m = Matrix::Zero(param.rows(), param.cols());
    s.v = Matrix::Zero(param.rows(), param.cols());
  }
  ++s.t;
  s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * grad;
  s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(s.t));
  param.array() -= config_.learning_rate * (s.m.array() / c1) /
                   ((s.v.array() / c2).sqrt() + config_.epsilon);
}

void Adam::update(ad::ParamSet& params, const std::map<std::string, Matrix>& grads) {
  for (const auto& [name, g] : grads) update(name, params.get(name), g);
}

}  // namespace vw::optim
