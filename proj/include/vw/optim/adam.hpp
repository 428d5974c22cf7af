#pragma once

#include <map>
#include <string>

#include "vw/ad/params.hpp"
#include "vw/core/types.hpp"

namespace vw::optim {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with per-tensor moment buffers and bias correction.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  void update(const std::string& key, Matrix& param, const Matrix& grad);
  void update(ad::ParamSet& params, const std::map<std::string, Matrix>& grads);

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
    long long t = 0;
  };
  AdamConfig config_;
  std::map<std::string, Moments> state_;
};

}  // namespace vw::optim
