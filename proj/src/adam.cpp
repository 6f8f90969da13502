#include "dialbench/adam.hpp"

#include <cmath>

namespace dialbench {

AdamState::AdamState(const Parameters& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.count());
  v_.reserve(params.count());
  for (int s = 0; s < params.count(); ++s) {
    m_.push_back(Tensor::zeros(params.value(s).shape()));
    v_.push_back(Tensor::zeros(params.value(s).shape()));
  }
}

void AdamState::step(Parameters& params, const std::vector<Tensor>& grads, double lr) {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (static_cast<int>(grads.size()) != params.count())
    throw ShapeError("adam: gradient count does not match parameter count");
  for (int s = 0; s < params.count(); ++s) {
    check_same_shape(grads[s], params.value(s), "adam gradient");
    check_finite(grads[s], "adam gradient");
  }

  ++step_;
  double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (int s = 0; s < params.count(); ++s) {
    Tensor& theta = params.value(s);
    Tensor& m = m_[s];
    Tensor& v = v_[s];
    const Tensor& g = grads[s];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      double mhat = m[j] / c1;
      double vhat = v[j] / c2;
      theta[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  params.bump();
}

}  // namespace dialbench
