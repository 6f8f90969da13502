#include "dialbench/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dialbench {

double softplus(double rho) {
  return std::log1p(std::exp(-std::fabs(rho))) + (rho > 0.0 ? rho : 0.0);
}

Tensor softplus(const Tensor& rho) {
  check_finite(rho, "softplus input");
  Tensor out = rho;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus(out[i]);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

Tensor sample_weights(const VariationalParams& vp, const Tensor& eps) {
  check_same_shape(vp.mu, vp.rho, "variational params");
  check_same_shape(vp.mu, eps, "sample_weights eps");
  Tensor w = vp.mu;
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] += softplus(vp.rho[i]) * eps[i];
  return w;
}

double kl_diag_gaussian(const VariationalParams& vp, const GaussianPrior& prior) {
  if (!(prior.stddev > 0.0)) throw ConfigError("prior stddev must be positive");
  check_same_shape(vp.mu, vp.rho, "variational params");
  double s0 = prior.stddev;
  double acc = 0.0;
  for (std::size_t i = 0; i < vp.mu.size(); ++i) {
    double sigma = softplus(vp.rho[i]);
    double dm = vp.mu[i] - prior.mean;
    acc += std::log(s0 / sigma) + (sigma * sigma + dm * dm) / (2.0 * s0 * s0) - 0.5;
  }
  return acc;
}

Tensor dropout_mask(const DropoutSpec& spec, std::vector<int> shape, Rng& rng) {
  if (!(spec.rate > 0.0 && spec.rate < 1.0))
    throw ConfigError("dropout rate must lie in (0,1)");
  Tensor mask = Tensor::zeros(std::move(shape));
  double keep_scale = 1.0 / (1.0 - spec.rate);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.uniform() < spec.rate ? 0.0 : keep_scale;
  return mask;
}

double concrete_z(double rate_logit, double u, double temperature) {
  u = std::clamp(u, 1e-7, 1.0 - 1e-7);
  const double z = sigmoid((rate_logit + std::log(u) - std::log1p(-u)) / temperature);
  // The sigmoid saturates to an exact 0 or 1 once |argument| passes ~37 (easy
  // at low temperature); keep the gate strictly inside the open interval.
  return std::clamp(z, std::numeric_limits<double>::min(),
                    1.0 - std::numeric_limits<double>::epsilon() / 2.0);
}

Tensor concrete_relaxation(const DropoutSpec& spec, const Tensor& u) {
  if (!(spec.rate > 0.0 && spec.rate < 1.0))
    throw ConfigError("dropout rate must lie in (0,1)");
  if (!(spec.temperature > 0.0))
    throw ConfigError("concrete temperature must be positive");
  double rate_logit = logit(spec.rate);
  Tensor z = u;
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = concrete_z(rate_logit, z[i], spec.temperature);
  return z;
}

}  // namespace dialbench
