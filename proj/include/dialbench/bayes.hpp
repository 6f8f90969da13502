#pragma once

#include "dialbench/rng.hpp"
#include "dialbench/tensor.hpp"

namespace dialbench {

/// Isotropic Gaussian prior over weights.
struct GaussianPrior {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Mean-field Gaussian posterior over one weight tensor: per-entry mean mu
/// and pre-scale rho, with stddev = softplus(rho) > 0.
struct VariationalParams {
  Tensor mu;
  Tensor rho;
};

/// Dropout configuration. For the concrete variant the rate is stored as an
/// unconstrained logit so it can be trained by gradient descent.
struct DropoutSpec {
  double rate = 0.1;
  double temperature = 0.1;
};

/// log(1 + exp(rho)), evaluated as log1p(exp(-|rho|)) + max(rho, 0) so it
/// neither overflows for large rho nor underflows to zero for large -rho.
double softplus(double rho);
Tensor softplus(const Tensor& rho);

double sigmoid(double x);
double logit(double p);

/// Reparameterized weight sample w = mu + softplus(rho) * eps, elementwise.
Tensor sample_weights(const VariationalParams& vp, const Tensor& eps);

/// Closed-form KL[q || prior] summed over entries, with q the diagonal
/// Gaussian N(mu, softplus(rho)^2) and an isotropic Gaussian prior.
double kl_diag_gaussian(const VariationalParams& vp, const GaussianPrior& prior);

/// Inverted-scaling Bernoulli mask: each entry is 0 with probability rate,
/// else 1/(1-rate), so the deterministic pass needs no rescaling.
Tensor dropout_mask(const DropoutSpec& spec, std::vector<int> shape, Rng& rng);

/// Concrete relaxation of the Bernoulli drop indicator:
///   z = sigmoid((log d - log(1-d) + log u - log(1-u)) / t)
/// z in (0,1) and rounds to 1 with probability d as t -> 0. The layer keep
/// gate is 1 - z. u entries are clamped into [1e-7, 1-1e-7].
Tensor concrete_relaxation(const DropoutSpec& spec, const Tensor& u);

/// Scalar relaxation evaluated from the drop-rate logit directly; shared by
/// the value-level op above and the tape construction in the network.
double concrete_z(double rate_logit, double u, double temperature);

}  // namespace dialbench
