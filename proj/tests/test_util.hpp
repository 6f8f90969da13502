#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dialbench/tape.hpp"
#include "dialbench/tensor.hpp"

namespace dialbench::testutil {

/// Central-difference gradient check against an arbitrary scalar function of
/// the parameters. Unlike finite_diff_check this never touches the tape, so
/// it is an independent oracle for objectives that build their own graphs.
inline double max_grad_error(Parameters& params,
                             const std::function<double()>& value_fn,
                             const std::vector<Tensor>& analytic,
                             double h = 1e-5) {
  double worst = 0.0;
  for (int slot = 0; slot < params.count(); ++slot) {
    Tensor& t = params.value(slot);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + h;
      params.bump();
      const double up = value_fn();
      t[i] = saved - h;
      params.bump();
      const double down = value_fn();
      t[i] = saved;
      params.bump();
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[slot][i] - numeric) /
                         (std::abs(numeric) + 1e-12);
      if (err > worst) worst = err;
    }
  }
  return worst;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace dialbench::testutil
