#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

#include "dialbench/checkpoint.hpp"
#include "dialbench/errors.hpp"
#include "dialbench/gpsarsa.hpp"
#include "dialbench/rng.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace dialbench;

namespace {

GpConfig gp_config(int actions, double nu, double prior = 1.0,
                   double sigma = 1.5, double gamma = 0.9) {
  GpConfig cfg;
  cfg.num_actions = actions;
  cfg.gamma = gamma;
  cfg.sigma_obs = sigma;
  cfg.prior_scale = prior;
  cfg.nu = nu;
  return cfg;
}

// Dense Gauss-Jordan inverse used by the mirror computations below; kept
// independent from the library's solver on purpose.
std::vector<double> dense_inverse(std::vector<double> m, int k) {
  std::vector<double> inv(static_cast<std::size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) inv[i * k + i] = 1.0;
  for (int col = 0; col < k; ++col) {
    int pivot = col;
    for (int r = col + 1; r < k; ++r) {
      if (std::fabs(m[r * k + col]) > std::fabs(m[pivot * k + col])) pivot = r;
    }
    REQUIRE(std::fabs(m[pivot * k + col]) > 1e-13);
    for (int j = 0; j < k; ++j) {
      std::swap(m[pivot * k + j], m[col * k + j]);
      std::swap(inv[pivot * k + j], inv[col * k + j]);
    }
    const double d = m[col * k + col];
    for (int j = 0; j < k; ++j) {
      m[col * k + j] /= d;
      inv[col * k + j] /= d;
    }
    for (int r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = m[r * k + col];
      for (int j = 0; j < k; ++j) {
        m[r * k + j] -= f * m[col * k + j];
        inv[r * k + j] -= f * inv[col * k + j];
      }
    }
  }
  return inv;
}

double scaled_kernel(double prior, const Tensor& b, int a, const Tensor& b2,
                     int a2) {
  return prior * linear_delta_kernel(b, a, b2, a2);
}

}  // namespace

TEST_CASE("the kernel multiplies a linear belief overlap by an action delta") {
  const Tensor b = Tensor::vector({1.0, 0.0, 2.0});
  CHECK(linear_delta_kernel(b, 3, b, 3) == 5.0);
  CHECK(linear_delta_kernel(b, 3, b, 4) == 0.0);
  const Tensor c = Tensor::vector({-1.0, 2.0, 0.5});
  CHECK(linear_delta_kernel(b, 0, c, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(linear_delta_kernel(b, 1, c, 2) == 0.0);
  const Tensor zero = Tensor::vector({0.0, 0.0, 0.0});
  CHECK(linear_delta_kernel(zero, 0, zero, 0) == 0.0);
  const Tensor shorter = Tensor::vector({1.0, 2.0});
  CHECK_THROWS_AS(linear_delta_kernel(b, 0, shorter, 0), ShapeError);
}

TEST_CASE("gp configuration is validated") {
  CHECK_THROWS_AS(GpSarsa{gp_config(0, 0.1)}, ConfigError);
  GpConfig bad = gp_config(2, 0.1);
  bad.sigma_obs = 0.0;
  CHECK_THROWS_AS(GpSarsa{bad}, ConfigError);
  bad = gp_config(2, 0.1);
  bad.prior_scale = -1.0;
  CHECK_THROWS_AS(GpSarsa{bad}, ConfigError);
  bad = gp_config(2, 0.1);
  bad.dictionary_cap = 0;
  CHECK_THROWS_AS(GpSarsa{bad}, ConfigError);
  bad = gp_config(2, 0.1);
  bad.gamma = 1.0;
  CHECK_THROWS_AS(GpSarsa{bad}, ConfigError);
}

TEST_CASE("an empty model admits any point whose self-similarity clears nu") {
  GpSarsa gp(gp_config(2, 0.01));
  const auto in = gp.admit(Tensor::vector({1.0, 0.0}), 0);
  CHECK(in.admitted);
  CHECK(in.residual == 1.0);  // kxx of the first point
  CHECK(gp.dictionary_size() == 1);

  GpSarsa fresh(gp_config(2, 0.01));
  const auto out = fresh.admit(Tensor::vector({0.0, 0.0}), 1);
  CHECK_FALSE(out.admitted);
  CHECK(out.residual == 0.0);
  CHECK(fresh.dictionary_size() == 0);

  CHECK_THROWS_AS(fresh.admit(Tensor::vector({1.0, 0.0}), 5), ConfigError);
  CHECK_THROWS_AS(fresh.admit(Tensor::vector({1.0, 0.0}), -1), ConfigError);
}

TEST_CASE("an exact duplicate is rejected with a near-zero residual") {
  GpSarsa gp(gp_config(3, 0.01, 2.0));
  const Tensor b = Tensor::vector({1.0, 0.5, -0.25});
  CHECK(gp.admit(b, 1).admitted);
  const auto dup = gp.admit(b, 1);
  CHECK_FALSE(dup.admitted);
  CHECK(std::fabs(dup.residual) <= 1e-10);
  CHECK(gp.dictionary_size() == 1);

  // Same belief under another action is orthogonal in kernel space.
  CHECK(gp.admit(b, 2).admitted);
  CHECK(gp.dictionary_size() == 2);
}

TEST_CASE("admission decisions match a dense residual computation") {
  const double prior = 1.7;
  const double nu = 0.01;
  GpSarsa gp(gp_config(3, nu, prior));
  Rng rng(401);

  std::vector<Tensor> mirror_b;
  std::vector<int> mirror_a;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor b = rng.normal_tensor({5});
    const int a = static_cast<int>(rng.uniform_int(3));
    const auto got = gp.admit(b, a);

    const double kxx = scaled_kernel(prior, b, a, b, a);
    double residual = kxx;
    const int k = static_cast<int>(mirror_b.size());
    if (k > 0) {
      std::vector<double> gram(static_cast<std::size_t>(k) * k);
      std::vector<double> kvec(k);
      for (int i = 0; i < k; ++i) {
        kvec[i] = scaled_kernel(prior, b, a, mirror_b[i], mirror_a[i]);
        for (int j = 0; j < k; ++j) {
          gram[i * k + j] = scaled_kernel(prior, mirror_b[i], mirror_a[i],
                                          mirror_b[j], mirror_a[j]);
        }
      }
      const std::vector<double> ginv = dense_inverse(gram, k);
      double quad = 0.0;
      for (int i = 0; i < k; ++i) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += ginv[i * k + j] * kvec[j];
        quad += kvec[i] * s;
      }
      residual = kxx - quad;
    }
    const bool expect = k == 0 ? kxx > nu : (residual > nu && residual >= 1e-12);
    CHECK(got.admitted == expect);
    CHECK(got.residual == doctest::Approx(residual).epsilon(1e-8));
    if (expect) {
      mirror_b.push_back(b);
      mirror_a.push_back(a);
    }
  }
  CHECK(gp.dictionary_size() == static_cast<int>(mirror_b.size()));
  // 5-dim beliefs x 3 actions bound the reachable span at 15 rows; the run
  // above must have both admitted and rejected something.
  CHECK(gp.dictionary_size() >= 2);
  CHECK(gp.dictionary_size() < 20);
}

TEST_CASE("the automatic threshold tracks mean self-similarity") {
  GpSarsa gp(gp_config(2, -1.0));
  CHECK(gp.threshold_now() == 0.0);
  gp.admit(Tensor::vector({2.0, 0.0, 0.0}), 0);  // kxx 4
  CHECK(gp.threshold_now() == doctest::Approx(0.4).epsilon(1e-12));
  gp.admit(Tensor::vector({1.0, 0.0, 0.0}), 1);  // kxx 1, mean 2.5
  CHECK(gp.threshold_now() == doctest::Approx(0.25).epsilon(1e-12));

  // A candidate below the running threshold stays out even though it is
  // linearly independent of the dictionary.
  const auto weak = gp.admit(Tensor::vector({0.0, 0.3, 0.0}), 0);  // kxx 0.09
  CHECK_FALSE(weak.admitted);
  CHECK(gp.dictionary_size() == 2);

  // An explicit nu ignores the running mean entirely.
  GpSarsa fixed(gp_config(2, 0.0));
  fixed.admit(Tensor::vector({100.0}), 0);
  CHECK(fixed.threshold_now() == 0.0);
}

TEST_CASE("the dictionary cap bounds growth") {
  GpConfig cfg = gp_config(1, 0.0);
  cfg.dictionary_cap = 3;
  GpSarsa gp(cfg);
  Rng rng(402);
  for (int i = 0; i < 8; ++i) {
    gp.admit(rng.normal_tensor({10}), 0);
  }
  CHECK(gp.dictionary_size() == 3);
  const auto extra = gp.admit(rng.normal_tensor({10}), 0);
  CHECK_FALSE(extra.admitted);
  CHECK(extra.residual > 0.0);  // rejected by the cap, not by redundancy
}

TEST_CASE("repeated terminal observations recover the batch posterior") {
  // n noisy observations of Q at one point x with prior variance c shrink the
  // posterior to mean n*c*r/(n*c + sigma^2), variance c*sigma^2/(n*c + sigma^2).
  const double prior = 0.8;
  const double sigma = 1.5;
  const double r = 2.0;
  const Tensor b = Tensor::vector({1.5, 0.0, 2.0});  // |b|^2 = 6.25
  const double c = prior * 6.25;                     // 5.0

  GpSarsa gp(gp_config(2, 0.01, prior, sigma, 0.9));
  const int n = 5;
  for (int i = 0; i < n; ++i) {
    gp.update(b, 1, r, Tensor::vector({9.0, 9.0, 9.0}), 0, true);
  }
  CHECK(gp.dictionary_size() == 1);  // terminal successors are never admitted
  const auto [mean, var] = gp.predict(b, 1);
  const double s2 = sigma * sigma;
  CHECK(mean == doctest::Approx(n * c * r / (n * c + s2)).epsilon(1e-10));
  CHECK(var == doctest::Approx(c * s2 / (n * c + s2)).epsilon(1e-10));

  // gamma = 0 with orthogonal successors gives the same closed form, and the
  // unobserved successor keeps its untouched prior.
  GpSarsa flat(gp_config(2, 0.01, prior, sigma, 0.0));
  const Tensor succ = Tensor::vector({0.0, 1.0, 0.0});
  for (int i = 0; i < n; ++i) {
    flat.update(b, 1, r, succ, 0, false);
  }
  CHECK(flat.dictionary_size() == 2);
  const auto [fmean, fvar] = flat.predict(b, 1);
  CHECK(fmean == doctest::Approx(n * c * r / (n * c + s2)).epsilon(1e-10));
  CHECK(fvar == doctest::Approx(c * s2 / (n * c + s2)).epsilon(1e-10));
  const auto [smean, svar] = flat.predict(succ, 0);
  CHECK(smean == 0.0);
  CHECK(svar == prior * 1.0);
}

TEST_CASE("zero rewards keep the posterior mean at zero everywhere") {
  GpSarsa gp(gp_config(2, 0.01, 1.3));
  Rng rng(403);
  std::vector<Tensor> seen;
  std::vector<int> acts;
  for (int i = 0; i < 12; ++i) {
    const Tensor b = rng.normal_tensor({4});
    const Tensor b2 = rng.normal_tensor({4});
    const int a = static_cast<int>(rng.uniform_int(2));
    const int a2 = static_cast<int>(rng.uniform_int(2));
    gp.update(b, a, 0.0, b2, a2, i % 4 == 3);
    seen.push_back(b);
    acts.push_back(a);
  }
  REQUIRE(gp.dictionary_size() > 0);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    const auto [mean, var] = gp.predict(seen[i], acts[i]);
    CHECK(mean == 0.0);
    const double kxx = scaled_kernel(1.3, seen[i], acts[i], seen[i], acts[i]);
    CHECK(var < kxx);  // observations still contract the variance
    CHECK(var >= 0.0);
  }
}

TEST_CASE("the online recursion matches a dense batch solve") {
  const double prior = 2.0;
  const double sigma = 1.5;
  const double gamma = 0.9;
  GpSarsa gp(gp_config(2, 0.0, prior, sigma, gamma));
  Rng rng(404);

  // Two chained episodes of four transitions each; successor points re-enter
  // as the next current point, exercising in-dictionary updates.
  struct Obs {
    int i = 0;        // current point index
    int j = -1;       // successor index, -1 at terminals
    double r = 0.0;
  };
  std::vector<Tensor> pts_b;
  std::vector<int> pts_a;
  std::vector<Obs> obs;
  auto find_or_add = [&](const Tensor& b, int a) {
    for (std::size_t i = 0; i < pts_b.size(); ++i) {
      if (pts_a[i] == a && pts_b[i] == b) return static_cast<int>(i);
    }
    pts_b.push_back(b);
    pts_a.push_back(a);
    return static_cast<int>(pts_b.size()) - 1;
  };

  for (int ep = 0; ep < 2; ++ep) {
    Tensor b = rng.normal_tensor({4});
    int a = static_cast<int>(rng.uniform_int(2));
    for (int t = 0; t < 4; ++t) {
      const bool terminal = t == 3;
      const Tensor b2 = rng.normal_tensor({4});
      const int a2 = static_cast<int>(rng.uniform_int(2));
      const double r = 2.0 * rng.normal();
      Obs ob;
      ob.i = find_or_add(b, a);
      if (!terminal) ob.j = find_or_add(b2, a2);
      ob.r = r;
      obs.push_back(ob);
      gp.update(b, a, r, b2, a2, terminal);
      b = b2;
      a = a2;
    }
  }

  // Batch GP-TD posterior: y = H f + eps with H the discounting difference
  // operator, f ~ N(0, K). alpha = H^T A^-1 y, C = H^T A^-1 H, A = H K H^T
  // + sigma^2 I. Rank deficiency of K is harmless here.
  const int m = static_cast<int>(pts_b.size());
  const int T = static_cast<int>(obs.size());
  std::vector<double> K(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      K[i * m + j] = scaled_kernel(prior, pts_b[i], pts_a[i], pts_b[j], pts_a[j]);
    }
  }
  std::vector<double> H(static_cast<std::size_t>(T) * m, 0.0);
  std::vector<double> y(T);
  for (int t = 0; t < T; ++t) {
    H[t * m + obs[t].i] += 1.0;
    if (obs[t].j >= 0) H[t * m + obs[t].j] -= gamma;
    y[t] = obs[t].r;
  }
  std::vector<double> HK(static_cast<std::size_t>(T) * m, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int l = 0; l < m; ++l) s += H[t * m + l] * K[l * m + j];
      HK[t * m + j] = s;
    }
  }
  std::vector<double> A(static_cast<std::size_t>(T) * T, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u < T; ++u) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += HK[t * m + j] * H[u * m + j];
      A[t * T + u] = s + (t == u ? sigma * sigma : 0.0);
    }
  }
  const std::vector<double> Ainv = dense_inverse(A, T);
  std::vector<double> ainv_y(T, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u < T; ++u) ainv_y[t] += Ainv[t * T + u] * y[u];
  }

  auto dense_predict = [&](const Tensor& b, int a) {
    std::vector<double> kvec(m);
    for (int i = 0; i < m; ++i) {
      kvec[i] = scaled_kernel(prior, b, a, pts_b[i], pts_a[i]);
    }
    std::vector<double> hk(T, 0.0);  // H kvec
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < m; ++i) hk[t] += H[t * m + i] * kvec[i];
    }
    double mean = 0.0;
    for (int t = 0; t < T; ++t) mean += hk[t] * ainv_y[t];
    double quad = 0.0;
    for (int t = 0; t < T; ++t) {
      for (int u = 0; u < T; ++u) quad += hk[t] * Ainv[t * T + u] * hk[u];
    }
    const double kxx = scaled_kernel(prior, b, a, b, a);
    return std::make_pair(mean, kxx - quad);
  };

  for (int i = 0; i < m; ++i) {
    const auto got = gp.predict(pts_b[i], pts_a[i]);
    const auto want = dense_predict(pts_b[i], pts_a[i]);
    CHECK(got.first == doctest::Approx(want.first).epsilon(1e-8));
    CHECK(got.second == doctest::Approx(want.second).epsilon(1e-6));
  }
  for (int probe = 0; probe < 3; ++probe) {
    const Tensor b = rng.normal_tensor({4});
    const int a = static_cast<int>(rng.uniform_int(2));
    const auto got = gp.predict(b, a);
    const auto want = dense_predict(b, a);
    CHECK(got.first == doctest::Approx(want.first).epsilon(1e-8));
    CHECK(got.second == doctest::Approx(want.second).epsilon(1e-6));
  }
}

TEST_CASE("the dictionary gram matrix stays positive definite") {
  GpSarsa gp(gp_config(3, 0.05, 1.4));
  Rng rng(405);
  for (int i = 0; i < 60; ++i) {
    gp.update(rng.normal_tensor({4}), static_cast<int>(rng.uniform_int(3)),
              rng.normal(), rng.normal_tensor({4}),
              static_cast<int>(rng.uniform_int(3)), i % 5 == 4);
  }
  REQUIRE(gp.dictionary_size() >= 3);

  const nlohmann::json doc = nlohmann::json::parse(gp.serialize());
  std::vector<Tensor> beliefs;
  for (const auto& t : doc.at("beliefs")) beliefs.push_back(tensor_from_json(t));
  const std::vector<int> actions = doc.at("actions").get<std::vector<int>>();
  const double prior = doc.at("prior_scale").get<double>();
  const int k = static_cast<int>(beliefs.size());
  std::vector<double> gram(static_cast<std::size_t>(k) * k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      gram[i * k + j] =
          scaled_kernel(prior, beliefs[i], actions[i], beliefs[j], actions[j]);
    }
  }
  // Hand Cholesky with a 1e-10 jitter; every pivot must stay positive.
  for (int i = 0; i < k; ++i) gram[i * k + i] += 1e-10;
  for (int col = 0; col < k; ++col) {
    double d = gram[col * k + col];
    for (int j = 0; j < col; ++j) d -= gram[col * k + j] * gram[col * k + j];
    REQUIRE(d > 0.0);
    const double root = std::sqrt(d);
    gram[col * k + col] = root;
    for (int r = col + 1; r < k; ++r) {
      double s = gram[r * k + col];
      for (int j = 0; j < col; ++j) s -= gram[r * k + j] * gram[col * k + j];
      gram[r * k + col] = s / root;
    }
  }
}

TEST_CASE("an empty model predicts the scaled prior") {
  GpSarsa gp(gp_config(4, 0.01, 2.5));
  const Tensor b = Tensor::vector({0.5, -0.5, 1.0});
  const auto [mean, var] = gp.predict(b, 2);
  CHECK(mean == 0.0);
  CHECK(var == 2.5 * 1.5);
  CHECK_THROWS_AS(gp.predict(b, 4), ConfigError);
  CHECK_THROWS_AS(gp.predict(b, -1), ConfigError);
}

TEST_CASE("predictions ignore rows belonging to other actions") {
  // Only action-0 history should shape action-0 predictions.
  GpSarsa gp(gp_config(2, 0.0, 1.0, 1.0, 0.9));
  const Tensor b = Tensor::vector({1.0, 0.0});
  gp.update(b, 0, 3.0, b, 0, true);
  GpSarsa solo(gp_config(2, 0.0, 1.0, 1.0, 0.9));
  solo.update(b, 0, 3.0, b, 0, true);
  // Extra action-1 traffic must not perturb action 0 at all.
  Rng rng(406);
  for (int i = 0; i < 6; ++i) {
    gp.update(rng.normal_tensor({2}), 1, rng.normal(), rng.normal_tensor({2}),
              1, i % 2 == 0);
  }
  const auto got = gp.predict(b, 0);
  const auto want = solo.predict(b, 0);
  CHECK(got.first == doctest::Approx(want.first).epsilon(1e-12));
  CHECK(got.second == doctest::Approx(want.second).epsilon(1e-12));
}

TEST_CASE("a zero belief leaves nothing to rank and ties break low") {
  GpSarsa gp(gp_config(5, 0.01));
  const Tensor zero = Tensor::vector({0.0, 0.0, 0.0});
  CHECK(gp.greedy_action(zero) == 0);
  Rng rng(407);
  CHECK(gp.select_action(zero, rng) == 0);

  // Still action 0 after training: the kernel wipes out every mean.
  Rng data(408);
  for (int i = 0; i < 10; ++i) {
    gp.update(data.normal_tensor({3}), static_cast<int>(data.uniform_int(5)),
              data.normal(), data.normal_tensor({3}),
              static_cast<int>(data.uniform_int(5)), i % 3 == 2);
  }
  CHECK(gp.greedy_action(zero) == 0);
  CHECK(gp.select_action(zero, rng) == 0);
}

TEST_CASE("thompson sampling from a symmetric prior picks each action equally") {
  GpSarsa gp(gp_config(2, 0.01, 1.0));
  const Tensor b = Tensor::vector({1.0, 0.0});
  Rng rng(409);
  const int n = 20000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) {
    if (gp.select_action(b, rng) == 0) ++zeros;
  }
  const double p = static_cast<double>(zeros) / n;
  CHECK(std::fabs(p - 0.5) < 4.0 * std::sqrt(0.25 / n));
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto build = [] {
    GpSarsa gp(gp_config(3, -1.0, 1.2, 2.0, 0.95));
    Rng rng(410);
    for (int i = 0; i < 25; ++i) {
      gp.update(rng.normal_tensor({4}), static_cast<int>(rng.uniform_int(3)),
                rng.normal(), rng.normal_tensor({4}),
                static_cast<int>(rng.uniform_int(3)), i % 6 == 5);
    }
    return gp;
  };
  const GpSarsa a = build();
  const GpSarsa b = build();
  CHECK(a.serialize() == b.serialize());
  Rng ra(411);
  Rng rb(411);
  const Tensor probe = Tensor::vector({0.3, -0.4, 0.2, 0.9});
  for (int i = 0; i < 10; ++i) {
    CHECK(a.select_action(probe, ra) == b.select_action(probe, rb));
  }
}

TEST_CASE("serialization round-trips the posterior exactly") {
  GpSarsa gp(gp_config(2, -1.0, 1.1, 1.7, 0.9));
  Rng rng(412);
  for (int i = 0; i < 20; ++i) {
    gp.update(rng.normal_tensor({3}), static_cast<int>(rng.uniform_int(2)),
              rng.normal(), rng.normal_tensor({3}),
              static_cast<int>(rng.uniform_int(2)), i % 4 == 3);
  }
  const std::string text = gp.serialize();
  const GpSarsa back = GpSarsa::deserialize(text);
  CHECK(back.dictionary_size() == gp.dictionary_size());
  CHECK(back.threshold_now() == gp.threshold_now());
  CHECK(back.serialize() == text);
  for (int i = 0; i < 5; ++i) {
    const Tensor b = rng.normal_tensor({3});
    for (int a = 0; a < 2; ++a) {
      const auto want = gp.predict(b, a);
      const auto got = back.predict(b, a);
      CHECK(got.first == want.first);
      CHECK(got.second == want.second);
    }
  }
  CHECK(back.greedy_action(Tensor::vector({0.2, 0.4, -0.1})) ==
        gp.greedy_action(Tensor::vector({0.2, 0.4, -0.1})));
}

TEST_CASE("corrupt gp payloads are rejected") {
  CHECK_THROWS_AS(GpSarsa::deserialize("not json at all"), ProtocolError);

  GpSarsa gp(gp_config(2, 0.01));
  gp.update(Tensor::vector({1.0, 0.0}), 0, 1.0, Tensor::vector({0.0, 1.0}), 1,
            false);
  nlohmann::json doc = nlohmann::json::parse(gp.serialize());

  nlohmann::json foreign = doc;
  foreign["format"] = "something-else";
  CHECK_THROWS_AS(GpSarsa::deserialize(foreign.dump()), ProtocolError);

  nlohmann::json unversioned = doc;
  unversioned["version"] = 2;
  CHECK_THROWS_AS(GpSarsa::deserialize(unversioned.dump()), ProtocolError);

  nlohmann::json short_alpha = doc;
  REQUIRE(short_alpha.at("alpha").size() >= 1);
  short_alpha["alpha"].erase(0);
  CHECK_THROWS_AS(GpSarsa::deserialize(short_alpha.dump()), ProtocolError);

  nlohmann::json bad_action = doc;
  bad_action["actions"][0] = 99;
  CHECK_THROWS_AS(GpSarsa::deserialize(bad_action.dump()), ProtocolError);
}

TEST_CASE("updates stay quadratic in the dictionary size") {
  auto timed_run = [](int target) {
    // A small explicit nu keeps roundoff from re-admitting in-span points.
    GpSarsa gp(gp_config(2, 1e-6, 1.0, 2.0, 0.9));
    Rng rng(413);
    std::vector<Tensor> pts;
    std::vector<int> acts;
    while (gp.dictionary_size() < target) {
      const Tensor b = rng.normal_tensor({200});
      const int a = static_cast<int>(rng.uniform_int(2));
      if (gp.admit(b, a).admitted) {
        pts.push_back(b);
        acts.push_back(a);
      }
    }
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int i = 0; i < 200; ++i) {
        const int u = i % target;
        const int v = (i * 7 + 3) % target;
        gp.update(pts[u], acts[u], 0.5, pts[v], acts[v], false);
      }
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best,
                      std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  const double small = timed_run(100);
  const double large = timed_run(300);
  // Quadratic cost predicts ~9x here; a cubic regression would exceed 27x.
  CHECK(large / small < 20.0);
}

TEST_CASE("the agent wrapper applies sarsa updates as actions are chosen") {
  AgentConfig cfg;
  cfg.kind = AgentKind::kGpSarsa;
  cfg.input_dim = 3;
  cfg.num_actions = 2;
  cfg.gamma = 0.9;
  cfg.gp_sigma_obs = 1.5;
  cfg.gp_prior_scale = 1.0;
  cfg.gp_nu = 0.01;
  GpSarsaAgent agent(cfg);
  Rng rng(414);

  agent.begin_episode(true, rng);
  const Tensor b0 = Tensor::vector({1.0, 0.0, 0.0});
  const Tensor b1 = Tensor::vector({0.0, 1.0, 0.0});
  const Tensor b2 = Tensor::vector({0.0, 0.0, 1.0});
  const int a0 = agent.act(b0, true, rng);
  CHECK(agent.model().dictionary_size() == 0);  // nothing observed yet

  Transition t0;
  t0.belief = b0;
  t0.action = a0;
  t0.reward = 1.0;
  t0.next_belief = b1;
  agent.observe(t0, rng);
  CHECK(agent.model().dictionary_size() == 0);  // pending until the next act

  const int a1 = agent.act(b1, true, rng);
  CHECK(agent.model().dictionary_size() >= 1);  // pending update applied
  const int after_first = agent.model().dictionary_size();

  Transition t1;
  t1.belief = b1;
  t1.action = a1;
  t1.reward = 5.0;
  t1.next_belief = b2;
  t1.terminal = true;
  agent.observe(t1, rng);  // terminal updates immediately
  CHECK(agent.model().dictionary_size() >= after_first);
  agent.end_episode(true);
  CHECK(agent.dialogues_trained() == 1);

  // A stale pending update is discarded at the next episode start.
  Transition dangling;
  dangling.belief = b2;
  dangling.action = 0;
  dangling.reward = 3.0;
  dangling.next_belief = b0;
  agent.observe(dangling, rng);
  agent.begin_episode(true, rng);
  const std::string before = agent.checkpoint();
  agent.act(b1, true, rng);  // no pending left, so acting trains nothing
  CHECK(agent.checkpoint() == before);
}

TEST_CASE("gp agent evaluation mutates nothing and stays greedy") {
  AgentConfig cfg;
  cfg.kind = AgentKind::kGpSarsa;
  cfg.input_dim = 2;
  cfg.num_actions = 3;
  cfg.gp_nu = 0.01;
  GpSarsaAgent agent(cfg);
  Rng rng(415);
  agent.begin_episode(true, rng);
  for (int i = 0; i < 6; ++i) {
    Transition t;
    t.belief = rng.normal_tensor({2});
    t.action = static_cast<int>(rng.uniform_int(3));
    t.reward = rng.normal();
    t.next_belief = rng.normal_tensor({2});
    t.terminal = true;
    agent.observe(t, rng);
  }

  const std::string before = agent.checkpoint();
  agent.begin_episode(false, rng);
  const Tensor probe = Tensor::vector({0.7, -0.2});
  const int greedy = agent.model().greedy_action(probe);
  for (int i = 0; i < 5; ++i) {
    CHECK(agent.act(probe, false, rng) == greedy);
  }
  agent.end_episode(false);
  CHECK(agent.checkpoint() == before);
  CHECK(agent.dialogues_trained() == 0);
}

TEST_CASE("the gp agent checkpoint round-trips") {
  AgentConfig cfg;
  cfg.kind = AgentKind::kGpSarsa;
  cfg.input_dim = 3;
  cfg.num_actions = 2;
  cfg.gp_nu = -1.0;
  GpSarsaAgent agent(cfg);
  Rng rng(416);
  agent.begin_episode(true, rng);
  for (int i = 0; i < 10; ++i) {
    Transition t;
    t.belief = rng.normal_tensor({3});
    t.action = static_cast<int>(rng.uniform_int(2));
    t.reward = rng.normal();
    t.next_belief = rng.normal_tensor({3});
    t.terminal = true;
    agent.observe(t, rng);
  }
  agent.end_episode(true);

  const std::string text = agent.checkpoint();
  GpSarsaAgent twin(cfg);
  twin.restore(text);
  CHECK(twin.dialogues_trained() == agent.dialogues_trained());
  CHECK(twin.checkpoint() == text);
  for (int i = 0; i < 5; ++i) {
    const Tensor b = rng.normal_tensor({3});
    CHECK(twin.model().greedy_action(b) == agent.model().greedy_action(b));
  }

  GpSarsaAgent fresh(cfg);
  CHECK_THROWS_AS(fresh.restore("{\"format\":\"other\"}"), ProtocolError);
  CHECK_THROWS_AS(fresh.restore("garbage"), ProtocolError);
}
