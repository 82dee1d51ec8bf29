#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nash_arena/game.hpp"
#include "nash_arena/lp.hpp"
#include "nash_arena/policy.hpp"
#include "nash_arena/rng.hpp"

namespace nash_arena {

// The game has no full-support equilibrium; callers treat the instance as
// outside the theory's assumptions.
struct AssumptionViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProjectionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Equilibrium-set geometry: one strictly positive equilibrium plus an
// orthonormal basis of {r : Pr = 0, sum r = 0}.
struct NashSet {
  Policy anchor;
  std::vector<Eigen::VectorXd> basis;
  double interior_margin = 0.0;
};

struct ConstantsReport {
  double epsilon = 0.0;
  double L = 0.0;
  std::optional<double> lambda_min;
  double c_p_estimate = 0.0;
  long samples_used = 0;
};

// Orthonormal basis of the sum-zero subspace (Helmert construction, exact
// and deterministic).
inline Eigen::MatrixXd sum_zero_basis(int n) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n - 1);
  for (int k = 0; k + 1 < n; ++k) {
    const double denom = std::sqrt(static_cast<double>(k + 1) * (k + 2));
    for (int i = 0; i <= k; ++i) Q(i, k) = 1.0 / denom;
    Q(k + 1, k) = -static_cast<double>(k + 1) / denom;
  }
  return Q;
}

struct NullSpaceInfo {
  std::vector<Eigen::VectorXd> basis;   // orthonormal, sum-zero, P r = 0
  std::optional<double> lambda_min;     // smallest positive singular value
  double sigma_max = 0.0;
};

// Singular structure of P restricted to the sum-zero subspace. Singular
// values below 1e-9 * sigma_max count as zero (separates planted rank
// deficiency from round-off at these sizes).
inline NullSpaceInfo null_space_info(const PreferenceMatrix& P) {
  const int n = P.n();
  const Eigen::MatrixXd Q = sum_zero_basis(n);
  const Eigen::MatrixXd PQ = P.entries * Q;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(PQ, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  NullSpaceInfo info;
  info.sigma_max = sv.size() > 0 ? sv[0] : 0.0;
  if (info.sigma_max <= 1e-300) {
    for (int j = 0; j < Q.cols(); ++j) info.basis.push_back(Q.col(j));
    return info;
  }
  const double threshold = 1e-9 * info.sigma_max;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv[i] < threshold) {
      info.basis.push_back(Q * svd.matrixV().col(i));
    } else {
      info.lambda_min = sv[i];
    }
  }
  return info;
}

// max delta  s.t.  P pi = 0, sum pi = 1, pi_a >= delta, as an LP over
// x = (pi, delta, slack).
inline NashSet interior_ne(const PreferenceMatrix& P) {
  const int n = P.n();
  const int vars = 2 * n + 1;
  const int rows = 2 * n + 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, vars);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  A.block(0, 0, n, n) = P.entries;
  A.row(n).head(n).setOnes();
  b[n] = 1.0;
  for (int a = 0; a < n; ++a) {
    A(n + 1 + a, a) = 1.0;
    A(n + 1 + a, n) = -1.0;
    A(n + 1 + a, n + 1 + a) = -1.0;
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(vars);
  c[n] = -1.0;

  const SimplexResult lp = SimplexSolver().minimize(A, b, c);
  const double margin =
      lp.status == SimplexResult::Status::kOptimal ? lp.x[n] : 0.0;
  if (lp.status != SimplexResult::Status::kOptimal || margin <= 1e-9)
    throw AssumptionViolated(
        "interior_ne: no full-support equilibrium (margin " +
        std::to_string(margin) + ")");

  Eigen::VectorXd anchor = lp.x.head(n);
  anchor /= anchor.sum();
  NashSet ns;
  ns.anchor = Policy{anchor};
  ns.interior_margin = margin;
  ns.basis = null_space_info(P).basis;
  return ns;
}

inline double duality_gap(const PreferenceMatrix& P, const Policy& pi) {
  if (P.n() != pi.n())
    throw std::invalid_argument("duality_gap: dimension mismatch");
  return 2.0 * (P.entries * pi.probs).maxCoeff();
}

// argmin_{pi' in the equilibrium set} D_KL(pi' || pi), solved by gradient
// descent in the anchor-plus-null-space coordinates with Armijo backtracking
// (which also keeps the iterate strictly positive). Stops at first-order
// stationarity: |<r, log pi - log pi'>| <= tol for every basis vector r.
inline Policy kl_project(const PreferenceMatrix& P, const NashSet& ns,
                         const Policy& pi, double tol = 1e-10,
                         long max_iters = 100000) {
  if (P.n() != pi.n())
    throw std::invalid_argument("kl_project: dimension mismatch");
  if (!is_strictly_positive(pi))
    throw std::domain_error("kl_project: input policy has a nonpositive coordinate");
  const int k = static_cast<int>(ns.basis.size());
  if (k == 0) return ns.anchor;

  const int n = pi.n();
  Eigen::MatrixXd B(n, k);
  for (int j = 0; j < k; ++j) B.col(j) = ns.basis[j];
  const Eigen::ArrayXd log_pi = pi.probs.array().log();

  Eigen::VectorXd cur = ns.anchor.probs;
  auto objective = [&](const Eigen::VectorXd& point) {
    return (point.array() * (point.array().log() - log_pi)).sum();
  };
  double f = objective(cur);
  double residual = std::numeric_limits<double>::infinity();

  for (long it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd grad =
        B.transpose() * (cur.array().log() - log_pi).matrix();
    residual = grad.lpNorm<Eigen::Infinity>();
    if (residual <= tol) return Policy{cur};

    // Damped Newton in the reduced coordinates; the Hessian
    // B^T diag(1/x) B is positive definite on the interior.
    const Eigen::MatrixXd H =
        B.transpose() * cur.array().inverse().matrix().asDiagonal() * B;
    Eigen::VectorXd dir = -H.ldlt().solve(grad);
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      dir = -grad;
      slope = grad.dot(dir);
    }
    // Armijo with an absolute allowance: near the optimum the true decrease
    // falls below double resolution, and the allowance keeps full Newton
    // steps acceptable so the quadratic phase can finish the job.
    const double allowance = 1e-15 * (1.0 + std::abs(f));
    bool accepted = false;
    for (double t = 1.0; t > 1e-18; t *= 0.5) {
      const Eigen::VectorXd next = cur + t * (B * dir);
      if (!(next.array() > 0.0).all()) continue;
      const double f2 = objective(next);
      if (f2 <= f + 0.3 * t * slope + allowance) {
        cur = next;
        f = f2;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  throw ProjectionFailure("kl_project: no convergence after iteration cap (residual " +
                          std::to_string(residual) + ")");
}

// Instance constants of the convergence theory. c_p_estimate is the
// Monte-Carlo minimum of ||P pi||_inf / ||pi - p(pi)||_1 over Dirichlet(1)
// draws interleaved with near-vertex probes (one coordinate at 1 - 1e-3).
inline ConstantsReport instance_constants(const PreferenceMatrix& P,
                                          const Policy& pi_star,
                                          long n_samples, std::uint64_t seed) {
  if (P.n() != pi_star.n())
    throw std::invalid_argument("instance_constants: dimension mismatch");
  if (!is_strictly_positive(pi_star))
    throw std::domain_error("instance_constants: pi_star must be strictly positive");
  const int n = P.n();
  ConstantsReport report;
  report.epsilon = pi_star.probs.minCoeff();
  report.L = P.entries.cwiseAbs().maxCoeff();
  report.lambda_min = null_space_info(P).lambda_min;

  const NashSet ns = interior_ne(P);
  Rng rng(seed);
  double cp = std::numeric_limits<double>::infinity();
  long used = 0;
  for (long i = 0; i < n_samples; ++i) {
    Eigen::VectorXd probs(n);
    if (i % 2 == 0) {
      const auto d = rng.dirichlet_uniform(static_cast<std::size_t>(n));
      for (int a = 0; a < n; ++a) probs[a] = d[static_cast<std::size_t>(a)];
    } else {
      const int vertex = static_cast<int>((i / 2) % n);
      const auto d = rng.dirichlet_uniform(static_cast<std::size_t>(n - 1));
      int pos = 0;
      for (int a = 0; a < n; ++a) {
        probs[a] = a == vertex ? 1.0 - 1e-3
                               : 1e-3 * d[static_cast<std::size_t>(pos++)];
      }
    }
    const Policy sample{probs};
    const double gap_norm = (P.entries * probs).lpNorm<Eigen::Infinity>();
    if (gap_norm <= 1e-12) continue;  // sampled an equilibrium
    const Policy projected = kl_project(P, ns, sample);
    const double dist = l1_distance(sample, projected);
    if (dist <= 1e-12) continue;
    cp = std::min(cp, gap_norm / dist);
    ++used;
  }
  report.c_p_estimate = used > 0 ? cp : 0.0;
  report.samples_used = used;
  return report;
}

inline nlohmann::json constants_to_json(const ConstantsReport& report) {
  nlohmann::json j;
  j["epsilon"] = report.epsilon;
  j["L"] = report.L;
  if (report.lambda_min)
    j["lambda_min"] = *report.lambda_min;
  else
    j["lambda_min"] = nullptr;
  j["c_p_estimate"] = report.c_p_estimate;
  j["samples_used"] = report.samples_used;
  return j;
}

}  // namespace nash_arena
