#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace nash_arena {

// Probability vector over the action set.
struct Policy {
  Eigen::VectorXd probs;

  int n() const { return static_cast<int>(probs.size()); }
};

// Unnormalized log-policy; solvers keep it in sum-zero gauge.
struct Logits {
  Eigen::VectorXd theta;

  int n() const { return static_cast<int>(theta.size()); }
};

inline Logits gauge(const Eigen::VectorXd& theta) {
  return Logits{theta.array() - theta.mean()};
}

inline Logits gauge(const Logits& logits) { return gauge(logits.theta); }

inline Policy uniform_policy(int n) {
  return Policy{Eigen::VectorXd::Constant(n, 1.0 / n)};
}

inline bool is_valid_policy(const Policy& pi, double tol = 1e-12) {
  if (pi.n() == 0) return false;
  if ((pi.probs.array() < 0.0).any()) return false;
  return std::abs(pi.probs.sum() - 1.0) <= tol;
}

inline bool is_strictly_positive(const Policy& pi) {
  return pi.n() > 0 && (pi.probs.array() > 0.0).all();
}

inline Policy policy_from_logits(const Logits& logits) {
  const Eigen::ArrayXd shifted =
      logits.theta.array() - logits.theta.maxCoeff();
  const Eigen::ArrayXd e = shifted.exp();
  return Policy{(e / e.sum()).matrix()};
}

// Exact log-probabilities (log-sum-exp stabilized).
inline Eigen::ArrayXd log_policy_from_logits(const Logits& logits) {
  const double mx = logits.theta.maxCoeff();
  const Eigen::ArrayXd shifted = logits.theta.array() - mx;
  const double lse = std::log(shifted.exp().sum());
  return shifted - lse;
}

inline Logits logits_from_policy(const Policy& pi) {
  if (!is_strictly_positive(pi))
    throw std::domain_error("logits_from_policy: policy has a nonpositive coordinate");
  return gauge(Eigen::VectorXd(pi.probs.array().log()));
}

// D_KL(p || q); p may touch the boundary (0 log 0 = 0), q must be positive
// wherever p is.
inline double kl_divergence(const Policy& p, const Policy& q) {
  if (p.n() != q.n())
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  double acc = 0.0;
  for (int a = 0; a < p.n(); ++a) {
    const double pa = p.probs[a];
    if (pa == 0.0) continue;
    const double qa = q.probs[a];
    if (!(pa > 0.0) || !(qa > 0.0))
      throw std::domain_error("kl_divergence: nonpositive coordinate");
    acc += pa * (std::log(pa) - std::log(qa));
  }
  return acc;
}

inline double l1_distance(const Policy& p, const Policy& q) {
  return (p.probs - q.probs).lpNorm<1>();
}

inline double linf_norm(const Eigen::VectorXd& v) {
  return v.lpNorm<Eigen::Infinity>();
}

}  // namespace nash_arena
