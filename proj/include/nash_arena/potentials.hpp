#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nash_arena/game.hpp"
#include "nash_arena/policy.hpp"
#include "nash_arena/trace.hpp"

namespace nash_arena {

struct PotentialRecord {
  double theta_pot = 0.0;
  double phi_pot = 0.0;
  double k_t = 0.0;
  double k_hat_t1 = 0.0;
  double m_t = 0.0;
  double m_hat_t1 = 0.0;
};

struct PhaseReport {
  std::optional<long> burn_in_step;  // first record with theta < epsilon
  double linear_rate = 0.0;          // slope of ln KL per step over the window
  double fit_r2 = 0.0;
  long clipped = 0;                  // KL values clipped at 1e-300
};

// Theta_t = D_KL(pi_star || pi_hat_t) + 4 eta^2 L^2 D_KL(pi_hat_t || pi_prev),
// where pi_prev is the previous extrapolated (half-step) policy.
inline double theta_potential(const Policy& pi_star, const Policy& pi_hat_t,
                              const Policy& pi_prev, double eta, double L) {
  if (!is_strictly_positive(pi_hat_t) || !is_strictly_positive(pi_prev))
    throw std::domain_error("theta_potential: nonpositive policy coordinate");
  return kl_divergence(pi_star, pi_hat_t) +
         4.0 * eta * eta * L * L * kl_divergence(pi_hat_t, pi_prev);
}

// Phi_t = <log pi_hat_t - log pi_star, eta P pi_hat_t> / (Theta_t + 2/e)^2.
inline double phi_potential(const Policy& pi_star, const Policy& pi_hat_t,
                            double eta, const PreferenceMatrix& P,
                            double theta_t) {
  if (!is_strictly_positive(pi_hat_t) || !is_strictly_positive(pi_star))
    throw std::domain_error("phi_potential: nonpositive policy coordinate");
  const Eigen::ArrayXd log_ratio =
      pi_hat_t.probs.array().log() - pi_star.probs.array().log();
  const Eigen::ArrayXd update = eta * (P.entries * pi_hat_t.probs).array();
  const double denom = theta_t + 2.0 / std::numbers::e;
  return (log_ratio * update).sum() / (denom * denom);
}

struct StepScales {
  double k_t = 0.0;       // max_a pi_hat_t(a) |eta (P pi_prev)_a|
  double k_hat_t1 = 0.0;  // max_a pi_hat_t(a) |eta (P pi_t)_a|
  double m_t = 0.0;       // log <pi_hat_t, exp(eta P pi_prev)>
  double m_hat_t1 = 0.0;  // log <pi_hat_t, exp(eta P pi_t)>
};

inline StepScales step_scales(const Policy& pi_hat_t, const Policy& pi_prev,
                              const Policy& pi_t, double eta,
                              const PreferenceMatrix& P) {
  const Eigen::ArrayXd u = eta * (P.entries * pi_prev.probs).array();
  const Eigen::ArrayXd v = eta * (P.entries * pi_t.probs).array();
  const Eigen::ArrayXd w = pi_hat_t.probs.array();
  StepScales s;
  s.k_t = (w * u.abs()).maxCoeff();
  s.k_hat_t1 = (w * v.abs()).maxCoeff();
  s.m_t = std::log((w * u.exp()).sum());
  s.m_hat_t1 = std::log((w * v.exp()).sum());
  return s;
}

// K^(t+1) with next-step weights: max_a pi_hat_{t+1}(a) |eta (P pi_t)_a|.
// The step scales above both weight by pi_hat_t; the unified decrease
// bound additionally needs this next-weights variant.
inline double k_next(const Policy& pi_hat_t1, const Policy& pi_t, double eta,
                     const PreferenceMatrix& P) {
  const Eigen::ArrayXd v = eta * (P.entries * pi_t.probs).array();
  return (pi_hat_t1.probs.array() * v.abs()).maxCoeff();
}

inline PotentialRecord potential_record(const Policy& pi_star,
                                        const Policy& pi_hat_t,
                                        const Policy& pi_prev,
                                        const Policy& pi_t, double eta,
                                        double L, const PreferenceMatrix& P) {
  PotentialRecord rec;
  rec.theta_pot = theta_potential(pi_star, pi_hat_t, pi_prev, eta, L);
  rec.phi_pot = phi_potential(pi_star, pi_hat_t, eta, P, rec.theta_pot);
  const StepScales s = step_scales(pi_hat_t, pi_prev, pi_t, eta, P);
  rec.k_t = s.k_t;
  rec.k_hat_t1 = s.k_hat_t1;
  rec.m_t = s.m_t;
  rec.m_hat_t1 = s.m_hat_t1;
  return rec;
}

// First record index with theta_pot < epsilon.
inline std::optional<long> detect_burn_in(const Trace& trace, double epsilon) {
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& theta = trace.records[i].theta_pot;
    if (!theta)
      throw std::invalid_argument("detect_burn_in: trace lacks theta diagnostics");
    if (*theta < epsilon) return static_cast<long>(i);
  }
  return std::nullopt;
}

// Least-squares line through (step, ln KL) over record indices [lo, hi).
// KL values below 1e-300 are clipped there and counted in `clipped`.
// A zero-variance (constant) series reports slope 0 and R^2 = 0.
inline PhaseReport fit_linear_rate(const Trace& trace, long lo, long hi) {
  if (lo < 0 || hi > static_cast<long>(trace.records.size()) || hi - lo < 3)
    throw std::invalid_argument("fit_linear_rate: window must hold at least 3 records");
  PhaseReport report;
  const long count = hi - lo;
  double sx = 0.0, sy = 0.0;
  std::vector<double> ys(static_cast<std::size_t>(count));
  for (long i = lo; i < hi; ++i) {
    const auto& kl = trace.records[static_cast<std::size_t>(i)].kl_to_star;
    if (!kl)
      throw std::invalid_argument("fit_linear_rate: trace lacks KL diagnostics");
    double v = *kl;
    if (!(v >= 1e-300)) {
      v = 1e-300;
      ++report.clipped;
    }
    ys[static_cast<std::size_t>(i - lo)] = std::log(v);
    sx += static_cast<double>(i);
    sy += ys[static_cast<std::size_t>(i - lo)];
  }
  const double mx = sx / static_cast<double>(count);
  const double my = sy / static_cast<double>(count);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (long i = lo; i < hi; ++i) {
    const double dx = static_cast<double>(i) - mx;
    const double dy = ys[static_cast<std::size_t>(i - lo)] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (syy <= 0.0) {
    report.linear_rate = 0.0;
    report.fit_r2 = 0.0;
    return report;
  }
  report.linear_rate = sxy / sxx;
  report.fit_r2 = (sxy * sxy) / (sxx * syy);
  return report;
}

// Burn-in detection plus a fit over the default window: the last 50% of the
// post-burn-in records (avoids the transition-region curvature). Reports
// NaN rate/r2 when there is no burn-in or the window is too short.
inline PhaseReport analyze_trace(const Trace& trace, double epsilon) {
  PhaseReport report;
  report.linear_rate = std::numeric_limits<double>::quiet_NaN();
  report.fit_r2 = std::numeric_limits<double>::quiet_NaN();
  const auto burn_in = detect_burn_in(trace, epsilon);
  if (!burn_in) return report;
  report.burn_in_step = burn_in;
  const long total = static_cast<long>(trace.records.size());
  long lo = *burn_in + (total - *burn_in) / 2;
  if (total - lo < 3) lo = *burn_in;
  if (total - lo < 3) return report;
  const PhaseReport fit = fit_linear_rate(trace, lo, total);
  report.linear_rate = fit.linear_rate;
  report.fit_r2 = fit.fit_r2;
  report.clipped = fit.clipped;
  return report;
}

}  // namespace nash_arena
