#pragma once

// Brute-force and extended-precision references. Everything here is written
// directly from the defining formulas, independent of the fast paths, so the
// two routes can be compared in tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "nash_arena/game.hpp"
#include "nash_arena/policy.hpp"
#include "nash_arena/solvers.hpp"

namespace nash_arena::oracle {

using mp = boost::multiprecision::cpp_bin_float_50;
using MpVec = std::vector<mp>;

namespace detail {

inline MpVec to_mp(const Eigen::VectorXd& v) {
  MpVec out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out[static_cast<std::size_t>(i)] = mp(v[i]);
  return out;
}

inline Eigen::VectorXd to_double(const MpVec& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(v[i]);
  return out;
}

inline MpVec mp_matvec(const Eigen::MatrixXd& m, const MpVec& x) {
  MpVec out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    mp acc = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      acc += mp(m(r, c)) * x[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

inline MpVec mp_gauge(MpVec theta) {
  mp mean = 0;
  for (const mp& v : theta) mean += v;
  mean /= static_cast<int>(theta.size());
  for (mp& v : theta) v -= mean;
  return theta;
}

inline MpVec mp_softmax(const MpVec& theta) {
  mp m = theta[0];
  for (const mp& v : theta) m = std::max(m, v);
  MpVec p(theta.size());
  mp s = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    p[i] = exp(theta[i] - m);
    s += p[i];
  }
  for (mp& v : p) v /= s;
  return p;
}

inline MpVec mp_log_softmax(const MpVec& theta) {
  mp m = theta[0];
  for (const mp& v : theta) m = std::max(m, v);
  mp s = 0;
  for (const mp& v : theta) s += exp(v - m);
  const mp lse = m + log(s);
  MpVec out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] - lse;
  return out;
}

inline MpVec mp_axpy(const MpVec& x, const mp& a, const MpVec& y) {
  MpVec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * y[i];
  return out;
}

// Gradient descent with the same schedule and stopping rule as the double
// inner loop: at most inner_max_steps steps, stop when successive objective
// values differ by at most inner_tol. Objective returns the value and, when
// grad is non-null, fills the gradient.
template <typename Objective>
MpVec mp_inner_solve(const Objective& objective, const MpVec& start,
                     const SolverConfig& cfg) {
  MpVec theta = start;
  MpVec grad(theta.size());
  mp f_prev = objective(theta, static_cast<MpVec*>(nullptr));
  const mp lr(cfg.inner_lr);
  const mp tol(cfg.inner_tol);
  for (int k = 0; k < cfg.inner_max_steps; ++k) {
    objective(theta, &grad);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
    const mp f = objective(theta, static_cast<MpVec*>(nullptr));
    const mp delta = abs(f - f_prev);
    f_prev = f;
    if (delta <= tol) break;
  }
  return mp_gauge(theta);
}

}  // namespace detail

// One solver step recomputed with 50-digit floats. Input and output use the
// double-precision state type; every intermediate runs in extended precision.
inline SolverState highprec_step(Algorithm algorithm, const SolverState& state,
                                 const PreferenceMatrix& P,
                                 const SolverConfig& cfg, long t = 0,
                                 long T = 1) {
  using detail::mp_axpy;
  using detail::mp_gauge;
  using detail::mp_log_softmax;
  using detail::mp_matvec;
  using detail::mp_softmax;
  using detail::to_double;
  using detail::to_mp;
  if (P.n() > 10)
    throw std::invalid_argument("highprec_step: dimension too large");

  const std::size_t n = static_cast<std::size_t>(P.n());
  const MpVec main = to_mp(state.main.theta);
  const MpVec extr = to_mp(state.extrapolated.theta);
  const MpVec ref = to_mp(state.reference.theta);
  const MpVec prev_pol = to_mp(state.prev_extrapolated_policy.probs);
  const mp eta(cfg.eta);
  const mp beta(cfg.beta);

  auto pack = [&](const MpVec& new_main, const MpVec& new_extr,
                  const MpVec& new_ref, const MpVec& new_prev_policy) {
    SolverState out;
    out.main = Logits{to_double(new_main)};
    out.extrapolated = Logits{to_double(new_extr)};
    out.reference = Logits{to_double(new_ref)};
    out.prev_extrapolated_policy = Policy{to_double(new_prev_policy)};
    out.step = state.step + 1;
    return out;
  };

  switch (algorithm) {
    case Algorithm::kOmwu: {
      const MpVec half =
          mp_gauge(mp_axpy(main, eta, mp_matvec(P.entries, prev_pol)));
      const MpVec pi_half = mp_softmax(half);
      const MpVec new_main =
          mp_gauge(mp_axpy(main, eta, mp_matvec(P.entries, pi_half)));
      return pack(new_main, half, ref, pi_half);
    }
    case Algorithm::kOmd:
    case Algorithm::kOmdReg: {
      const MpVec pi_t = mp_softmax(main);
      const MpVec g = mp_matvec(P.entries, pi_t);
      MpVec new_main(n);
      if (cfg.beta == 0.0) {
        new_main = mp_axpy(main, eta, g);
      } else {
        for (std::size_t i = 0; i < n; ++i)
          new_main[i] = main[i] - eta * beta * (main[i] - ref[i] - g[i] / beta);
      }
      new_main = mp_gauge(new_main);
      return pack(new_main, new_main, ref, mp_softmax(new_main));
    }
    case Algorithm::kEgpo: {
      auto push = [&](const MpVec& mu) {
        const MpVec g = mp_matvec(P.entries, mu);
        MpVec out(n);
        for (std::size_t i = 0; i < n; ++i)
          out[i] = (mp(1) - eta * beta) * main[i] +
                   eta * beta * (ref[i] + g[i] / beta);
        return mp_gauge(out);
      };
      const MpVec pi_t = mp_softmax(main);
      const MpVec half = push(pi_t);
      const MpVec pi_half = mp_softmax(half);
      const MpVec new_main = push(pi_half);
      return pack(new_main, half, ref, pi_half);
    }
    case Algorithm::kSppo: {
      const MpVec pi_t = mp_softmax(main);
      const MpVec log_pi_t = mp_log_softmax(main);
      const MpVec g = mp_matvec(P.entries, pi_t);
      auto objective = [&](const MpVec& theta, MpVec* grad) {
        const MpVec lsm = mp_log_softmax(theta);
        MpVec r(n);
        mp f = 0;
        mp s = 0;
        for (std::size_t i = 0; i < n; ++i) {
          r[i] = lsm[i] - log_pi_t[i] - eta * g[i];
          f += pi_t[i] * r[i] * r[i];
          s += pi_t[i] * r[i];
        }
        if (grad) {
          const MpVec pi = mp_softmax(theta);
          for (std::size_t i = 0; i < n; ++i)
            (*grad)[i] = 2 * (pi_t[i] * r[i] - pi[i] * s);
        }
        return f;
      };
      const MpVec new_main = detail::mp_inner_solve(objective, main, cfg);
      return pack(new_main, new_main, ref, mp_softmax(new_main));
    }
    case Algorithm::kMpo: {
      const mp annealed = mp(1) - mp(t) / mp(T == 0 ? 1 : T);
      const mp floor_rate(5e-4);
      const mp eta_t = annealed > floor_rate ? annealed : floor_rate;
      const MpVec log_ref = mp_log_softmax(ref);
      const MpVec log_pi_t = mp_log_softmax(main);
      MpVec pi_ref(n);
      for (std::size_t i = 0; i < n; ++i) pi_ref[i] = exp(log_ref[i]);
      const MpVec g = mp_matvec(P.entries, pi_ref);
      auto objective = [&](const MpVec& theta, MpVec* grad) {
        const MpVec lsm = mp_log_softmax(theta);
        const MpVec pi = mp_softmax(theta);
        mp kl_ref = 0, kl_t = 0, mean_g = 0;
        for (std::size_t i = 0; i < n; ++i) {
          kl_ref += pi[i] * (lsm[i] - log_ref[i]);
          kl_t += pi[i] * (lsm[i] - log_pi_t[i]);
          mean_g += pi[i] * g[i];
        }
        if (grad) {
          for (std::size_t i = 0; i < n; ++i)
            (*grad)[i] = pi[i] * (-(g[i] - mean_g) +
                                  beta * (lsm[i] - log_ref[i] - kl_ref) +
                                  (lsm[i] - log_pi_t[i] - kl_t) / eta_t);
        }
        return -mean_g + beta * kl_ref + kl_t / eta_t;
      };
      const MpVec new_main = detail::mp_inner_solve(objective, main, cfg);
      const bool refresh =
          t > 0 && cfg.ref_refresh_period > 0 && t % cfg.ref_refresh_period == 0;
      return pack(new_main, new_main, refresh ? new_main : ref,
                  mp_softmax(new_main));
    }
    case Algorithm::kOnpo: {
      const MpVec log_center = mp_log_softmax(main);
      auto prox = [&](const MpVec& g) {
        return [&, g](const MpVec& theta, MpVec* grad) {
          const MpVec lsm = mp_log_softmax(theta);
          const MpVec pi = mp_softmax(theta);
          mp kl = 0, mean_g = 0;
          for (std::size_t i = 0; i < n; ++i) {
            kl += pi[i] * (lsm[i] - log_center[i]);
            mean_g += pi[i] * g[i];
          }
          if (grad) {
            for (std::size_t i = 0; i < n; ++i)
              (*grad)[i] = pi[i] * (-eta * (g[i] - mean_g) +
                                    (lsm[i] - log_center[i] - kl));
          }
          return -eta * mean_g + kl;
        };
      };
      const MpVec g_prev = mp_matvec(P.entries, prev_pol);
      const MpVec half = detail::mp_inner_solve(prox(g_prev), main, cfg);
      const MpVec pi_half = mp_softmax(half);
      const MpVec g_new = mp_matvec(P.entries, pi_half);
      const MpVec new_main = detail::mp_inner_solve(prox(g_new), main, cfg);
      return pack(new_main, half, ref, pi_half);
    }
  }
  throw std::invalid_argument("highprec_step: unsupported algorithm");
}

// All vertices of {pi in simplex : P pi = 0} by support enumeration: a point
// with support S is a vertex exactly when the equality system restricted to
// S determines it uniquely.
inline std::vector<Policy> lp_equilibrium_vertices(const PreferenceMatrix& P) {
  const int n = P.n();
  if (n > 6)
    throw std::invalid_argument("lp_equilibrium_vertices: dimension too large");
  std::vector<Policy> vertices;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs[n] = 1.0;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> support;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) support.push_back(i);
    const int s = static_cast<int>(support.size());
    Eigen::MatrixXd M(n + 1, s);
    for (int c = 0; c < s; ++c) {
      M.block(0, c, n, 1) = P.entries.col(support[c]);
      M(n, c) = 1.0;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    if (qr.rank() < s) continue;
    const Eigen::VectorXd x = qr.solve(rhs);
    if ((M * x - rhs).lpNorm<Eigen::Infinity>() > 1e-9) continue;
    if (x.minCoeff() < -1e-9) continue;
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < s; ++c) pi[support[c]] = std::max(x[c], 0.0);
    pi /= pi.sum();
    bool duplicate = false;
    for (const Policy& v : vertices)
      if ((v.probs - pi).lpNorm<Eigen::Infinity>() <= 1e-8) {
        duplicate = true;
        break;
      }
    if (!duplicate) vertices.push_back(Policy{pi});
  }
  return vertices;
}

// Exhaustive minimization of D_KL(q || pi) over the equilibrium set,
// parametrized by an orthonormal basis of ker [P; 1^T] around the vertex
// centroid. The coarse pass uses the requested spacing on [-2, 2]^k; each
// refinement shrinks to the winning cell at a tenth of the spacing until the
// spacing drops below 1e-7.
inline Policy grid_kl_project(const PreferenceMatrix& P, const Policy& pi,
                              double resolution = 1e-3) {
  const int n = P.n();
  if (n > 4)
    throw std::invalid_argument("grid_kl_project: dimension too large");
  if (resolution > 1e-3 || resolution <= 0.0)
    throw std::invalid_argument("grid_kl_project: resolution must be in (0, 1e-3]");
  if (!is_strictly_positive(pi) || pi.probs.size() != n)
    throw std::domain_error("grid_kl_project: pi must be strictly positive");

  const std::vector<Policy> vertices = lp_equilibrium_vertices(P);
  if (vertices.empty())
    throw std::runtime_error("grid_kl_project: empty equilibrium set");
  Eigen::VectorXd anchor = Eigen::VectorXd::Zero(n);
  for (const Policy& v : vertices) anchor += v.probs;
  anchor /= static_cast<double>(vertices.size());

  Eigen::MatrixXd A(n + 1, n);
  A.topRows(n) = P.entries;
  A.bottomRows(1).setOnes();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(1e-9);
  Eigen::MatrixXd kernel = lu.kernel();
  if (lu.dimensionOfKernel() == 0) return Policy{anchor};
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(kernel);
  const Eigen::MatrixXd basis =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, kernel.cols());
  const int k = static_cast<int>(basis.cols());
  if (k > 2)
    throw std::invalid_argument("grid_kl_project: dimension too large");

  auto kl_at = [&](const Eigen::VectorXd& c, double* out) {
    Eigen::VectorXd q = anchor + basis * c;
    if (q.minCoeff() < -1e-12) return false;
    q = q.cwiseMax(0.0);
    const double s = q.sum();
    if (s <= 0.0) return false;
    q /= s;
    double kl = 0.0;
    for (int i = 0; i < n; ++i)
      if (q[i] > 0.0) kl += q[i] * std::log(q[i] / pi.probs[i]);
    *out = kl;
    return true;
  };

  Eigen::VectorXd lo = Eigen::VectorXd::Constant(k, -2.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(k, 2.0);
  double spacing = resolution;
  Eigen::VectorXd best_c = Eigen::VectorXd::Zero(k);
  double best_kl = std::numeric_limits<double>::infinity();
  if (double kl0 = 0.0; kl_at(best_c, &kl0)) best_kl = kl0;

  while (true) {
    std::vector<int> steps(k);
    for (int d = 0; d < k; ++d)
      steps[d] = static_cast<int>(std::floor((hi[d] - lo[d]) / spacing)) + 1;
    std::vector<int> idx(k, 0);
    Eigen::VectorXd c(k);
    bool done = false;
    while (!done) {
      for (int d = 0; d < k; ++d) c[d] = lo[d] + spacing * idx[d];
      if (double kl = 0.0; kl_at(c, &kl) && kl < best_kl) {
        best_kl = kl;
        best_c = c;
      }
      int d = 0;
      while (d < k && ++idx[d] >= steps[d]) {
        idx[d] = 0;
        ++d;
      }
      done = d == k;
    }
    if (spacing <= 1e-7) break;
    lo = best_c.array() - spacing;
    hi = best_c.array() + spacing;
    spacing /= 10.0;
  }

  Eigen::VectorXd q = (anchor + basis * best_c).cwiseMax(0.0);
  q /= q.sum();
  return Policy{q};
}

}  // namespace nash_arena::oracle
