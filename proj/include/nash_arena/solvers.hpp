#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "nash_arena/equilibrium.hpp"
#include "nash_arena/game.hpp"
#include "nash_arena/policy.hpp"
#include "nash_arena/potentials.hpp"
#include "nash_arena/trace.hpp"

namespace nash_arena {

enum class Algorithm { kOmwu, kOmd, kOmdReg, kEgpo, kSppo, kMpo, kOnpo };

inline const char* to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::kOmwu: return "omwu";
    case Algorithm::kOmd: return "omd";
    case Algorithm::kOmdReg: return "omd_reg";
    case Algorithm::kEgpo: return "egpo";
    case Algorithm::kSppo: return "sppo";
    case Algorithm::kMpo: return "mpo";
    case Algorithm::kOnpo: return "onpo";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "omwu") return Algorithm::kOmwu;
  if (name == "omd") return Algorithm::kOmd;
  if (name == "omd_reg") return Algorithm::kOmdReg;
  if (name == "egpo") return Algorithm::kEgpo;
  if (name == "sppo") return Algorithm::kSppo;
  if (name == "mpo") return Algorithm::kMpo;
  if (name == "onpo") return Algorithm::kOnpo;
  throw std::invalid_argument("unknown algorithm: " + name);
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::kOmwu;
  double eta = 9.0;
  double beta = 0.001;
  double inner_lr = 0.03;
  int inner_max_steps = 10;
  double inner_tol = 1e-5;
  long total_steps = 1000;
  long ref_refresh_period = 1000;
  std::uint64_t seed = 0;
  bool theory_mode = false;  // enforce eta*L < 1/2 for OMWU
};

// Tabular defaults (nested algorithms list the inner learning rate; the
// outer eta is annealed for MPO and not applicable for it otherwise).
inline SolverConfig default_config(Algorithm alg) {
  SolverConfig cfg;
  cfg.algorithm = alg;
  switch (alg) {
    case Algorithm::kOmwu: cfg.eta = 9.0; break;
    case Algorithm::kOmd: cfg.eta = 0.4; cfg.beta = 0.0; break;
    case Algorithm::kOmdReg: cfg.eta = 0.001; break;
    case Algorithm::kEgpo: cfg.eta = 0.01; break;
    case Algorithm::kSppo: cfg.eta = 0.1; cfg.inner_lr = 0.03; break;
    case Algorithm::kMpo: cfg.eta = 1.0; cfg.inner_lr = 0.0003; break;
    case Algorithm::kOnpo: cfg.eta = 0.01; cfg.inner_lr = 0.01; break;
  }
  return cfg;
}

// Iterate bundle: `main` is the integer-step sequence, `extrapolated` the
// half-step sequence (single-sequence algorithms keep them equal), and
// `prev_extrapolated_policy` caches policy(extrapolated).
struct SolverState {
  Logits main;
  Logits extrapolated;
  Logits reference;
  Policy prev_extrapolated_policy;
  long step = 0;
};

inline SolverState initial_state(int n) {
  SolverState s;
  s.main = Logits{Eigen::VectorXd::Zero(n)};
  s.extrapolated = s.main;
  s.reference = s.main;
  s.prev_extrapolated_policy = uniform_policy(n);
  return s;
}

inline SolverState initial_state(const Policy& init) {
  SolverState s;
  s.main = logits_from_policy(init);
  s.extrapolated = s.main;
  s.reference = s.main;
  s.prev_extrapolated_policy = policy_from_logits(s.extrapolated);
  return s;
}

// Two-sequence optimistic update: the half step replays the previous
// half-step gradient, the full step uses the fresh one.
inline SolverState omwu_step(const SolverState& state,
                             const PreferenceMatrix& P,
                             const SolverConfig& cfg) {
  const Eigen::VectorXd g_prev =
      P.entries * state.prev_extrapolated_policy.probs;
  const Logits extrapolated = gauge(Eigen::VectorXd(state.main.theta + cfg.eta * g_prev));
  const Policy pi_half = policy_from_logits(extrapolated);
  const Logits main =
      gauge(Eigen::VectorXd(state.main.theta + cfg.eta * (P.entries * pi_half.probs)));
  return SolverState{main, extrapolated, state.reference, pi_half,
                     state.step + 1};
}

// beta = 0: theta' = theta + eta P pi. beta > 0: the regularized closed form
// theta' = theta - eta beta (theta - theta_ref - P pi / beta).
inline SolverState omd_step(const SolverState& state, const PreferenceMatrix& P,
                            const SolverConfig& cfg) {
  const Policy pi_t = policy_from_logits(state.main);
  const Eigen::VectorXd g = P.entries * pi_t.probs;
  Eigen::VectorXd next;
  if (cfg.beta == 0.0) {
    next = state.main.theta + cfg.eta * g;
  } else {
    next = state.main.theta -
           cfg.eta * cfg.beta *
               (state.main.theta - state.reference.theta - g / cfg.beta);
  }
  const Logits main = gauge(next);
  return SolverState{main, main, state.reference, policy_from_logits(main),
                     state.step + 1};
}

inline SolverState egpo_step(const SolverState& state,
                             const PreferenceMatrix& P,
                             const SolverConfig& cfg) {
  const double eb = cfg.eta * cfg.beta;
  const Policy pi_t = policy_from_logits(state.main);
  auto push = [&](const Policy& mu) {
    return gauge(Eigen::VectorXd(
        (1.0 - eb) * state.main.theta +
        eb * (state.reference.theta + (P.entries * mu.probs) / cfg.beta)));
  };
  const Logits half = push(pi_t);
  const Policy pi_half = policy_from_logits(half);
  const Logits main = push(pi_half);
  return SolverState{main, half, state.reference, pi_half, state.step + 1};
}

// Objective callback: returns the value at theta and, when grad is non-null,
// writes the gradient there.
using InnerObjective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

// Plain gradient descent: at most inner_max_steps steps, stopping when
// successive objective values differ by at most inner_tol.
inline Logits nested_inner_solve(const InnerObjective& objective,
                                 const Logits& start,
                                 const SolverConfig& cfg) {
  Eigen::VectorXd theta = start.theta;
  Eigen::VectorXd grad(theta.size());
  double f_prev = objective(theta, nullptr);
  if (!std::isfinite(f_prev))
    throw std::runtime_error("nested_inner_solve: non-finite objective at start");
  for (int k = 0; k < cfg.inner_max_steps; ++k) {
    objective(theta, &grad);
    theta -= cfg.inner_lr * grad;
    const double f = objective(theta, nullptr);
    if (!std::isfinite(f))
      throw std::runtime_error("nested_inner_solve: objective diverged");
    const double delta = std::abs(f - f_prev);
    f_prev = f;
    if (delta <= cfg.inner_tol) break;
  }
  return gauge(theta);
}

// E_{y ~ pi_t} (log pi(y) - log pi_t(y) - eta (P pi_t)_y)^2 as a function of
// logits. Shared by the tabular step and the neural inner loop (there the
// gradient is backpropagated through the network).
inline InnerObjective sppo_objective(const PreferenceMatrix& P, double eta,
                                     const Policy& pi_t,
                                     const Eigen::ArrayXd& log_pi_t) {
  const Eigen::ArrayXd target =
      log_pi_t + eta * (P.entries * pi_t.probs).array();
  const Eigen::ArrayXd weights = pi_t.probs.array();
  return [target, weights](const Eigen::VectorXd& theta,
                           Eigen::VectorXd* grad) {
    const Logits l{theta};
    const Eigen::ArrayXd lsm = log_policy_from_logits(l);
    const Eigen::ArrayXd r = lsm - target;
    if (grad) {
      const Eigen::ArrayXd pi = policy_from_logits(l).probs.array();
      const double s = (weights * r).sum();
      *grad = 2.0 * (weights * r - pi * s);
    }
    return (weights * r * r).sum();
  };
}

inline SolverState sppo_step(const SolverState& state,
                             const PreferenceMatrix& P,
                             const SolverConfig& cfg) {
  const Policy pi_t = policy_from_logits(state.main);
  const Eigen::ArrayXd log_pi_t = log_policy_from_logits(state.main);
  const Logits main = nested_inner_solve(
      sppo_objective(P, cfg.eta, pi_t, log_pi_t), state.main, cfg);
  return SolverState{main, main, state.reference, policy_from_logits(main),
                     state.step + 1};
}

// -E_{y~pi} (P pi_ref)_y + beta KL(pi||ref) + (1/eta_t) KL(pi||pi_t) over
// logits.
inline InnerObjective mpo_objective(const PreferenceMatrix& P, double beta,
                                    double eta_t, const Eigen::ArrayXd& log_ref,
                                    const Eigen::ArrayXd& log_pi_t) {
  const Eigen::ArrayXd g = (P.entries * log_ref.exp().matrix()).array();
  return [g, beta, eta_t, log_ref, log_pi_t](const Eigen::VectorXd& theta,
                                             Eigen::VectorXd* grad) {
    const Logits l{theta};
    const Eigen::ArrayXd lsm = log_policy_from_logits(l);
    const Eigen::ArrayXd pi = policy_from_logits(l).probs.array();
    const Eigen::ArrayXd l_ref = lsm - log_ref;
    const Eigen::ArrayXd l_t = lsm - log_pi_t;
    const double kl_ref = (pi * l_ref).sum();
    const double kl_t = (pi * l_t).sum();
    const double mean_g = (pi * g).sum();
    if (grad) {
      *grad = (pi * (-(g - mean_g) + beta * (l_ref - kl_ref) +
                     (l_t - kl_t) / eta_t))
                  .matrix();
    }
    return -mean_g + beta * kl_ref + kl_t / eta_t;
  };
}

// argmax E_{y1~pi, y2~ref} P(y1 > y2) - beta KL(pi||ref) - (1/eta_t) KL(pi||pi_t)
// with annealed eta_t = max(1 - t/T, 5e-4); reference refreshes to the new
// iterate at positive multiples of ref_refresh_period.
inline SolverState mpo_step(const SolverState& state, const PreferenceMatrix& P,
                            const SolverConfig& cfg, long t, long T) {
  const double eta_t =
      std::max(1.0 - static_cast<double>(t) / static_cast<double>(T), 5e-4);
  const Eigen::ArrayXd log_ref = log_policy_from_logits(state.reference);
  const Eigen::ArrayXd log_pi_t = log_policy_from_logits(state.main);
  const Logits main = nested_inner_solve(
      mpo_objective(P, cfg.beta, eta_t, log_ref, log_pi_t), state.main, cfg);
  const bool refresh =
      t > 0 && cfg.ref_refresh_period > 0 && t % cfg.ref_refresh_period == 0;
  return SolverState{main, main, refresh ? main : state.reference,
                     policy_from_logits(main), state.step + 1};
}

// -eta <pi, g> + KL(pi||center) over logits; the proximal subproblem both
// onpo half-steps minimize.
inline InnerObjective prox_objective(double eta, const Eigen::VectorXd& g,
                                     const Eigen::ArrayXd& log_center) {
  return [eta, g, log_center](const Eigen::VectorXd& theta,
                              Eigen::VectorXd* grad) {
    const Logits l{theta};
    const Eigen::ArrayXd lsm = log_policy_from_logits(l);
    const Eigen::ArrayXd pi = policy_from_logits(l).probs.array();
    const Eigen::ArrayXd lr = lsm - log_center;
    const double kl = (pi * lr).sum();
    const double mean_g = (pi * g.array()).sum();
    if (grad)
      *grad = (pi * (-eta * (g.array() - mean_g) + lr - kl)).matrix();
    return -eta * mean_g + kl;
  };
}

// OMWU's structure through inexact proximal solves: both inner problems are
// prox steps from pi_hat_t, the first with the stale gradient, the second
// with the gradient at the fresh extrapolated policy.
inline SolverState onpo_step(const SolverState& state,
                             const PreferenceMatrix& P,
                             const SolverConfig& cfg) {
  const Eigen::ArrayXd log_center = log_policy_from_logits(state.main);
  const Eigen::VectorXd g_prev =
      P.entries * state.prev_extrapolated_policy.probs;
  const Logits extrapolated = nested_inner_solve(
      prox_objective(cfg.eta, g_prev, log_center), state.main, cfg);
  const Policy pi_new = policy_from_logits(extrapolated);
  const Eigen::VectorXd g_new = P.entries * pi_new.probs;
  const Logits main = nested_inner_solve(
      prox_objective(cfg.eta, g_new, log_center), state.main, cfg);
  return SolverState{main, extrapolated, state.reference, pi_new,
                     state.step + 1};
}

inline SolverState solver_step(const SolverState& state,
                               const PreferenceMatrix& P,
                               const SolverConfig& cfg, long t, long T) {
  switch (cfg.algorithm) {
    case Algorithm::kOmwu: return omwu_step(state, P, cfg);
    case Algorithm::kOmd:
    case Algorithm::kOmdReg: return omd_step(state, P, cfg);
    case Algorithm::kEgpo: return egpo_step(state, P, cfg);
    case Algorithm::kSppo: return sppo_step(state, P, cfg);
    case Algorithm::kMpo: return mpo_step(state, P, cfg, t, T);
    case Algorithm::kOnpo: return onpo_step(state, P, cfg);
  }
  throw std::logic_error("solver_step: unhandled algorithm");
}

// Runs cfg.total_steps updates from the uniform start (or `init`), recording
// per-step diagnostics. When diagnostics are requested but the game has no
// full-support equilibrium, the trace degrades to gap-only records.
inline Trace run_solver(const GameInstance& gi, const SolverConfig& cfg,
                        bool diagnostics = true,
                        const std::optional<Policy>& init = std::nullopt) {
  const PreferenceMatrix& P = gi.matrix;
  const int n = P.n();
  const double L = P.entries.cwiseAbs().maxCoeff();
  if (cfg.total_steps < 0)
    throw std::invalid_argument("run_solver: total_steps must be >= 0");
  if (cfg.theory_mode && cfg.algorithm == Algorithm::kOmwu &&
      !(cfg.eta * L < 0.5))
    throw std::invalid_argument("run_solver: theory mode requires eta*L < 1/2");

  SolverState state = init ? initial_state(*init) : initial_state(n);

  Trace trace;
  std::optional<Policy> pi_star;
  if (diagnostics) {
    try {
      const NashSet ns = interior_ne(P);
      pi_star = kl_project(P, ns, policy_from_logits(state.main), 1e-10);
      trace.pi_star = pi_star;
    } catch (const AssumptionViolated&) {
      trace.diagnostics_degraded = true;
    }
  }

  Eigen::VectorXd avg_acc = Eigen::VectorXd::Zero(n);
  trace.records.reserve(static_cast<std::size_t>(cfg.total_steps));
  for (long t = 0; t < cfg.total_steps; ++t) {
    const Policy pi_before = policy_from_logits(state.main);
    const auto t0 = std::chrono::steady_clock::now();
    state = solver_step(state, P, cfg, t, cfg.total_steps);
    const auto t1 = std::chrono::steady_clock::now();

    const Policy pi_main = policy_from_logits(state.main);
    avg_acc += pi_main.probs;
    const Policy pi_avg{avg_acc / static_cast<double>(t + 1)};

    TraceRecord rec;
    rec.step = t;
    rec.gap_last = duality_gap(P, pi_main);
    rec.gap_avg = duality_gap(P, pi_avg);
    rec.k_hat = step_scales(pi_before, state.prev_extrapolated_policy,
                            state.prev_extrapolated_policy, cfg.eta, P)
                    .k_hat_t1;
    rec.wall_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    if (pi_star) {
      try {
        rec.kl_to_star = kl_divergence(*pi_star, pi_main);
        rec.theta_pot =
            theta_potential(*pi_star, pi_main,
                            policy_from_logits(state.extrapolated), cfg.eta, L);
        rec.phi_pot =
            phi_potential(*pi_star, pi_main, cfg.eta, P, *rec.theta_pot);
      } catch (const std::domain_error&) {
        // A policy collapsed below representable support; keep gap records.
        pi_star.reset();
        trace.diagnostics_degraded = true;
      }
    }
    trace.records.push_back(rec);
  }
  return trace;
}

}  // namespace nash_arena
