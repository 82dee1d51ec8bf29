#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nash_arena/equilibrium.hpp"
#include "nash_arena/game.hpp"
#include "nash_arena/policy.hpp"
#include "nash_arena/potentials.hpp"
#include "nash_arena/rng.hpp"
#include "nash_arena/solvers.hpp"
#include "nash_arena/trace.hpp"

#include <nlohmann/json.hpp>

namespace nash_arena {

inline constexpr int kMlpHiddenDim = 10;

// 3-layer fully connected policy network over a frozen noise input:
// logits = W3 relu(W2 relu(W1 x + b1) + b2) + b3.
struct MlpPolicy {
  Eigen::MatrixXd w1;
  Eigen::MatrixXd w2;
  Eigen::MatrixXd w3;
  Eigen::VectorXd b1;
  Eigen::VectorXd b2;
  Eigen::VectorXd b3;
  Eigen::VectorXd input;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(w3.rows()); }
};

// Draw order from a single stream: input noise, then W1 row-major, then W2
// row-major. Middle layers use fan-based normal init (std sqrt(2/(in+out)));
// the output layer starts at zero so the initial policy is exactly uniform.
inline MlpPolicy make_mlp(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("make_mlp: n must be positive");
  MlpPolicy mlp;
  mlp.seed = seed;
  Rng rng(seed);
  const std::vector<double> noise = rng.normal_vector(kMlpHiddenDim);
  mlp.input = Eigen::Map<const Eigen::VectorXd>(noise.data(), kMlpHiddenDim);
  const double stddev = std::sqrt(2.0 / (kMlpHiddenDim + kMlpHiddenDim));
  mlp.w1.resize(kMlpHiddenDim, kMlpHiddenDim);
  for (int r = 0; r < kMlpHiddenDim; ++r)
    for (int c = 0; c < kMlpHiddenDim; ++c) mlp.w1(r, c) = stddev * rng.normal();
  mlp.w2.resize(kMlpHiddenDim, kMlpHiddenDim);
  for (int r = 0; r < kMlpHiddenDim; ++r)
    for (int c = 0; c < kMlpHiddenDim; ++c) mlp.w2(r, c) = stddev * rng.normal();
  mlp.b1 = Eigen::VectorXd::Zero(kMlpHiddenDim);
  mlp.b2 = Eigen::VectorXd::Zero(kMlpHiddenDim);
  mlp.w3 = Eigen::MatrixXd::Zero(n, kMlpHiddenDim);
  mlp.b3 = Eigen::VectorXd::Zero(n);
  return mlp;
}

struct MlpActivations {
  Eigen::VectorXd z1, h1, z2, h2, out;
};

inline MlpActivations mlp_forward_full(const MlpPolicy& mlp) {
  MlpActivations act;
  act.z1 = mlp.w1 * mlp.input + mlp.b1;
  act.h1 = act.z1.cwiseMax(0.0);
  act.z2 = mlp.w2 * act.h1 + mlp.b2;
  act.h2 = act.z2.cwiseMax(0.0);
  act.out = mlp.w3 * act.h2 + mlp.b3;
  return act;
}

inline Logits mlp_forward(const MlpPolicy& mlp) {
  return Logits{mlp_forward_full(mlp).out};
}

struct MlpGrad {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
};

// Reverse accumulation of a logits cotangent through the network. The frozen
// input gets no gradient.
inline MlpGrad mlp_backward(const MlpPolicy& mlp, const MlpActivations& act,
                            const Eigen::VectorXd& dout) {
  MlpGrad g;
  g.w3 = dout * act.h2.transpose();
  g.b3 = dout;
  const Eigen::VectorXd dh2 = mlp.w3.transpose() * dout;
  const Eigen::VectorXd dz2 =
      (dh2.array() * (act.z2.array() > 0.0).cast<double>()).matrix();
  g.w2 = dz2 * act.h1.transpose();
  g.b2 = dz2;
  const Eigen::VectorXd dh1 = mlp.w2.transpose() * dz2;
  const Eigen::VectorXd dz1 =
      (dh1.array() * (act.z1.array() > 0.0).cast<double>()).matrix();
  g.w1 = dz1 * mlp.input.transpose();
  g.b1 = dz1;
  return g;
}

inline void mlp_axpy(MlpPolicy& mlp, double a, const MlpGrad& g) {
  mlp.w1 += a * g.w1;
  mlp.w2 += a * g.w2;
  mlp.w3 += a * g.w3;
  mlp.b1 += a * g.b1;
  mlp.b2 += a * g.b2;
  mlp.b3 += a * g.b3;
}

// Arguments of the generalized preference-fitting loss
//   L(theta) = E_{(y,y')~rho} (h_theta(y,y') - ((P mu)_y - (P mu)_{y'})/beta)^2
// with h_theta(y,y') = log(pi_theta(y) pi_ref(y')) - log(pi_theta(y') pi_ref(y)).
// rho defaults to the uniform distribution over ordered action pairs.
// eta_opt is the optimizer step the caller intends to take on this loss.
struct IpoBatchSpec {
  Policy mu;
  Eigen::VectorXd ref_log_probs;
  double beta = 1.0;
  double eta_opt = 0.0;
  std::optional<Eigen::MatrixXd> rho;
};

namespace detail {

inline void validate_ipo_inputs(const Logits& logits, const IpoBatchSpec& spec,
                                const PreferenceMatrix& P) {
  const int n = P.n();
  if (logits.theta.size() != n || spec.ref_log_probs.size() != n ||
      spec.mu.probs.size() != n)
    throw std::invalid_argument("ipo: dimension mismatch");
  if (!logits.theta.allFinite())
    throw std::domain_error("ipo: non-finite logits");
  if (!spec.ref_log_probs.allFinite())
    throw std::domain_error("ipo: reference policy not strictly positive");
  if (!is_valid_policy(spec.mu))
    throw std::invalid_argument("ipo: mu is not a valid policy");
  if (spec.beta <= 0.0) throw std::invalid_argument("ipo: beta must be positive");
  if (spec.rho) {
    if (spec.rho->rows() != n || spec.rho->cols() != n)
      throw std::invalid_argument("ipo: rho has wrong shape");
    if (spec.rho->minCoeff() < 0.0 || std::abs(spec.rho->sum() - 1.0) > 1e-9)
      throw std::invalid_argument("ipo: rho is not a pair distribution");
  }
}

// Per-action residual e with h(y,y') - target(y,y') = e_y - e_{y'}.
inline Eigen::ArrayXd ipo_residual(const Logits& logits,
                                   const IpoBatchSpec& spec,
                                   const PreferenceMatrix& P) {
  const Eigen::ArrayXd lsm = log_policy_from_logits(logits);
  const Eigen::ArrayXd target =
      (P.entries * spec.mu.probs).array() / spec.beta;
  return lsm - spec.ref_log_probs.array() - target;
}

}  // namespace detail

inline double ipo_loss(const Logits& logits, const IpoBatchSpec& spec,
                       const PreferenceMatrix& P) {
  detail::validate_ipo_inputs(logits, spec, P);
  const Eigen::ArrayXd e = detail::ipo_residual(logits, spec, P);
  const int n = static_cast<int>(e.size());
  if (!spec.rho) {
    const double m1 = e.mean();
    const double m2 = e.square().mean();
    return 2.0 * (m2 - m1 * m1);
  }
  double acc = 0.0;
  for (int y = 0; y < n; ++y)
    for (int y2 = 0; y2 < n; ++y2) {
      const double d = e[y] - e[y2];
      acc += (*spec.rho)(y, y2) * d * d;
    }
  return acc;
}

// Gradient with respect to the logits; the reference is a constant. The
// result always sums to zero because the loss depends on logit differences
// only.
inline Eigen::VectorXd ipo_grad(const Logits& logits, const IpoBatchSpec& spec,
                                const PreferenceMatrix& P) {
  detail::validate_ipo_inputs(logits, spec, P);
  const Eigen::ArrayXd e = detail::ipo_residual(logits, spec, P);
  const int n = static_cast<int>(e.size());
  if (!spec.rho) return ((4.0 / n) * (e - e.mean())).matrix();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (int y = 0; y < n; ++y)
    for (int y2 = 0; y2 < n; ++y2) {
      const double v = 2.0 * (*spec.rho)(y, y2) * (e[y] - e[y2]);
      g[y] += v;
      g[y2] -= v;
    }
  return g;
}

inline double ipo_loss(const MlpPolicy& mlp, const IpoBatchSpec& spec,
                       const PreferenceMatrix& P) {
  return ipo_loss(mlp_forward(mlp), spec, P);
}

inline MlpGrad ipo_grad(const MlpPolicy& mlp, const IpoBatchSpec& spec,
                        const PreferenceMatrix& P) {
  const MlpActivations act = mlp_forward_full(mlp);
  const Eigen::VectorXd dout = ipo_grad(Logits{act.out}, spec, P);
  return mlp_backward(mlp, act, dout);
}

struct NeuralSolverState {
  MlpPolicy main;
  MlpPolicy extrapolated;
  Policy prev_extrapolated_policy;
  Eigen::VectorXd ref_log_probs;
  long step = 0;
};

inline NeuralSolverState initial_neural_state(int n, std::uint64_t seed) {
  NeuralSolverState s;
  s.main = make_mlp(n, seed);
  s.extrapolated = s.main;
  const Logits l = mlp_forward(s.main);
  s.prev_extrapolated_policy = policy_from_logits(l);
  s.ref_log_probs = log_policy_from_logits(l).matrix();
  return s;
}

inline SolverConfig neural_default_config(Algorithm alg) {
  SolverConfig cfg = default_config(alg);
  switch (alg) {
    case Algorithm::kOmwu: cfg.eta = 100.0; break;
    case Algorithm::kOmd: cfg.eta = 10.0; break;
    case Algorithm::kOmdReg: cfg.eta = 0.0002; break;
    case Algorithm::kEgpo: cfg.eta = 0.09; break;
    case Algorithm::kSppo: cfg.eta = 0.1; cfg.inner_lr = 0.03; break;
    case Algorithm::kMpo: cfg.inner_lr = 0.09; break;
    case Algorithm::kOnpo: cfg.eta = 0.01; cfg.inner_lr = 0.01; break;
  }
  return cfg;
}

// Inner gradient descent over network weights: same schedule and stopping
// rule as the tabular nested solve, with the objective's logits gradient
// backpropagated through the network.
inline MlpPolicy neural_inner_solve(const MlpPolicy& start,
                                    const InnerObjective& objective,
                                    const SolverConfig& cfg) {
  MlpPolicy w = start;
  Eigen::VectorXd dlogits(w.n());
  double f_prev = objective(mlp_forward(w).theta, nullptr);
  if (!std::isfinite(f_prev))
    throw std::runtime_error("neural_inner_solve: non-finite objective at start");
  for (int k = 0; k < cfg.inner_max_steps; ++k) {
    const MlpActivations act = mlp_forward_full(w);
    objective(act.out, &dlogits);
    const MlpGrad g = mlp_backward(w, act, dlogits);
    mlp_axpy(w, -cfg.inner_lr, g);
    const double f = objective(mlp_forward(w).theta, nullptr);
    if (!std::isfinite(f))
      throw std::runtime_error("neural_inner_solve: objective diverged");
    const double delta = std::abs(f - f_prev);
    f_prev = f;
    if (delta <= cfg.inner_tol) break;
  }
  return w;
}

// One outer iteration of the named algorithm on network weights. The
// gradient-form algorithms take single steps on the preference-fitting loss
// with optimizer step eta*|A|/4 (eta*beta*|A|/4 for the regularized forms);
// the nested algorithms run the inner loop on their tabular objectives.
inline NeuralSolverState neural_solver_step(const NeuralSolverState& state,
                                            const PreferenceMatrix& P,
                                            const SolverConfig& cfg, long t,
                                            long T) {
  const int n = P.n();
  NeuralSolverState next = state;
  next.step = state.step + 1;
  switch (cfg.algorithm) {
    case Algorithm::kOmwu: {
      const double lr = cfg.eta * n / 4.0;
      const Eigen::VectorXd ref_lp =
          log_policy_from_logits(mlp_forward(state.main)).matrix();
      const IpoBatchSpec half{state.prev_extrapolated_policy, ref_lp, 1.0, lr,
                              std::nullopt};
      next.extrapolated = state.main;
      mlp_axpy(next.extrapolated, -lr, ipo_grad(state.main, half, P));
      const Policy pi_half = policy_from_logits(mlp_forward(next.extrapolated));
      const IpoBatchSpec full{pi_half, ref_lp, 1.0, lr, std::nullopt};
      next.main = state.main;
      mlp_axpy(next.main, -lr, ipo_grad(state.main, full, P));
      next.prev_extrapolated_policy = pi_half;
      return next;
    }
    case Algorithm::kOmd: {
      const double lr = cfg.eta * n / 4.0;
      const Logits l = mlp_forward(state.main);
      const IpoBatchSpec spec{policy_from_logits(l),
                              log_policy_from_logits(l).matrix(), 1.0, lr,
                              std::nullopt};
      next.main = state.main;
      mlp_axpy(next.main, -lr, ipo_grad(state.main, spec, P));
      next.extrapolated = next.main;
      next.prev_extrapolated_policy = policy_from_logits(mlp_forward(next.main));
      return next;
    }
    case Algorithm::kOmdReg: {
      const double lr = cfg.eta * cfg.beta * n / 4.0;
      const IpoBatchSpec spec{policy_from_logits(mlp_forward(state.main)),
                              state.ref_log_probs, cfg.beta, lr, std::nullopt};
      next.main = state.main;
      mlp_axpy(next.main, -lr, ipo_grad(state.main, spec, P));
      next.extrapolated = next.main;
      next.prev_extrapolated_policy = policy_from_logits(mlp_forward(next.main));
      return next;
    }
    case Algorithm::kEgpo: {
      const double lr = cfg.eta * cfg.beta * n / 4.0;
      const Policy pi_t = policy_from_logits(mlp_forward(state.main));
      const IpoBatchSpec half{pi_t, state.ref_log_probs, cfg.beta, lr,
                              std::nullopt};
      next.extrapolated = state.main;
      mlp_axpy(next.extrapolated, -lr, ipo_grad(state.main, half, P));
      const Policy pi_half = policy_from_logits(mlp_forward(next.extrapolated));
      const IpoBatchSpec full{pi_half, state.ref_log_probs, cfg.beta, lr,
                              std::nullopt};
      next.main = state.main;
      mlp_axpy(next.main, -lr, ipo_grad(state.main, full, P));
      next.prev_extrapolated_policy = pi_half;
      return next;
    }
    case Algorithm::kSppo: {
      const Logits l = mlp_forward(state.main);
      const Policy pi_t = policy_from_logits(l);
      const Eigen::ArrayXd log_pi_t = log_policy_from_logits(l);
      next.main = neural_inner_solve(
          state.main, sppo_objective(P, cfg.eta, pi_t, log_pi_t), cfg);
      next.extrapolated = next.main;
      next.prev_extrapolated_policy = policy_from_logits(mlp_forward(next.main));
      return next;
    }
    case Algorithm::kMpo: {
      const double eta_t =
          std::max(1.0 - static_cast<double>(t) / static_cast<double>(T), 5e-4);
      const Eigen::ArrayXd log_pi_t =
          log_policy_from_logits(mlp_forward(state.main));
      next.main = neural_inner_solve(
          state.main,
          mpo_objective(P, cfg.beta, eta_t, state.ref_log_probs.array(),
                        log_pi_t),
          cfg);
      next.extrapolated = next.main;
      next.prev_extrapolated_policy = policy_from_logits(mlp_forward(next.main));
      const bool refresh =
          t > 0 && cfg.ref_refresh_period > 0 && t % cfg.ref_refresh_period == 0;
      if (refresh)
        next.ref_log_probs =
            log_policy_from_logits(mlp_forward(next.main)).matrix();
      return next;
    }
    case Algorithm::kOnpo: {
      const Eigen::ArrayXd log_center =
          log_policy_from_logits(mlp_forward(state.main));
      const Eigen::VectorXd g_prev =
          P.entries * state.prev_extrapolated_policy.probs;
      next.extrapolated = neural_inner_solve(
          state.main, prox_objective(cfg.eta, g_prev, log_center), cfg);
      const Policy pi_new = policy_from_logits(mlp_forward(next.extrapolated));
      const Eigen::VectorXd g_new = P.entries * pi_new.probs;
      next.main = neural_inner_solve(
          state.main, prox_objective(cfg.eta, g_new, log_center), cfg);
      next.prev_extrapolated_policy = pi_new;
      return next;
    }
  }
  throw std::logic_error("neural_solver_step: unhandled algorithm");
}

using NeuralCheckpointFn = std::function<void(long, const NeuralSolverState&)>;

// Runs cfg.total_steps outer iterations from the seeded network (uniform
// initial policy), recording the same per-step diagnostics as the tabular
// runner. Diagnostics degrade to gap-only records when the game has no
// full-support equilibrium or a policy leaves the representable simplex
// interior. on_checkpoint fires every checkpoint_period steps and at the
// final step.
inline Trace run_neural_solver(const GameInstance& gi, const SolverConfig& cfg,
                               bool diagnostics = true,
                               long checkpoint_period = 0,
                               const NeuralCheckpointFn& on_checkpoint = {}) {
  const PreferenceMatrix& P = gi.matrix;
  const int n = P.n();
  const double L = P.entries.cwiseAbs().maxCoeff();
  if (cfg.total_steps < 0)
    throw std::invalid_argument("run_neural_solver: total_steps must be >= 0");

  NeuralSolverState state = initial_neural_state(n, cfg.seed);

  Trace trace;
  std::optional<Policy> pi_star;
  if (diagnostics) {
    try {
      const NashSet ns = interior_ne(P);
      pi_star =
          kl_project(P, ns, policy_from_logits(mlp_forward(state.main)), 1e-10);
      trace.pi_star = pi_star;
    } catch (const AssumptionViolated&) {
      trace.diagnostics_degraded = true;
    }
  }

  Eigen::VectorXd avg_acc = Eigen::VectorXd::Zero(n);
  trace.records.reserve(static_cast<std::size_t>(cfg.total_steps));
  for (long t = 0; t < cfg.total_steps; ++t) {
    const Policy pi_before = policy_from_logits(mlp_forward(state.main));
    const auto tic = std::chrono::steady_clock::now();
    state = neural_solver_step(state, P, cfg, t, cfg.total_steps);
    const auto toc = std::chrono::steady_clock::now();

    const Policy pi_main = policy_from_logits(mlp_forward(state.main));
    avg_acc += pi_main.probs;
    TraceRecord rec;
    rec.step = t;
    rec.gap_last = duality_gap(P, pi_main);
    rec.gap_avg = duality_gap(P, Policy{avg_acc / static_cast<double>(t + 1)});
    rec.k_hat = step_scales(pi_before, state.prev_extrapolated_policy,
                            state.prev_extrapolated_policy, cfg.eta, P)
                    .k_hat_t1;
    rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(toc - tic)
                      .count();
    if (pi_star) {
      try {
        rec.kl_to_star = kl_divergence(*pi_star, pi_main);
        const Policy pi_ex = policy_from_logits(mlp_forward(state.extrapolated));
        const double theta =
            theta_potential(*pi_star, pi_main, pi_ex, cfg.eta, L);
        rec.theta_pot = theta;
        rec.phi_pot = phi_potential(*pi_star, pi_main, cfg.eta, P, theta);
      } catch (const std::domain_error&) {
        pi_star.reset();
        trace.diagnostics_degraded = true;
      }
    }
    trace.records.push_back(std::move(rec));
    if (checkpoint_period > 0 && on_checkpoint &&
        ((t + 1) % checkpoint_period == 0 || t + 1 == cfg.total_steps))
      on_checkpoint(t + 1, state);
  }
  return trace;
}

// Flat row-major arrays per layer with shape metadata.
inline nlohmann::json mlp_to_json(const MlpPolicy& mlp) {
  auto layer = [](const std::string& name, const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return nlohmann::json{{"name", name},
                          {"shape", {m.rows(), m.cols()}},
                          {"data", data}};
  };
  auto bias = [](const std::string& name, const Eigen::VectorXd& v) {
    return nlohmann::json{
        {"name", name},
        {"shape", {v.size()}},
        {"data", std::vector<double>(v.data(), v.data() + v.size())}};
  };
  return nlohmann::json{
      {"n", mlp.n()},
      {"seed", mlp.seed},
      {"input",
       std::vector<double>(mlp.input.data(), mlp.input.data() + mlp.input.size())},
      {"layers",
       {layer("w1", mlp.w1), bias("b1", mlp.b1), layer("w2", mlp.w2),
        bias("b2", mlp.b2), layer("w3", mlp.w3), bias("b3", mlp.b3)}}};
}

inline MlpPolicy mlp_from_json(const nlohmann::json& j) {
  MlpPolicy mlp;
  mlp.seed = j.at("seed").get<std::uint64_t>();
  const auto input = j.at("input").get<std::vector<double>>();
  mlp.input = Eigen::Map<const Eigen::VectorXd>(input.data(),
                                                static_cast<long>(input.size()));
  auto matrix = [](const nlohmann::json& l) {
    const auto shape = l.at("shape").get<std::vector<long>>();
    const auto data = l.at("data").get<std::vector<double>>();
    if (shape.size() != 2 ||
        static_cast<long>(data.size()) != shape[0] * shape[1])
      throw std::invalid_argument("mlp_from_json: bad layer shape");
    Eigen::MatrixXd m(shape[0], shape[1]);
    for (long r = 0; r < shape[0]; ++r)
      for (long c = 0; c < shape[1]; ++c)
        m(r, c) = data[static_cast<std::size_t>(r * shape[1] + c)];
    return m;
  };
  auto vector = [](const nlohmann::json& l) {
    const auto shape = l.at("shape").get<std::vector<long>>();
    const auto data = l.at("data").get<std::vector<double>>();
    if (shape.size() != 1 || static_cast<long>(data.size()) != shape[0])
      throw std::invalid_argument("mlp_from_json: bad bias shape");
    return Eigen::VectorXd(
        Eigen::Map<const Eigen::VectorXd>(data.data(),
                                          static_cast<long>(data.size())));
  };
  for (const auto& l : j.at("layers")) {
    const std::string name = l.at("name").get<std::string>();
    if (name == "w1") mlp.w1 = matrix(l);
    else if (name == "w2") mlp.w2 = matrix(l);
    else if (name == "w3") mlp.w3 = matrix(l);
    else if (name == "b1") mlp.b1 = vector(l);
    else if (name == "b2") mlp.b2 = vector(l);
    else if (name == "b3") mlp.b3 = vector(l);
    else throw std::invalid_argument("mlp_from_json: unknown layer " + name);
  }
  if (mlp.w3.rows() != j.at("n").get<int>())
    throw std::invalid_argument("mlp_from_json: inconsistent n");
  return mlp;
}

}  // namespace nash_arena
