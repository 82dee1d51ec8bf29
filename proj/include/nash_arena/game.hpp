#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nash_arena/policy.hpp"
#include "nash_arena/rng.hpp"

namespace nash_arena {

// Skew-symmetric payoff matrix, entries = win probability minus 1/2,
// rescaled so the largest magnitude is exactly 1/2.
struct PreferenceMatrix {
  Eigen::MatrixXd entries;

  int n() const { return static_cast<int>(entries.rows()); }
};

struct GameInstance {
  PreferenceMatrix matrix;
  int n = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::vector<Policy> planted_equilibria;
};

struct MatrixValidation {
  double skew_defect = 0.0;
  double diag_defect = 0.0;
  double norm_defect = 0.0;
  bool pass = false;
};

inline MatrixValidation validate_preference_matrix(const PreferenceMatrix& P) {
  if (P.entries.rows() != P.entries.cols())
    throw std::invalid_argument("validate_preference_matrix: matrix not square");
  MatrixValidation report;
  report.skew_defect =
      (P.entries + P.entries.transpose()).cwiseAbs().maxCoeff();
  report.diag_defect = P.entries.diagonal().cwiseAbs().maxCoeff();
  const double max_abs = P.entries.cwiseAbs().maxCoeff();
  report.norm_defect = std::max(0.0, max_abs - 0.5);
  report.pass = report.skew_defect <= 1e-12 && report.diag_defect == 0.0 &&
                report.norm_defect <= 1e-12;
  return report;
}

inline PreferenceMatrix rps_matrix() {
  Eigen::MatrixXd e(3, 3);
  e << 0.0, 0.5, -0.5,  //
      -0.5, 0.0, 0.5,   //
      0.5, -0.5, 0.0;
  return PreferenceMatrix{e};
}

inline double preference_probability(const PreferenceMatrix& P, int a, int b) {
  if (a < 0 || b < 0 || a >= P.n() || b >= P.n())
    throw std::out_of_range("preference_probability: action index out of range");
  return P.entries(a, b) + 0.5;
}

// Orthonormal basis of the orthogonal complement of span{vs...}, found by
// modified Gram-Schmidt over [vs..., e_0, ..., e_{n-1}]. Deterministic.
inline Eigen::MatrixXd complement_basis(const std::vector<Eigen::VectorXd>& vs,
                                        int n) {
  std::vector<Eigen::VectorXd> ortho;
  ortho.reserve(n);
  auto absorb = [&](Eigen::VectorXd w) {
    for (const auto& b : ortho) w -= b.dot(w) * b;
    const double nrm = w.norm();
    if (nrm > 1e-9) ortho.push_back(w / nrm);
  };
  for (const auto& v : vs) absorb(v);
  const std::size_t span_dim = ortho.size();
  for (int i = 0; i < n; ++i) absorb(Eigen::VectorXd::Unit(n, i));
  Eigen::MatrixXd M(n, static_cast<int>(ortho.size() - span_dim));
  for (std::size_t j = span_dim; j < ortho.size(); ++j)
    M.col(static_cast<int>(j - span_dim)) = ortho[j];
  return M;
}

inline GameInstance sample_preference_matrix(int n, int m, std::uint64_t seed) {
  if (n < 2 || m < 0 || m >= n)
    throw std::invalid_argument("sample_preference_matrix: need n >= 2 and 0 <= m < n");
  Rng rng(seed);
  GameInstance gi;
  gi.n = n;
  gi.m = m;
  gi.seed = seed;

  std::vector<Eigen::VectorXd> vs;
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd v(n);
    for (int a = 0; a < n; ++a) v[a] = rng.uniform_pos();
    vs.push_back(v);
  }
  const int k = n - m;
  Eigen::MatrixXd A(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) A(r, c) = rng.normal();

  const Eigen::MatrixXd M = complement_basis(vs, n);
  Eigen::MatrixXd C = M * (A - A.transpose()) * M.transpose();
  C = 0.5 * (C - C.transpose()).eval();  // exact skew-symmetry, zero diagonal
  const double max_abs = C.cwiseAbs().maxCoeff();
  if (max_abs > 0.0) C /= 2.0 * max_abs;
  gi.matrix = PreferenceMatrix{C};

  for (const auto& v : vs)
    gi.planted_equilibria.push_back(Policy{v / v.sum()});
  return gi;
}

inline nlohmann::json matrix_to_json(const GameInstance& gi) {
  nlohmann::json j;
  j["n"] = gi.n;
  j["m"] = gi.m;
  j["seed"] = gi.seed;
  std::vector<double> entries;
  entries.reserve(static_cast<std::size_t>(gi.n) * gi.n);
  for (int r = 0; r < gi.n; ++r)
    for (int c = 0; c < gi.n; ++c) entries.push_back(gi.matrix.entries(r, c));
  j["entries"] = entries;
  return j;
}

inline GameInstance matrix_from_json(const nlohmann::json& j) {
  GameInstance gi;
  gi.n = j.at("n").get<int>();
  gi.m = j.at("m").get<int>();
  gi.seed = j.at("seed").get<std::uint64_t>();
  const auto entries = j.at("entries").get<std::vector<double>>();
  if (entries.size() != static_cast<std::size_t>(gi.n) * gi.n)
    throw std::invalid_argument("matrix_from_json: entries length != n*n");
  Eigen::MatrixXd e(gi.n, gi.n);
  for (int r = 0; r < gi.n; ++r)
    for (int c = 0; c < gi.n; ++c)
      e(r, c) = entries[static_cast<std::size_t>(r) * gi.n + c];
  gi.matrix = PreferenceMatrix{e};
  return gi;
}

inline void save_game(const GameInstance& gi, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_game: cannot open " + path.string());
  out << matrix_to_json(gi).dump(2) << "\n";
}

inline GameInstance load_game(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_game: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return matrix_from_json(j);
}

}  // namespace nash_arena
