#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace nash_arena {

// min c'x  s.t.  A x = b, x >= 0.
struct SimplexResult {
  enum class Status { kOptimal, kInfeasible, kUnbounded };
  Status status = Status::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

// Dense two-phase tableau simplex with Bland's rule (no cycling, fully
// deterministic). Sized for the tiny programs this project builds (n <= a few
// hundred). After the optimal basis is found the basic solution is re-solved
// with an LU factorization of the basis columns to shed accumulated pivot
// round-off.
class SimplexSolver {
 public:
  SimplexResult minimize(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                         const Eigen::VectorXd& c_in) const {
    const int m = static_cast<int>(A_in.rows());
    const int n = static_cast<int>(A_in.cols());
    if (b_in.size() != m || c_in.size() != n)
      throw std::invalid_argument("SimplexSolver: inconsistent dimensions");

    Eigen::MatrixXd A = A_in;
    Eigen::VectorXd b = b_in;
    for (int i = 0; i < m; ++i) {
      if (b[i] < 0.0) {
        A.row(i) = -A.row(i);
        b[i] = -b[i];
      }
    }

    // Tableau over [A | I_art | b]; artificial columns n..n+m-1 give the
    // initial basis.
    Eigen::MatrixXd T(m, n + m + 1);
    T.block(0, 0, m, n) = A;
    T.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
    T.col(n + m) = b;
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n + i;
    std::vector<bool> row_active(m, true);

    // Phase 1: minimize the sum of artificials.
    Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(n + m);
    phase1_cost.segment(n, m).setOnes();
    run_simplex(T, basis, row_active, phase1_cost, n + m);

    double art_sum = 0.0;
    for (int i = 0; i < m; ++i)
      if (basis[i] >= n) art_sum += T(i, n + m);
    SimplexResult result;
    if (art_sum > kFeasTol) {
      result.status = SimplexResult::Status::kInfeasible;
      return result;
    }

    // Drive leftover zero-level artificials out of the basis; rows that have
    // no structural pivot are redundant constraints and get deactivated.
    for (int i = 0; i < m; ++i) {
      if (basis[i] < n) continue;
      int pivot_col = -1;
      for (int j = 0; j < n; ++j) {
        if (std::abs(T(i, j)) > kPivotTol) {
          pivot_col = j;
          break;
        }
      }
      if (pivot_col >= 0) {
        pivot(T, basis, i, pivot_col);
      } else {
        row_active[i] = false;
      }
    }

    // Phase 2 over the structural columns only.
    Eigen::VectorXd phase2_cost = Eigen::VectorXd::Zero(n + m);
    phase2_cost.head(n) = c_in;
    const bool bounded = run_simplex(T, basis, row_active, phase2_cost, n);
    if (!bounded) {
      result.status = SimplexResult::Status::kUnbounded;
      return result;
    }

    result.x = refine_basic_solution(A_in, b_in, basis, row_active, n);
    result.objective = c_in.dot(result.x);
    result.status = SimplexResult::Status::kOptimal;
    return result;
  }

 private:
  static constexpr double kCostTol = 1e-10;
  static constexpr double kPivotTol = 1e-11;
  static constexpr double kFeasTol = 1e-8;

  static void pivot(Eigen::MatrixXd& T, std::vector<int>& basis, int row,
                    int col) {
    T.row(row) /= T(row, col);
    for (int i = 0; i < T.rows(); ++i) {
      if (i == row) continue;
      const double f = T(i, col);
      if (f != 0.0) T.row(i) -= f * T.row(row);
    }
    basis[row] = col;
  }

  // Returns false iff unbounded. `allowed_cols` restricts entering columns
  // (phase 2 forbids artificials).
  static bool run_simplex(Eigen::MatrixXd& T, std::vector<int>& basis,
                          const std::vector<bool>& row_active,
                          const Eigen::VectorXd& cost, int allowed_cols) {
    const int m = static_cast<int>(T.rows());
    const int rhs = static_cast<int>(T.cols()) - 1;
    while (true) {
      // Reduced costs via the basic cost multipliers.
      int entering = -1;
      for (int j = 0; j < allowed_cols; ++j) {
        double rc = cost[j];
        for (int i = 0; i < m; ++i) {
          if (!row_active[i]) continue;
          rc -= cost[basis[i]] * T(i, j);
        }
        if (rc < -kCostTol) {
          entering = j;  // Bland: smallest index
          break;
        }
      }
      if (entering < 0) return true;

      int leaving = -1;
      double best_ratio = 0.0;
      for (int i = 0; i < m; ++i) {
        if (!row_active[i]) continue;
        const double a = T(i, entering);
        if (a <= kPivotTol) continue;
        const double ratio = T(i, rhs) / a;
        if (leaving < 0 || ratio < best_ratio - 1e-15 ||
            (std::abs(ratio - best_ratio) <= 1e-15 &&
             basis[i] < basis[leaving])) {
          leaving = i;
          best_ratio = ratio;
        }
      }
      if (leaving < 0) return false;
      pivot(T, basis, leaving, entering);
    }
  }

  // Re-solve A_B x_B = b for the final basis with LU for full accuracy.
  static Eigen::VectorXd refine_basic_solution(const Eigen::MatrixXd& A,
                                               const Eigen::VectorXd& b,
                                               const std::vector<int>& basis,
                                               const std::vector<bool>& row_active,
                                               int n) {
    std::vector<int> cols;
    for (std::size_t i = 0; i < basis.size(); ++i)
      if (row_active[i] && basis[i] < n) cols.push_back(basis[i]);
    Eigen::MatrixXd B(A.rows(), static_cast<int>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) B.col(j) = A.col(cols[j]);
    const Eigen::VectorXd xb = B.colPivHouseholderQr().solve(b);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < cols.size(); ++j)
      x[cols[j]] = std::max(0.0, xb[static_cast<int>(j)]);
    return x;
  }
};

}  // namespace nash_arena
