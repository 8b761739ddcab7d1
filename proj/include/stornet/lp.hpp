#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "stornet/errors.hpp"

namespace stornet::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { le, eq, ge };
enum class Status { optimal, infeasible, unbounded, iteration_limit };

/// min c'x  subject to  row_i x {<=,=,>=} rhs_i  and  lo <= x <= hi.
struct Problem {
  std::vector<double> c, lo, hi;
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<double> rhs;
  std::vector<Sense> sense;

  int add_var(double lower, double upper, double cost) {
    lo.push_back(lower);
    hi.push_back(upper);
    c.push_back(cost);
    return static_cast<int>(c.size()) - 1;
  }

  void add_row(Sense s, double b, std::vector<std::pair<int, double>> entries) {
    rows.push_back(std::move(entries));
    rhs.push_back(b);
    sense.push_back(s);
  }

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }
};

struct Solution {
  Status status = Status::optimal;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

namespace detail {

enum class VarState { basic, at_lower, at_upper, free_zero };

struct Tableau {
  int m = 0;         // rows
  int total = 0;     // structural + slack + artificial
  Eigen::MatrixXd cols;
  Eigen::VectorXd lo, hi, x;
  std::vector<VarState> state;
  std::vector<int> basis;

  void refresh_basics(const Eigen::VectorXd& rhs) {
    Eigen::VectorXd r = rhs;
    for (int j = 0; j < total; ++j) {
      if (state[j] != VarState::basic && x(j) != 0.0) r -= cols.col(j) * x(j);
    }
    Eigen::MatrixXd b(m, m);
    for (int i = 0; i < m; ++i) b.col(i) = cols.col(basis[i]);
    const Eigen::VectorXd xb = b.partialPivLu().solve(r);
    for (int i = 0; i < m; ++i) x(basis[i]) = xb(i);
  }
};

// One simplex phase with a fixed cost vector. Entering variable: the
// smallest-index nonbasic with a violating reduced cost; leaving: the
// smallest-index blocking basic among ratio-test ties (Bland's rule, so no
// cycling). Returns false when the iteration limit is hit.
inline bool run_phase(Tableau& t, const Eigen::VectorXd& cost, const Eigen::VectorXd& rhs,
                      double tol, int iter_limit, int& iterations, bool& unbounded) {
  constexpr double piv_tol = 1e-10;
  unbounded = false;
  const int m = t.m;
  Eigen::MatrixXd b(m, m);
  while (true) {
    if (iterations >= iter_limit) return false;
    for (int i = 0; i < m; ++i) b.col(i) = t.cols.col(t.basis[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    Eigen::VectorXd cb(m);
    for (int i = 0; i < m; ++i) cb(i) = cost(t.basis[i]);
    const Eigen::VectorXd y = b.transpose().partialPivLu().solve(cb);

    int entering = -1;
    int dir = 0;
    for (int j = 0; j < t.total; ++j) {
      if (t.state[j] == VarState::basic) continue;
      const double d = cost(j) - t.cols.col(j).dot(y);
      if (t.state[j] == VarState::at_lower && d < -tol) {
        entering = j;
        dir = +1;
        break;
      }
      if (t.state[j] == VarState::at_upper && d > tol) {
        entering = j;
        dir = -1;
        break;
      }
      if (t.state[j] == VarState::free_zero && std::abs(d) > tol) {
        entering = j;
        dir = d < 0.0 ? +1 : -1;
        break;
      }
    }
    if (entering < 0) return true;  // dual feasible: phase optimal

    const Eigen::VectorXd w = lu.solve(t.cols.col(entering));

    // Step length: entering moves by t*dir, basics by -dir*w each.
    double best_t = kInf;
    if (std::isfinite(t.lo(entering)) && std::isfinite(t.hi(entering))) {
      best_t = t.hi(entering) - t.lo(entering);
    }
    int leaving = -1;       // -1 means the entering variable flips bound
    bool leave_upper = false;
    int best_var = entering;
    for (int i = 0; i < m; ++i) {
      const double rate = -dir * w(i);
      const int v = t.basis[i];
      double ti;
      bool hits_upper;
      if (rate > piv_tol) {
        if (!std::isfinite(t.hi(v))) continue;
        ti = (t.hi(v) - t.x(v)) / rate;
        hits_upper = true;
      } else if (rate < -piv_tol) {
        if (!std::isfinite(t.lo(v))) continue;
        ti = (t.x(v) - t.lo(v)) / (-rate);
        hits_upper = false;
      } else {
        continue;
      }
      if (ti < 0.0) ti = 0.0;  // basic already at (or slightly past) its bound
      const double slack = std::isfinite(best_t) ? 1e-12 * (1.0 + std::abs(best_t)) : 0.0;
      if (ti < best_t - slack) {
        best_t = ti;
        leaving = i;
        leave_upper = hits_upper;
        best_var = v;
      } else if (ti <= best_t + slack && v < best_var) {
        best_t = std::min(best_t, ti);
        leaving = i;
        leave_upper = hits_upper;
        best_var = v;
      }
    }

    if (!std::isfinite(best_t)) {
      unbounded = true;
      return true;
    }

    t.x(entering) += dir * best_t;
    for (int i = 0; i < m; ++i) t.x(t.basis[i]) -= dir * w(i) * best_t;

    if (leaving < 0) {
      // Bound flip: basis unchanged.
      t.state[entering] = dir > 0 ? VarState::at_upper : VarState::at_lower;
      t.x(entering) = dir > 0 ? t.hi(entering) : t.lo(entering);
    } else {
      const int out = t.basis[leaving];
      t.x(out) = leave_upper ? t.hi(out) : t.lo(out);
      t.state[out] = leave_upper ? VarState::at_upper : VarState::at_lower;
      t.state[entering] = VarState::basic;
      t.basis[leaving] = entering;
    }

    ++iterations;
    if (iterations % 64 == 0) t.refresh_basics(rhs);
  }
}

}  // namespace detail

/// Deterministic bounded-variable simplex. Identical inputs give identical
/// outputs; optimality means dual feasibility within tol.
inline Solution solve(const Problem& prob, double tol = 1e-9) {
  using detail::VarState;
  const int n = prob.num_vars();
  const int m = prob.num_rows();
  Solution sol;
  if (n == 0) {
    sol.x.resize(0);
    return sol;
  }

  detail::Tableau t;
  t.m = m;
  t.total = n + 2 * m;  // structural, slack, artificial
  t.cols = Eigen::MatrixXd::Zero(std::max(m, 1), t.total);
  t.lo.resize(t.total);
  t.hi.resize(t.total);
  t.x = Eigen::VectorXd::Zero(t.total);
  t.state.assign(t.total, VarState::at_lower);
  t.basis.resize(m);

  for (int j = 0; j < n; ++j) {
    t.lo(j) = prob.lo[j];
    t.hi(j) = prob.hi[j];
    if (prob.lo[j] > prob.hi[j]) {
      sol.status = Status::infeasible;
      sol.x = Eigen::VectorXd::Zero(n);
      return sol;
    }
  }
  for (int i = 0; i < m; ++i) {
    for (const auto& [j, v] : prob.rows[i]) t.cols(i, j) += v;
    const int slack = n + i;
    t.cols(i, slack) = 1.0;
    switch (prob.sense[i]) {
      case Sense::le:
        t.lo(slack) = 0.0;
        t.hi(slack) = kInf;
        break;
      case Sense::ge:
        t.lo(slack) = -kInf;
        t.hi(slack) = 0.0;
        break;
      case Sense::eq:
        t.lo(slack) = 0.0;
        t.hi(slack) = 0.0;
        break;
    }
  }

  // Nonbasic start for structural and slack variables: the finite bound
  // nearest zero (lower on ties); free variables rest at zero.
  for (int j = 0; j < n + m; ++j) {
    const bool lf = std::isfinite(t.lo(j));
    const bool uf = std::isfinite(t.hi(j));
    if (lf && uf) {
      if (std::abs(t.lo(j)) <= std::abs(t.hi(j))) {
        t.state[j] = VarState::at_lower;
        t.x(j) = t.lo(j);
      } else {
        t.state[j] = VarState::at_upper;
        t.x(j) = t.hi(j);
      }
    } else if (lf) {
      t.state[j] = VarState::at_lower;
      t.x(j) = t.lo(j);
    } else if (uf) {
      t.state[j] = VarState::at_upper;
      t.x(j) = t.hi(j);
    } else {
      t.state[j] = VarState::free_zero;
      t.x(j) = 0.0;
    }
  }

  Eigen::VectorXd rhs(m);
  for (int i = 0; i < m; ++i) rhs(i) = prob.rhs[i];

  // Artificial basis carrying the initial residual, one-sided so each stays
  // on the side of its starting value; phase 1 drives them all to zero.
  Eigen::VectorXd residual = rhs;
  for (int j = 0; j < n + m; ++j) {
    if (t.x(j) != 0.0) residual -= t.cols.col(j) * t.x(j);
  }
  Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(t.total);
  for (int i = 0; i < m; ++i) {
    const int art = n + m + i;
    t.cols(i, art) = 1.0;
    t.basis[i] = art;
    t.state[art] = VarState::basic;
    t.x(art) = residual(i);
    if (residual(i) >= 0.0) {
      t.lo(art) = 0.0;
      t.hi(art) = kInf;
      phase1_cost(art) = 1.0;
    } else {
      t.lo(art) = -kInf;
      t.hi(art) = 0.0;
      phase1_cost(art) = -1.0;
    }
  }

  const int iter_limit = 50 * (m + t.total);
  int iterations = 0;
  bool unbounded = false;

  if (m > 0) {
    if (!detail::run_phase(t, phase1_cost, rhs, tol, iter_limit, iterations, unbounded)) {
      sol.status = Status::iteration_limit;
      sol.iterations = iterations;
      sol.x = t.x.head(n);
      return sol;
    }
    if (unbounded) {
      throw SolverError("phase-1 objective reported unbounded; inconsistent bounds");
    }
    double infeas = 0.0;
    for (int i = 0; i < m; ++i) infeas += std::abs(t.x(n + m + i));
    const double feas_tol = 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff());
    if (infeas > feas_tol) {
      sol.status = Status::infeasible;
      sol.iterations = iterations;
      sol.x = t.x.head(n);
      return sol;
    }
    // Pin artificials at zero for phase 2.
    for (int i = 0; i < m; ++i) {
      const int art = n + m + i;
      t.lo(art) = 0.0;
      t.hi(art) = 0.0;
      t.x(art) = 0.0;
      if (t.state[art] != VarState::basic) t.state[art] = VarState::at_lower;
    }
    t.refresh_basics(rhs);
  }

  Eigen::VectorXd phase2_cost = Eigen::VectorXd::Zero(t.total);
  for (int j = 0; j < n; ++j) phase2_cost(j) = prob.c[j];
  if (m > 0) {
    if (!detail::run_phase(t, phase2_cost, rhs, tol, iter_limit, iterations, unbounded)) {
      sol.status = Status::iteration_limit;
      sol.iterations = iterations;
      sol.x = t.x.head(n);
      return sol;
    }
    t.refresh_basics(rhs);
  } else {
    // No rows: each variable sits at whichever finite bound its cost prefers.
    for (int j = 0; j < n; ++j) {
      if (prob.c[j] > 0.0) {
        if (!std::isfinite(t.lo(j))) unbounded = true;
        t.x(j) = t.lo(j);
      } else if (prob.c[j] < 0.0) {
        if (!std::isfinite(t.hi(j))) unbounded = true;
        t.x(j) = t.hi(j);
      }
    }
  }

  sol.status = unbounded ? Status::unbounded : Status::optimal;
  sol.iterations = iterations;
  sol.x = t.x.head(n);
  sol.objective = 0.0;
  for (int j = 0; j < n; ++j) sol.objective += prob.c[j] * t.x(j);
  return sol;
}

}  // namespace stornet::lp
