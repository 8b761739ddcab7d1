#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "stornet/cost.hpp"
#include "stornet/errors.hpp"
#include "stornet/storage.hpp"

namespace stornet {

/// Admissible controller-parameter region for one bus at weight w: the level
/// shift must lie in [ks_min, ks_max] and the weight in (0, w_max] for the
/// induced level sequence to stay within bounds. w_max is +inf when the cost
/// slope range is degenerate (d_lo == d_hi).
struct GammaWRegion {
  double ks_min = 0.0;
  double ks_max = 0.0;
  double w_max = 0.0;
};

inline GammaWRegion gamma_w_region(const ValidatedStorage& st, double d_lo, double d_hi,
                                   double w) {
  if (!(d_lo <= d_hi)) {
    throw PlannerError("sub-derivative bounds must satisfy d_lo <= d_hi");
  }
  using detail::pos;
  const double lam = st.lambda();
  const double charge_excess = pos(st.u_max() - (1.0 - lam) * st.s_max());
  const double discharge_excess = pos((1.0 - lam) * st.s_min() - st.u_min());
  GammaWRegion r;
  r.ks_min = (-w * d_lo + charge_excess) / lam - st.s_max();
  r.ks_max = (-w * d_hi - discharge_excess) / lam - st.s_min();
  const double headroom = lam * (st.s_max() - st.s_min()) - discharge_excess - charge_excess;
  r.w_max = d_hi > d_lo ? headroom / (d_hi - d_lo) : std::numeric_limits<double>::infinity();
  return r;
}

/// Ramp component of the drift bound: (1/2) max over the two ramp extremes
/// of (U + (1-lambda)*gamma)^2.
inline double bound_ramp_component(const ValidatedStorage& st, double gamma) {
  const double shift = (1.0 - st.lambda()) * gamma;
  const double a = st.u_min() + shift;
  const double b = st.u_max() + shift;
  return 0.5 * std::max(a * a, b * b);
}

/// Level component without its lambda*(1-lambda) weight.
inline double bound_level_component(const ValidatedStorage& st, double gamma) {
  const double a = st.s_min() + gamma;
  const double b = st.s_max() + gamma;
  return std::max(a * a, b * b);
}

/// Certified per-period sub-optimality of the online controller at (gamma, w).
inline double suboptimality_bound(const ValidatedStorage& st, double gamma, double w) {
  if (!(w > 0.0)) throw PlannerError("weight must be positive");
  const double lam = st.lambda();
  const double m = bound_ramp_component(st, gamma) +
                   lam * (1.0 - lam) * bound_level_component(st, gamma);
  return m / w;
}

/// Sub-optimality bound under an ergodic finite-state disturbance chain,
/// scaled by the first two moments of the return time to the reference state.
inline double markov_bound(const ValidatedStorage& st, double gamma, double w, double mean_return,
                           double second_moment_return) {
  if (!(mean_return >= 1.0)) {
    throw ChainError(ChainError::Code::bad_moments, "mean return time must be >= 1");
  }
  if (!(second_moment_return >= mean_return * mean_return * (1.0 - 1e-12))) {
    throw ChainError(ChainError::Code::bad_moments,
                     "second moment below the square of the mean");
  }
  if (!(w > 0.0)) throw PlannerError("weight must be positive");
  const double lam = st.lambda();
  const double epoch_factor = (2.0 * second_moment_return + mean_return) / mean_return;
  const double m = lam * (1.0 - lam) * bound_level_component(st, gamma) +
                   epoch_factor * bound_ramp_component(st, gamma);
  return m / w;
}

struct BusPlan {
  double gamma = 0.0;
  double w = 0.0;
  double m_u = 0.0;           // ramp component at gamma
  double m_s_weighted = 0.0;  // lambda*(1-lambda) * level component
  double bound = 0.0;         // (m_u + m_s_weighted) / w
  double w_max = 0.0;         // +inf when the slope range is degenerate
  bool w_capped = false;      // w_max was unbounded and replaced by a cap
};

struct ControllerParams {
  std::vector<BusPlan> buses;
  double certified_bound = 0.0;
  bool shared_w = false;
};

namespace detail {

inline double plan_w_cap(const ValidatedStorage& st) {
  return 1e6 * (st.s_max() - st.s_min());
}

struct InnerMin {
  double gamma;
  double m;
};

// Exact minimizer of the convex piecewise-quadratic drift bound M(gamma)
// over [a, b]: the optimum sits at an interval endpoint, at a crossover of
// the max-selections, or at the vertex of the active quadratic piece, so
// scanning those candidates is exact.
inline InnerMin minimize_bound_over_gamma(const ValidatedStorage& st, double a, double b) {
  const double lam = st.lambda();
  const double c = lam * (1.0 - lam);
  const double oml = 1.0 - lam;
  double candidates[11];
  int k = 0;
  candidates[k++] = a;
  candidates[k++] = b;
  auto clamp_push = [&](double g) {
    if (std::isfinite(g)) candidates[k++] = std::min(b, std::max(a, g));
  };
  if (oml > 0.0) clamp_push(-(st.u_min() + st.u_max()) / (2.0 * oml));
  clamp_push(-(st.s_min() + st.s_max()) / 2.0);
  const double denom = oml * oml + 2.0 * c;
  if (denom > 0.0) {
    for (double uu : {st.u_min(), st.u_max()}) {
      for (double ss : {st.s_min(), st.s_max()}) {
        clamp_push(-(oml * uu + 2.0 * c * ss) / denom);
      }
    }
  }
  InnerMin best{a, std::numeric_limits<double>::infinity()};
  for (int i = 0; i < k; ++i) {
    const double g = candidates[i];
    const double m = bound_ramp_component(st, g) + c * bound_level_component(st, g);
    if (m < best.m) best = {g, m};
  }
  return best;
}

inline InnerMin inner_at_weight(const ValidatedStorage& st, double d_lo, double d_hi, double w) {
  GammaWRegion r = gamma_w_region(st, d_lo, d_hi, w);
  double a = r.ks_min, b = r.ks_max;
  if (b < a) {
    // Roundoff can invert a mathematically degenerate interval.
    if (b > a - 1e-9 * (1.0 + std::abs(a))) {
      a = b = 0.5 * (a + b);
    } else {
      std::ostringstream msg;
      msg << "empty shift interval [" << a << ", " << b << "] at w=" << w;
      throw PlannerError(msg.str());
    }
  }
  return minimize_bound_over_gamma(st, a, b);
}

}  // namespace detail

/// Bound-minimizing (gamma, w) for one bus. The four 2x2 semidefinite blocks
/// of the bound program reduce via Schur complements to scalar quadratic
/// inequalities, which makes the inner problem an exact piecewise-quadratic
/// minimization; the outer weight search is a deterministic grid plus local
/// golden-section refinement (the bound need not be quasiconvex in w, so the
/// grid guards the refinement).
inline BusPlan plan_single_bus(const ValidatedStorage& st, double d_lo, double d_hi) {
  if (!(d_lo <= d_hi)) {
    throw PlannerError("sub-derivative bounds must satisfy d_lo <= d_hi");
  }
  const double lam = st.lambda();
  BusPlan plan;
  GammaWRegion probe = gamma_w_region(st, d_lo, d_hi, 0.0);
  plan.w_max = probe.w_max;
  if (!(probe.w_max > 0.0)) {
    throw PlannerError("admissible weight range is empty; assumptions violated upstream");
  }
  double w_hi = probe.w_max;
  if (!std::isfinite(w_hi)) {
    w_hi = detail::plan_w_cap(st);
    plan.w_capped = true;
  }

  if (lam == 1.0) {
    // Closed form: the bound is gamma-independent, the largest admissible
    // weight is optimal and the shift interval collapses to a point.
    plan.w = w_hi;
    if (d_hi > d_lo) {
      plan.gamma = -(d_hi * (st.s_max() - st.u_max()) + d_lo * (st.u_min() - st.s_min())) /
                   (d_hi - d_lo);
    } else {
      GammaWRegion r = gamma_w_region(st, d_lo, d_hi, plan.w);
      plan.gamma = 0.5 * (r.ks_min + r.ks_max);
    }
    plan.m_u = bound_ramp_component(st, plan.gamma);
    plan.m_s_weighted = 0.0;
    plan.bound = suboptimality_bound(st, plan.gamma, plan.w);
    return plan;
  }

  const int grid_n = 1200;
  double best_w = w_hi;
  double best_bound = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= grid_n; ++i) {
    const double w = w_hi * static_cast<double>(i) / grid_n;
    const detail::InnerMin im = detail::inner_at_weight(st, d_lo, d_hi, w);
    const double bound = im.m / w;
    if (bound < best_bound) {
      best_bound = bound;
      best_w = w;
    }
  }
  // Local refinement around the best grid point.
  {
    const double step = w_hi / grid_n;
    double lo = std::max(step * 1e-6, best_w - step);
    double hi = std::min(w_hi, best_w + step);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    auto eval = [&](double w) { return detail::inner_at_weight(st, d_lo, d_hi, w).m / w; };
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < 120; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = eval(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = eval(x2);
      }
    }
    const double w_ref = 0.5 * (lo + hi);
    const double b_ref = eval(w_ref);
    if (b_ref < best_bound) {
      best_bound = b_ref;
      best_w = w_ref;
    }
  }

  const detail::InnerMin im = detail::inner_at_weight(st, d_lo, d_hi, best_w);
  plan.w = best_w;
  plan.gamma = im.gamma;
  plan.m_u = bound_ramp_component(st, plan.gamma);
  plan.m_s_weighted = lam * (1.0 - lam) * bound_level_component(st, plan.gamma);
  plan.bound = suboptimality_bound(st, plan.gamma, plan.w);
  return plan;
}

/// Per-bus plans; the totals separate over buses so each bus is optimized
/// independently with its own weight.
inline ControllerParams plan_parameters(const std::vector<ValidatedStorage>& storages,
                                        const std::vector<CostModel>& costs) {
  if (storages.size() != costs.size()) {
    throw PlannerError("storage and cost model counts differ");
  }
  ControllerParams params;
  params.buses.reserve(storages.size());
  for (std::size_t v = 0; v < storages.size(); ++v) {
    const SubderivBounds d = subderivative_bounds(costs[v], storages[v]);
    params.buses.push_back(plan_single_bus(storages[v], d.lo, d.hi));
    params.certified_bound += params.buses.back().bound;
  }
  return params;
}

/// Strict-fidelity variant with a single weight shared across buses.
inline ControllerParams plan_parameters_shared_w(const std::vector<ValidatedStorage>& storages,
                                                 const std::vector<CostModel>& costs) {
  if (storages.size() != costs.size() || storages.empty()) {
    throw PlannerError("storage and cost model counts differ or are empty");
  }
  const std::size_t nb = storages.size();
  std::vector<SubderivBounds> d(nb);
  double w_hi = std::numeric_limits<double>::infinity();
  bool capped = false;
  for (std::size_t v = 0; v < nb; ++v) {
    d[v] = subderivative_bounds(costs[v], storages[v]);
    const GammaWRegion r = gamma_w_region(storages[v], d[v].lo, d[v].hi, 0.0);
    if (!(r.w_max > 0.0)) throw PlannerError("admissible weight range is empty");
    w_hi = std::min(w_hi, r.w_max);
  }
  if (!std::isfinite(w_hi)) {
    w_hi = detail::plan_w_cap(storages[0]);
    for (std::size_t v = 1; v < nb; ++v) w_hi = std::min(w_hi, detail::plan_w_cap(storages[v]));
    capped = true;
  }
  auto total_at = [&](double w) {
    double total = 0.0;
    for (std::size_t v = 0; v < nb; ++v) {
      total += detail::inner_at_weight(storages[v], d[v].lo, d[v].hi, w).m / w;
    }
    return total;
  };
  const int grid_n = 1200;
  double best_w = w_hi;
  double best_total = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= grid_n; ++i) {
    const double w = w_hi * static_cast<double>(i) / grid_n;
    const double total = total_at(w);
    if (total < best_total) {
      best_total = total;
      best_w = w;
    }
  }
  const double step = w_hi / grid_n;
  double lo = std::max(step * 1e-6, best_w - step), hi = std::min(w_hi, best_w + step);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = total_at(x1), f2 = total_at(x2);
  for (int it = 0; it < 120; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = total_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = total_at(x2);
    }
  }
  if (total_at(0.5 * (lo + hi)) < best_total) best_w = 0.5 * (lo + hi);

  ControllerParams params;
  params.shared_w = true;
  for (std::size_t v = 0; v < nb; ++v) {
    const detail::InnerMin im = detail::inner_at_weight(storages[v], d[v].lo, d[v].hi, best_w);
    BusPlan plan;
    plan.w = best_w;
    plan.gamma = im.gamma;
    plan.m_u = bound_ramp_component(storages[v], plan.gamma);
    plan.m_s_weighted =
        storages[v].lambda() * (1.0 - storages[v].lambda()) * bound_level_component(storages[v], plan.gamma);
    plan.bound = suboptimality_bound(storages[v], plan.gamma, plan.w);
    plan.w_max = gamma_w_region(storages[v], d[v].lo, d[v].hi, 0.0).w_max;
    plan.w_capped = capped;
    params.buses.push_back(plan);
    params.certified_bound += plan.bound;
  }
  return params;
}

}  // namespace stornet
