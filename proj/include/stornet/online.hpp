#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "stornet/cost.hpp"
#include "stornet/errors.hpp"
#include "stornet/lp.hpp"
#include "stornet/network.hpp"
#include "stornet/storage.hpp"

namespace stornet {

/// Per-bus data for one period of the online dispatch problem.
struct BusOnline {
  const ValidatedStorage* storage = nullptr;
  const CostModel* cost = nullptr;
  CostRealization real;
  double shifted_level = 0.0;  // s(t) + gamma
  double weight = 1.0;         // W
  SubderivBounds dbounds;      // cost sub-derivative bounds in u
};

struct OnlineSolution {
  Eigen::VectorXd u;     // per-bus operation, netted
  Eigen::VectorXd flow;  // per-edge flow
  double objective = 0.0;
  double stage_cost = 0.0;
};

namespace detail {

/// Exact minimizer of c_u*u + sum_l p_l*phi_l(arg_l(u)) over [lo, hi] with
/// zero network inflow. The objective is convex piecewise linear, so it is
/// enough to scan the endpoints, the conversion kink at zero and every
/// term-argument zero crossing. Ties resolve toward the smallest |u|.
inline double minimize_scalar_piecewise(const ValidatedStorage& storage, const CostModel& model,
                                        const CostRealization& real, double c_u, double lo,
                                        double hi) {
  std::vector<double> candidates;
  candidates.reserve(2 * model.terms.size() + 3);
  candidates.push_back(lo);
  candidates.push_back(hi);
  if (lo < 0.0 && 0.0 < hi) candidates.push_back(0.0);
  for (std::size_t i = 0; i < model.terms.size(); ++i) {
    const CostTerm& term = model.terms[i];
    if (term.kind != CostKind::positive_part) continue;
    const double base = term.alpha_delta * real.delta + real.alpha_const[i];
    const double sc = arg_slope_charge(term, storage);
    const double sd = arg_slope_discharge(term, storage);
    if (sc != 0.0) {
      const double z = -base / sc;
      if (z > 0.0 && z >= lo && z <= hi) candidates.push_back(z);
    }
    if (sd != 0.0) {
      const double z = -base / sd;
      if (z < 0.0 && z >= lo && z <= hi) candidates.push_back(z);
    }
  }
  double best_u = candidates.front();
  double best_obj = c_u * best_u + evaluate_cost(model, storage, real, best_u, 0.0);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double u = candidates[i];
    const double obj = c_u * u + evaluate_cost(model, storage, real, u, 0.0);
    const double tie = 1e-12 * (1.0 + std::abs(best_obj));
    if (obj < best_obj - tie) {
      best_obj = obj;
      best_u = u;
    } else if (obj <= best_obj + tie && std::abs(u) < std::abs(best_u)) {
      best_obj = std::min(best_obj, obj);
      best_u = u;
    }
  }
  return best_u;
}

}  // namespace detail

/// Single-bus dispatch: minimizes lambda*(s+gamma)*u/W + g(u) over the ramp
/// box. The saturation rules are applied first: when the drift coefficient
/// dominates every cost slope the optimizer is pinned at a ramp bound, and
/// returning that bound directly keeps the structural property exact in
/// floating point.
inline double solve_single_bus(const BusOnline& bus) {
  const ValidatedStorage& st = *bus.storage;
  const double drift = st.lambda() * bus.shifted_level;
  if (drift + bus.weight * bus.dbounds.lo >= -1e-12) return st.u_min();
  if (drift + bus.weight * bus.dbounds.hi <= 1e-12) return st.u_max();
  return detail::minimize_scalar_piecewise(st, *bus.cost, bus.real, drift / bus.weight,
                                           st.u_min(), st.u_max());
}

struct NetworkSolveOptions {
  bool include_drift = true;        // drop for myopic or no-storage dispatch
  bool apply_threshold = true;      // pin saturated buses (meaningful with drift)
  bool myopic_feasibility = false;  // hard next-level rows s_min <= lambda*s + u <= s_max
  bool zero_storage = false;        // fix u = 0, flows still optimized
  const std::vector<double>* levels = nullptr;  // required for myopic rows
};

/// Joint storage/flow dispatch over the network as an LP: epigraph variables
/// for the positive-part terms, realizable-flow equality rows and capacity
/// boxes. The relaxed charge/discharge split is netted afterwards and the
/// objective re-verified, so any solver artifact surfaces as a hard error
/// instead of a silent cost distortion.
inline OnlineSolution solve_network(const std::vector<BusOnline>& buses, const PowerNetwork& net,
                                    const NetworkSolveOptions& opts = {}) {
  const int nb = static_cast<int>(buses.size());
  if (nb != net.num_buses()) {
    throw SolverError("bus count does not match network");
  }
  const int ne = net.num_edges();

  lp::Problem prob;
  std::vector<int> up_idx(nb), un_idx(nb);
  for (int v = 0; v < nb; ++v) {
    const BusOnline& b = buses[v];
    const ValidatedStorage& st = *b.storage;
    double drift = 0.0;
    if (opts.include_drift) drift = st.lambda() * b.shifted_level / b.weight;
    double lin_up = 0.0, lin_un = 0.0;
    for (std::size_t l = 0; l < b.cost->terms.size(); ++l) {
      const CostTerm& term = b.cost->terms[l];
      if (term.kind == CostKind::linear) {
        lin_up += b.real.p[l] * arg_slope_charge(term, st);
        lin_un -= b.real.p[l] * arg_slope_discharge(term, st);
      }
    }
    const double up_cap = opts.zero_storage ? 0.0 : st.u_max();
    const double un_cap = opts.zero_storage ? 0.0 : -st.u_min();
    up_idx[v] = prob.add_var(0.0, up_cap, drift + lin_up);
    un_idx[v] = prob.add_var(0.0, un_cap, -drift + lin_un);
  }
  std::vector<int> f_idx(ne);
  std::vector<double> f_cost(ne, 0.0);
  for (int v = 0; v < nb; ++v) {
    const BusOnline& b = buses[v];
    for (std::size_t l = 0; l < b.cost->terms.size(); ++l) {
      const CostTerm& term = b.cost->terms[l];
      if (term.kind != CostKind::linear || term.alpha_f == 0.0) continue;
      for (int e = 0; e < ne; ++e) {
        const double sign = -net.incidence()(e, v);
        if (sign != 0.0) f_cost[e] += b.real.p[l] * term.alpha_f * sign;
      }
    }
  }
  for (int e = 0; e < ne; ++e) {
    f_idx[e] = prob.add_var(-net.f_max()(e), net.f_max()(e), f_cost[e]);
  }

  // Epigraph variables and rows for active positive-part terms.
  for (int v = 0; v < nb; ++v) {
    const BusOnline& b = buses[v];
    const ValidatedStorage& st = *b.storage;
    for (std::size_t l = 0; l < b.cost->terms.size(); ++l) {
      const CostTerm& term = b.cost->terms[l];
      if (term.kind != CostKind::positive_part || b.real.p[l] == 0.0) continue;
      const double base = term.alpha_delta * b.real.delta + b.real.alpha_const[l];
      const double sc = arg_slope_charge(term, st);
      const double sd = arg_slope_discharge(term, st);
      // Interval-arithmetic cap keeps every variable finitely bounded.
      double arg_hi = base;
      arg_hi += std::max(0.0, sc * st.u_max());
      arg_hi += std::max(0.0, -sd * st.u_min());
      double f_reach = 0.0;
      for (int e = 0; e < ne; ++e) {
        if (net.incidence()(e, v) != 0.0) f_reach += net.f_max()(e);
      }
      arg_hi += std::abs(term.alpha_f) * f_reach;
      const int z = prob.add_var(0.0, std::max(0.0, arg_hi) + 1.0, b.real.p[l]);
      std::vector<std::pair<int, double>> row;
      row.reserve(3 + ne);
      row.emplace_back(up_idx[v], sc);
      row.emplace_back(un_idx[v], -sd);
      if (term.alpha_f != 0.0) {
        for (int e = 0; e < ne; ++e) {
          const double sign = -net.incidence()(e, v);
          if (sign != 0.0) row.emplace_back(f_idx[e], term.alpha_f * sign);
        }
      }
      row.emplace_back(z, -1.0);
      prob.add_row(lp::Sense::le, -base, std::move(row));
    }
  }

  // Realizable-flow subspace.
  for (int r = 0; r < net.k_matrix().rows(); ++r) {
    std::vector<std::pair<int, double>> row;
    row.reserve(ne);
    for (int e = 0; e < ne; ++e) {
      const double v = net.k_matrix()(r, e);
      if (v != 0.0) row.emplace_back(f_idx[e], v);
    }
    prob.add_row(lp::Sense::eq, 0.0, std::move(row));
  }

  if (opts.myopic_feasibility) {
    if (opts.levels == nullptr || static_cast<int>(opts.levels->size()) != nb) {
      throw SolverError("myopic dispatch needs current storage levels");
    }
    for (int v = 0; v < nb; ++v) {
      const ValidatedStorage& st = *buses[v].storage;
      const double carry = st.lambda() * (*opts.levels)[v];
      prob.add_row(lp::Sense::le, st.s_max() - carry, {{up_idx[v], 1.0}, {un_idx[v], -1.0}});
      prob.add_row(lp::Sense::ge, st.s_min() - carry, {{up_idx[v], 1.0}, {un_idx[v], -1.0}});
    }
  }

  const lp::Solution lps = lp::solve(prob);
  if (lps.status != lp::Status::optimal) {
    std::ostringstream msg;
    msg << "internal dispatch LP failure, status "
        << (lps.status == lp::Status::infeasible   ? "infeasible"
            : lps.status == lp::Status::unbounded ? "unbounded"
                                                  : "iteration limit")
        << " after " << lps.iterations << " iterations";
    throw SolverError(msg.str());
  }

  OnlineSolution sol;
  sol.flow.resize(ne);
  for (int e = 0; e < ne; ++e) sol.flow(e) = lps.x(f_idx[e]);

  // Relaxed objective at the LP point, evaluated from the cost model
  // directly so epigraph slack cannot leak in.
  double relaxed = 0.0;
  for (int v = 0; v < nb; ++v) {
    const BusOnline& b = buses[v];
    const double up = lps.x(up_idx[v]);
    const double un = lps.x(un_idx[v]);
    const double inflow = ne > 0 ? net.net_inflow(sol.flow, v) : 0.0;
    if (opts.include_drift) {
      relaxed += b.storage->lambda() * b.shifted_level * (up - un) / b.weight;
    }
    relaxed += evaluate_cost_split(*b.cost, *b.storage, b.real, up, un, inflow);
  }

  sol.u.resize(nb);
  for (int v = 0; v < nb; ++v) {
    const BusOnline& b = buses[v];
    double u = lps.x(up_idx[v]) - lps.x(un_idx[v]);
    if (opts.include_drift && opts.apply_threshold && !opts.zero_storage &&
        !opts.myopic_feasibility) {
      const double drift = b.storage->lambda() * b.shifted_level;
      if (drift + b.weight * b.dbounds.lo >= -1e-12) {
        u = b.storage->u_min();
      } else if (drift + b.weight * b.dbounds.hi <= 1e-12) {
        u = b.storage->u_max();
      }
    }
    sol.u(v) = u;
  }

  sol.objective = 0.0;
  sol.stage_cost = 0.0;
  for (int v = 0; v < nb; ++v) {
    const BusOnline& b = buses[v];
    const double inflow = ne > 0 ? net.net_inflow(sol.flow, v) : 0.0;
    const double g = evaluate_cost(*b.cost, *b.storage, b.real, sol.u(v), inflow);
    sol.stage_cost += g;
    sol.objective += g;
    if (opts.include_drift) {
      sol.objective += b.storage->lambda() * b.shifted_level * sol.u(v) / b.weight;
    }
  }

  const double tol = 1e-9 * (1.0 + std::abs(relaxed));
  if (std::abs(sol.objective - relaxed) > tol) {
    std::ostringstream msg;
    msg << "netting changed the dispatch objective from " << relaxed << " to " << sol.objective
        << "; the relaxed split was not tight";
    throw SolverError(msg.str());
  }
  return sol;
}

}  // namespace stornet
