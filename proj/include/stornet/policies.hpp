#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "stornet/online.hpp"

namespace stornet {

enum class PolicyKind { lyapunov, greedy, no_storage };

inline const char* policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::lyapunov:
      return "lyapunov";
    case PolicyKind::greedy:
      return "greedy";
    case PolicyKind::no_storage:
      return "no-storage";
  }
  return "?";
}

/// Myopic single-bus action: minimize the stage cost alone over the ramp box
/// intersected with the operations that keep the next level feasible.
inline double greedy_single_bus(const ValidatedStorage& st, const CostModel& model,
                                const CostRealization& real, double level) {
  const double carry = st.lambda() * level;
  const double lo = std::max(st.u_min(), st.s_min() - carry);
  const double hi = std::min(st.u_max(), st.s_max() - carry);
  return detail::minimize_scalar_piecewise(st, model, real, 0.0, lo, hi);
}

/// Myopic network action: the per-period dispatch without the drift term and
/// with hard next-level rows per bus.
inline OnlineSolution greedy_network(const std::vector<BusOnline>& buses, const PowerNetwork& net,
                                     const std::vector<double>& levels) {
  NetworkSolveOptions opts;
  opts.include_drift = false;
  opts.apply_threshold = false;
  opts.myopic_feasibility = true;
  opts.levels = &levels;
  return solve_network(buses, net, opts);
}

/// No storage operation; network flows are still cost-optimized.
inline OnlineSolution no_storage_network(const std::vector<BusOnline>& buses,
                                         const PowerNetwork& net) {
  NetworkSolveOptions opts;
  opts.include_drift = false;
  opts.apply_threshold = false;
  opts.zero_storage = true;
  return solve_network(buses, net, opts);
}

}  // namespace stornet
