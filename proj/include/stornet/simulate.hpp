#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stornet/cost.hpp"
#include "stornet/errors.hpp"
#include "stornet/network.hpp"
#include "stornet/planner.hpp"
#include "stornet/policies.hpp"
#include "stornet/stochastic.hpp"
#include "stornet/storage.hpp"

namespace stornet {

struct BusConfig {
  std::string name;
  ValidatedStorage storage;
  CostModel cost;
  DisturbanceProcess disturbance;
  double initial_level = 0.0;
};

struct Scenario {
  std::vector<BusConfig> buses;
  std::optional<PowerNetwork> network;
  long horizon = 0;
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::lyapunov;
  long warmup = 0;
  std::vector<double> sweep_s_max;  // optional capacity sweep for compare
  std::string source_hash;
};

/// Uniformly rescale a storage: capacity sweeps scale the ramp bounds
/// together with the level bounds so the box geometry is preserved.
inline ValidatedStorage scale_storage(const ValidatedStorage& st, double factor) {
  if (!(factor > 0.0)) throw PlannerError("scale factor must be positive");
  StorageSpec s = st.spec();
  s.s_min *= factor;
  s.s_max *= factor;
  s.u_min *= factor;
  s.u_max *= factor;
  return ValidatedStorage::validate(s);
}

inline Scenario scale_scenario(const Scenario& base, double target_s_max) {
  Scenario out = base;
  for (BusConfig& bus : out.buses) {
    const double s0 = bus.storage.s_max();
    if (!(s0 > 0.0)) throw PlannerError("capacity sweep needs s_max > 0 in the base scenario");
    const double factor = target_s_max / s0;
    bus.storage = scale_storage(bus.storage, factor);
    bus.initial_level *= factor;
  }
  return out;
}

struct TraceRow {
  long t;
  int bus;
  double s;
  double u;
  double cost;
};

struct SimulationTrace {
  long horizon = 0;
  int num_buses = 0;
  PolicyKind policy = PolicyKind::lyapunov;
  std::vector<TraceRow> rows;          // one per (t, bus), t-major
  std::vector<Eigen::VectorXd> flows;  // one per period
  std::vector<double> total_cost;      // per-period cost summed over buses
  std::vector<double> avg_cost_series; // running mean of total_cost
  long threshold_flags = 0;            // saturation-rule mismatches (diagnostic)
  int violation_count = 0;             // recorded levels outside bounds
};

namespace detail {

inline std::string dump_state(long t, const std::vector<BusConfig>& buses,
                              const std::vector<double>& levels, const Eigen::VectorXd& u,
                              const std::vector<double>& deltas) {
  std::ostringstream out;
  out << "period " << t << ":";
  for (std::size_t v = 0; v < buses.size(); ++v) {
    out << " [" << buses[v].name << " s=" << levels[v] << " u=" << u(static_cast<int>(v))
        << " delta=" << deltas[v] << "]";
  }
  return out.str();
}

}  // namespace detail

/// Closed-loop simulation of one policy over the horizon. Deterministic in
/// (scenario, seed); all policies draw the same disturbances for a given
/// seed so cross-policy comparisons use common random numbers.
inline SimulationTrace run(const Scenario& scenario, PolicyKind policy,
                           const ControllerParams* params, std::uint64_t seed) {
  const int nb = static_cast<int>(scenario.buses.size());
  if (policy == PolicyKind::lyapunov) {
    if (params == nullptr || static_cast<int>(params->buses.size()) != nb) {
      throw SimulationError(0, "certified controller parameters required");
    }
  }
  const bool networked = scenario.network.has_value() && scenario.network->num_edges() > 0;

  SimulationTrace trace;
  trace.horizon = scenario.horizon;
  trace.num_buses = nb;
  trace.policy = policy;
  trace.rows.reserve(static_cast<std::size_t>(scenario.horizon) * nb);
  trace.total_cost.reserve(scenario.horizon);
  trace.avg_cost_series.reserve(scenario.horizon);
  if (networked) trace.flows.reserve(scenario.horizon);

  std::vector<DisturbanceSampler> samplers;
  samplers.reserve(nb);
  std::vector<SubderivBounds> dbounds(nb);
  for (int v = 0; v < nb; ++v) {
    samplers.emplace_back(scenario.buses[v].disturbance, seed, static_cast<std::uint64_t>(v));
    dbounds[v] = subderivative_bounds(scenario.buses[v].cost, scenario.buses[v].storage);
  }

  std::vector<double> levels(nb);
  for (int v = 0; v < nb; ++v) levels[v] = scenario.buses[v].initial_level;

  std::vector<double> deltas(nb);
  std::vector<BusOnline> online(nb);
  double cost_sum = 0.0;

  for (long t = 1; t <= scenario.horizon; ++t) {
    for (int v = 0; v < nb; ++v) {
      const BusConfig& bus = scenario.buses[v];
      deltas[v] = samplers[v].delta_at(t);
      online[v].storage = &bus.storage;
      online[v].cost = &bus.cost;
      online[v].real = realize_cost(bus.cost, deltas[v], t, seed, static_cast<std::uint64_t>(v));
      online[v].dbounds = dbounds[v];
      if (policy == PolicyKind::lyapunov) {
        online[v].shifted_level = levels[v] + params->buses[v].gamma;
        online[v].weight = params->buses[v].w;
      } else {
        online[v].shifted_level = 0.0;
        online[v].weight = 1.0;
      }
    }

    Eigen::VectorXd u(nb);
    Eigen::VectorXd flow;
    if (networked) {
      OnlineSolution sol;
      switch (policy) {
        case PolicyKind::lyapunov:
          sol = solve_network(online, *scenario.network);
          break;
        case PolicyKind::greedy:
          sol = greedy_network(online, *scenario.network, levels);
          break;
        case PolicyKind::no_storage:
          sol = no_storage_network(online, *scenario.network);
          break;
      }
      u = sol.u;
      flow = sol.flow;
      if (!scenario.network->flow_feasible(flow)) {
        throw SimulationError(t, "infeasible flow vector: " +
                                     detail::dump_state(t, scenario.buses, levels, u, deltas));
      }
    } else {
      for (int v = 0; v < nb; ++v) {
        switch (policy) {
          case PolicyKind::lyapunov:
            u(v) = solve_single_bus(online[v]);
            break;
          case PolicyKind::greedy:
            u(v) = greedy_single_bus(scenario.buses[v].storage, scenario.buses[v].cost,
                                     online[v].real, levels[v]);
            break;
          case PolicyKind::no_storage:
            u(v) = 0.0;
            break;
        }
      }
    }

    if (policy == PolicyKind::lyapunov) {
      // Saturation-rule audit: with the drift coefficient beyond the cost
      // slope range the optimizer must sit at the ramp bound.
      for (int v = 0; v < nb; ++v) {
        const ValidatedStorage& st = scenario.buses[v].storage;
        const double drift = st.lambda() * online[v].shifted_level;
        const double w = online[v].weight;
        if (drift + w * dbounds[v].lo >= 1e-9 && std::abs(u(v) - st.u_min()) > 1e-9) {
          ++trace.threshold_flags;
        }
        if (drift + w * dbounds[v].hi <= -1e-9 && std::abs(u(v) - st.u_max()) > 1e-9) {
          ++trace.threshold_flags;
        }
      }
    }

    double total = 0.0;
    for (int v = 0; v < nb; ++v) {
      const double inflow = networked ? scenario.network->net_inflow(flow, v) : 0.0;
      const double g = evaluate_cost(scenario.buses[v].cost, scenario.buses[v].storage,
                                     online[v].real, u(v), inflow);
      total += g;
      trace.rows.push_back({t, v, levels[v], u(v), g});
    }
    trace.total_cost.push_back(total);
    cost_sum += total;
    trace.avg_cost_series.push_back(cost_sum / static_cast<double>(t));
    if (networked) trace.flows.push_back(flow);

    if (policy != PolicyKind::no_storage) {
      for (int v = 0; v < nb; ++v) {
        const ValidatedStorage& st = scenario.buses[v].storage;
        try {
          levels[v] = st.step(StorageState{levels[v]}, u(v)).level;
        } catch (const StorageError& e) {
          ++trace.violation_count;
          throw SimulationError(
              t, std::string("storage assertion failed (") + e.what() + ") at " +
                     detail::dump_state(t, scenario.buses, levels, u, deltas));
        }
      }
    }
  }
  return trace;
}

/// Time average of the per-period total cost after the warmup prefix.
inline double time_average_cost(const SimulationTrace& trace, long warmup = 0) {
  if (static_cast<long>(trace.total_cost.size()) <= warmup) return 0.0;
  double sum = 0.0;
  long n = 0;
  for (std::size_t t = static_cast<std::size_t>(warmup); t < trace.total_cost.size(); ++t) {
    sum += trace.total_cost[t];
    ++n;
  }
  return sum / static_cast<double>(n);
}

/// Standard error by batch means over 20 batches; series shorter than the
/// batch count fall back to one batch per point.
inline double batch_means_se(const std::vector<double>& series, long warmup = 0) {
  const long len = static_cast<long>(series.size()) - warmup;
  if (len <= 1) return 0.0;
  const long batches = std::min<long>(20, len);
  const long size = len / batches;
  std::vector<double> means;
  means.reserve(batches);
  for (long b = 0; b < batches; ++b) {
    double sum = 0.0;
    for (long i = 0; i < size; ++i) sum += series[warmup + b * size + i];
    means.push_back(sum / static_cast<double>(size));
  }
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

inline double difference_se(const SimulationTrace& a, const SimulationTrace& b, long warmup = 0) {
  const std::size_t n = std::min(a.total_cost.size(), b.total_cost.size());
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a.total_cost[i] - b.total_cost[i];
  return batch_means_se(diff, warmup);
}

struct SummaryMetrics {
  double j_lyapunov = 0.0;
  double se_lyapunov = 0.0;
  double j_no_storage = 0.0;
  double se_no_storage = 0.0;
  double j_greedy = 0.0;
  double se_greedy = 0.0;
  bool has_greedy = false;
  double certified_bound = 0.0;
  double lower_bound = 0.0;  // j_lyapunov - certified_bound
  double vos_lo = 0.0;
  double vos_hi = 0.0;
  double pct_savings = 0.0;  // of the online policy, vs no storage
  double pct_savings_upper_bound = 0.0;
  bool pct_applicable = true;
  int violation_count = 0;
  long threshold_flags = 0;
};

/// Cross-policy accounting: the certified bound turns the online policy's
/// average into a bracket for the unavailable optimum, a value-of-storage
/// interval and a savings ceiling that no policy can beat.
inline SummaryMetrics summarize(const SimulationTrace& lyapunov, const SimulationTrace& no_storage,
                                const SimulationTrace* greedy, double certified_bound,
                                long warmup = 0) {
  SummaryMetrics m;
  m.j_lyapunov = time_average_cost(lyapunov, warmup);
  m.se_lyapunov = batch_means_se(lyapunov.total_cost, warmup);
  m.j_no_storage = time_average_cost(no_storage, warmup);
  m.se_no_storage = batch_means_se(no_storage.total_cost, warmup);
  if (greedy != nullptr) {
    m.has_greedy = true;
    m.j_greedy = time_average_cost(*greedy, warmup);
    m.se_greedy = batch_means_se(greedy->total_cost, warmup);
  }
  m.certified_bound = certified_bound;
  m.lower_bound = m.j_lyapunov - certified_bound;
  m.vos_lo = m.j_no_storage - m.j_lyapunov;
  m.vos_hi = m.vos_lo + certified_bound;
  m.violation_count = lyapunov.violation_count;
  m.threshold_flags = lyapunov.threshold_flags;
  if (m.j_no_storage != 0.0) {
    m.pct_savings = (m.j_no_storage - m.j_lyapunov) / m.j_no_storage;
    m.pct_savings_upper_bound = (m.j_no_storage - m.j_lyapunov + certified_bound) / m.j_no_storage;
    m.pct_applicable = true;
  } else {
    m.pct_savings = 0.0;
    m.pct_savings_upper_bound = 0.0;
    m.pct_applicable = false;
  }
  return m;
}

}  // namespace stornet
