#pragma once

#include <filesystem>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "stornet/planner.hpp"
#include "stornet/scenario_io.hpp"
#include "stornet/simulate.hpp"

namespace stornet {

inline std::vector<ValidatedStorage> scenario_storages(const Scenario& s) {
  std::vector<ValidatedStorage> out;
  out.reserve(s.buses.size());
  for (const BusConfig& b : s.buses) out.push_back(b.storage);
  return out;
}

inline std::vector<CostModel> scenario_costs(const Scenario& s) {
  std::vector<CostModel> out;
  out.reserve(s.buses.size());
  for (const BusConfig& b : s.buses) out.push_back(b.cost);
  return out;
}

inline ControllerParams plan_for_scenario(const Scenario& s, bool shared_w = false) {
  return shared_w ? plan_parameters_shared_w(scenario_storages(s), scenario_costs(s))
                  : plan_parameters(scenario_storages(s), scenario_costs(s));
}

inline ordered_json plan_report(const Scenario& s, const ControllerParams& params) {
  ordered_json j;
  j["tool"] = "stornet";
  j["version"] = tool_version();
  j["scenario_hash"] = s.source_hash;
  j["shared_w"] = params.shared_w;
  ordered_json buses = ordered_json::array();
  for (std::size_t v = 0; v < params.buses.size(); ++v) {
    const BusPlan& p = params.buses[v];
    ordered_json bj;
    bj["name"] = s.buses[v].name;
    bj["gamma"] = p.gamma;
    bj["w"] = p.w;
    if (std::isfinite(p.w_max)) {
      bj["w_max"] = p.w_max;
    } else {
      bj["w_max"] = nullptr;
    }
    bj["w_capped"] = p.w_capped;
    bj["m_u"] = p.m_u;
    bj["m_s_weighted"] = p.m_s_weighted;
    bj["bound"] = p.bound;
    buses.push_back(std::move(bj));
  }
  j["buses"] = std::move(buses);
  j["certified_bound"] = params.certified_bound;
  return j;
}

/// Certified-bound report; with use_markov the per-bus bounds are rescaled
/// by the return-time moments of each bus's disturbance chain.
inline ordered_json bound_report(const Scenario& s, bool use_markov) {
  const ControllerParams params = plan_for_scenario(s);
  ordered_json j;
  j["tool"] = "stornet";
  j["version"] = tool_version();
  j["scenario_hash"] = s.source_hash;
  j["iid_bound"] = params.certified_bound;
  if (use_markov) {
    double total = 0.0;
    ordered_json buses = ordered_json::array();
    for (std::size_t v = 0; v < s.buses.size(); ++v) {
      const DisturbanceProcess& d = s.buses[v].disturbance;
      if (d.type != DisturbanceProcess::Type::markov) {
        throw ScenarioError(ScenarioError::Code::semantic,
                            "bus '" + s.buses[v].name +
                                "' has no Markov disturbance; --markov needs one on every bus");
      }
      const ReturnTimeMoments m = return_time_moments(*d.chain, d.chain->initial_state());
      const double b = markov_bound(s.buses[v].storage, params.buses[v].gamma,
                                    params.buses[v].w, m.mean, m.second_moment);
      ordered_json bj;
      bj["name"] = s.buses[v].name;
      bj["mean_return"] = m.mean;
      bj["second_moment_return"] = m.second_moment;
      bj["markov_bound"] = b;
      buses.push_back(std::move(bj));
      total += b;
    }
    j["markov_buses"] = std::move(buses);
    j["markov_bound"] = total;
  }
  return j;
}

inline ordered_json kmatrix_report(const Scenario& s) {
  ordered_json j;
  j["tool"] = "stornet";
  j["version"] = tool_version();
  j["scenario_hash"] = s.source_hash;
  if (!s.network.has_value()) {
    j["buses"] = 1;
    j["edges"] = 0;
    j["rows"] = 0;
    j["k"] = ordered_json::array();
    return j;
  }
  const PowerNetwork& net = *s.network;
  j["buses"] = net.num_buses();
  j["edges"] = net.num_edges();
  j["rows"] = static_cast<int>(net.k_matrix().rows());
  ordered_json k = ordered_json::array();
  for (int r = 0; r < net.k_matrix().rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (int e = 0; e < net.k_matrix().cols(); ++e) row.push_back(net.k_matrix()(r, e));
    k.push_back(std::move(row));
  }
  j["k"] = std::move(k);
  if (net.num_edges() > 0 && net.k_matrix().rows() > 0) {
    const Eigen::MatrixXd h = net.beta().asDiagonal() * net.incidence();
    j["max_abs_kh"] = (net.k_matrix() * h).cwiseAbs().maxCoeff();
  } else {
    j["max_abs_kh"] = 0.0;
  }
  return j;
}

struct ComparePoint {
  double s_max = 0.0;
  SummaryMetrics metrics;
};

struct CompareResult {
  std::vector<ComparePoint> points;
  std::string csv;
  ordered_json summary;
};

/// Run all three policies with common random numbers on each sweep point
/// (or on the scenario itself when no sweep is given) and assemble the
/// figure-ready table plus the full metrics report.
inline CompareResult run_compare(const Scenario& base) {
  std::vector<double> sweep = base.sweep_s_max;
  if (sweep.empty()) sweep.push_back(base.buses.front().storage.s_max());

  CompareResult result;
  std::ostringstream csv;
  csv << "s_max,j_no_storage,j_greedy,j_lyapunov,lower_bound,upper_pct_savings\n";
  ordered_json points = ordered_json::array();
  for (double s_max : sweep) {
    const Scenario sc = scale_scenario(base, s_max);
    const ControllerParams params = plan_for_scenario(sc);
    const SimulationTrace lyap = run(sc, PolicyKind::lyapunov, &params, sc.seed);
    const SimulationTrace greedy = run(sc, PolicyKind::greedy, nullptr, sc.seed);
    const SimulationTrace none = run(sc, PolicyKind::no_storage, nullptr, sc.seed);
    const SummaryMetrics m = summarize(lyap, none, &greedy, params.certified_bound, sc.warmup);
    result.points.push_back({s_max, m});

    csv << format_double(s_max) << "," << format_double(m.j_no_storage) << ","
        << format_double(m.j_greedy) << "," << format_double(m.j_lyapunov) << ","
        << format_double(m.lower_bound) << "," << format_double(m.pct_savings_upper_bound)
        << "\n";

    ordered_json pj;
    pj["s_max"] = s_max;
    pj["certified_bound"] = m.certified_bound;
    pj["j_no_storage"] = m.j_no_storage;
    pj["se_no_storage"] = m.se_no_storage;
    pj["j_greedy"] = m.j_greedy;
    pj["se_greedy"] = m.se_greedy;
    pj["j_lyapunov"] = m.j_lyapunov;
    pj["se_lyapunov"] = m.se_lyapunov;
    pj["lower_bound"] = m.lower_bound;
    pj["vos"] = ordered_json::array({m.vos_lo, m.vos_hi});
    pj["pct_savings"] = m.pct_savings;
    pj["pct_savings_upper_bound"] = m.pct_savings_upper_bound;
    pj["pct_applicable"] = m.pct_applicable;
    pj["violation_count"] = m.violation_count;
    pj["threshold_flags"] = m.threshold_flags;
    points.push_back(std::move(pj));
  }
  result.csv = csv.str();

  ordered_json summary;
  summary["tool"] = "stornet";
  summary["version"] = tool_version();
  summary["scenario_hash"] = base.source_hash;
  summary["horizon"] = base.horizon;
  summary["seed"] = base.seed;
  summary["warmup"] = base.warmup;
  summary["points"] = std::move(points);
  result.summary = summary;
  return result;
}

inline void write_compare_outputs(const CompareResult& result, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir + "/sweep.csv", result.csv);
  write_file_atomic(out_dir + "/summary.json", result.summary.dump(2) + "\n");
}

/// Fan out independent seeds (seed, seed+1, ...), in parallel; traces are
/// written in seed order after all runs complete.
inline ordered_json run_simulate(const Scenario& scenario, PolicyKind policy, int num_seeds,
                                 const std::string& out_dir) {
  if (num_seeds < 1) num_seeds = 1;
  ControllerParams params;
  if (policy == PolicyKind::lyapunov) params = plan_for_scenario(scenario);

  std::vector<std::future<SimulationTrace>> futures;
  futures.reserve(num_seeds);
  for (int i = 0; i < num_seeds; ++i) {
    const std::uint64_t seed = scenario.seed + static_cast<std::uint64_t>(i);
    futures.push_back(std::async(std::launch::async, [&, seed] {
      return run(scenario, policy, policy == PolicyKind::lyapunov ? &params : nullptr, seed);
    }));
  }
  std::vector<SimulationTrace> traces;
  traces.reserve(num_seeds);
  for (auto& f : futures) traces.push_back(f.get());

  ordered_json report;
  report["tool"] = "stornet";
  report["version"] = tool_version();
  report["scenario_hash"] = scenario.source_hash;
  report["policy"] = policy_name(policy);
  report["horizon"] = scenario.horizon;
  if (policy == PolicyKind::lyapunov) report["certified_bound"] = params.certified_bound;
  ordered_json runs = ordered_json::array();
  const bool to_files = !out_dir.empty();
  if (to_files) std::filesystem::create_directories(out_dir);
  for (int i = 0; i < num_seeds; ++i) {
    const std::uint64_t seed = scenario.seed + static_cast<std::uint64_t>(i);
    ordered_json rj;
    rj["seed"] = seed;
    rj["time_average_cost"] = time_average_cost(traces[i], scenario.warmup);
    rj["se"] = batch_means_se(traces[i].total_cost, scenario.warmup);
    rj["violation_count"] = traces[i].violation_count;
    rj["threshold_flags"] = traces[i].threshold_flags;
    if (to_files) {
      const std::string name = "trace_seed" + std::to_string(seed) + ".csv";
      write_file_atomic(out_dir + "/" + name, trace_to_csv(traces[i], scenario));
      rj["trace"] = name;
    }
    runs.push_back(std::move(rj));
  }
  report["runs"] = std::move(runs);
  if (to_files) write_file_atomic(out_dir + "/simulate_report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace stornet
