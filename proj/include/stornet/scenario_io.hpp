#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stornet/errors.hpp"
#include "stornet/simulate.hpp"

namespace stornet {

using ordered_json = nlohmann::ordered_json;

inline std::string tool_version() {
#ifdef STORNET_VERSION
  return STORNET_VERSION;
#else
  return "dev";
#endif
}

inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Shortest round-trip decimal representation; used for all CSV output so
/// repeated runs are byte-identical.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// All file output goes through a temp-file-and-rename so failures never
/// leave partial files behind.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw ScenarioError(ScenarioError::Code::io, "cannot open " + tmp + " for writing");
    }
    out << content;
    out.flush();
    if (!out) {
      throw ScenarioError(ScenarioError::Code::io, "failed writing " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw ScenarioError(ScenarioError::Code::io, "failed renaming " + tmp + " to " + path);
  }
}

namespace io_detail {

inline const ordered_json& require_field(const ordered_json& j, const char* key,
                                         const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw ScenarioError(ScenarioError::Code::schema, path + ": missing field '" + key + "'");
  }
  return j.at(key);
}

inline double as_number(const ordered_json& j, const std::string& path) {
  if (!j.is_number()) {
    throw ScenarioError(ScenarioError::Code::schema, path + ": expected a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    throw ScenarioError(ScenarioError::Code::schema, path + ": value must be finite");
  }
  return v;
}

inline double require_number(const ordered_json& j, const char* key, const std::string& path) {
  return as_number(require_field(j, key, path), path + "." + key);
}

inline double optional_number(const ordered_json& j, const char* key, const std::string& path,
                              double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return as_number(j.at(key), path + "." + key);
}

inline long require_integer(const ordered_json& j, const char* key, const std::string& path) {
  const ordered_json& f = require_field(j, key, path);
  if (!f.is_number_integer()) {
    throw ScenarioError(ScenarioError::Code::schema, path + "." + key + ": expected an integer");
  }
  return f.get<long>();
}

inline std::string require_string(const ordered_json& j, const char* key,
                                  const std::string& path) {
  const ordered_json& f = require_field(j, key, path);
  if (!f.is_string()) {
    throw ScenarioError(ScenarioError::Code::schema, path + "." + key + ": expected a string");
  }
  return f.get<std::string>();
}

inline Schedule schedule_from_json(const ordered_json& j, const std::string& path) {
  if (j.is_number()) return Schedule::constant(as_number(j, path));
  if (!j.is_object()) {
    throw ScenarioError(ScenarioError::Code::schema,
                        path + ": expected a number or a schedule object");
  }
  const std::string type = require_string(j, "type", path);
  if (type == "constant") {
    return Schedule::constant(require_number(j, "value", path));
  }
  if (type == "day_night") {
    Schedule s = Schedule::day_night_rule(require_number(j, "day", path),
                                          require_number(j, "night", path));
    if (j.contains("day_start")) s.day_start = static_cast<int>(require_integer(j, "day_start", path));
    if (j.contains("day_end")) s.day_end = static_cast<int>(require_integer(j, "day_end", path));
    if (j.contains("period")) s.period = static_cast<int>(require_integer(j, "period", path));
    if (s.period <= 0 || s.day_start < 0 || s.day_end > s.period || s.day_start > s.day_end) {
      throw ScenarioError(ScenarioError::Code::schema, path + ": malformed day window");
    }
    return s;
  }
  if (type == "table") {
    const ordered_json& vals = require_field(j, "values", path);
    if (!vals.is_array() || vals.empty()) {
      throw ScenarioError(ScenarioError::Code::schema, path + ".values: expected a nonempty array");
    }
    std::vector<double> v;
    v.reserve(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      v.push_back(as_number(vals[i], path + ".values[" + std::to_string(i) + "]"));
    }
    return Schedule::table(std::move(v));
  }
  if (type == "iid_uniform") {
    const double lo = require_number(j, "min", path);
    const double hi = require_number(j, "max", path);
    if (!(lo <= hi)) {
      throw ScenarioError(ScenarioError::Code::schema, path + ": min exceeds max");
    }
    return Schedule::iid_uniform(lo, hi);
  }
  throw ScenarioError(ScenarioError::Code::schema, path + ": unknown schedule type '" + type + "'");
}

inline ordered_json schedule_to_json(const Schedule& s) {
  ordered_json j;
  switch (s.type) {
    case Schedule::Type::constant:
      j["type"] = "constant";
      j["value"] = s.value;
      break;
    case Schedule::Type::day_night:
      j["type"] = "day_night";
      j["day"] = s.day;
      j["night"] = s.night;
      j["day_start"] = s.day_start;
      j["day_end"] = s.day_end;
      j["period"] = s.period;
      break;
    case Schedule::Type::table:
      j["type"] = "table";
      j["values"] = s.values;
      break;
    case Schedule::Type::iid_uniform:
      j["type"] = "iid_uniform";
      j["min"] = s.lo;
      j["max"] = s.hi;
      break;
  }
  return j;
}

inline CostTerm term_from_json(const ordered_json& j, const std::string& path) {
  CostTerm term;
  const std::string kind = require_string(j, "kind", path);
  if (kind == "positive_part") {
    term.kind = CostKind::positive_part;
  } else if (kind == "linear") {
    term.kind = CostKind::linear;
  } else {
    throw ScenarioError(ScenarioError::Code::schema, path + ".kind: unknown kind '" + kind + "'");
  }
  term.alpha_delta = optional_number(j, "alpha_delta", path, 0.0);
  term.alpha_c = optional_number(j, "alpha_c", path, 0.0);
  term.alpha_d = optional_number(j, "alpha_d", path, 0.0);
  term.alpha_f = optional_number(j, "alpha_f", path, 0.0);
  if (j.contains("alpha_const")) {
    term.alpha_const = schedule_from_json(j.at("alpha_const"), path + ".alpha_const");
  }
  term.p = schedule_from_json(require_field(j, "p", path), path + ".p");
  term.p_min = optional_number(j, "p_min", path, term.p.min_value());
  term.p_max = optional_number(j, "p_max", path, term.p.max_value());
  return term;
}

inline ordered_json term_to_json(const CostTerm& t) {
  ordered_json j;
  j["kind"] = t.kind == CostKind::positive_part ? "positive_part" : "linear";
  j["alpha_delta"] = t.alpha_delta;
  j["alpha_c"] = t.alpha_c;
  j["alpha_d"] = t.alpha_d;
  j["alpha_f"] = t.alpha_f;
  j["alpha_const"] = schedule_to_json(t.alpha_const);
  j["p"] = schedule_to_json(t.p);
  j["p_min"] = t.p_min;
  j["p_max"] = t.p_max;
  return j;
}

inline DisturbanceProcess disturbance_from_json(const ordered_json& j, const std::string& path) {
  const std::string type = require_string(j, "type", path);
  std::optional<std::uint64_t> seed;
  if (j.contains("seed")) seed = static_cast<std::uint64_t>(require_integer(j, "seed", path));
  auto with_seed = [&](DisturbanceProcess p) {
    p.seed = seed;
    return p;
  };
  if (type == "iid_laplace") {
    const double sigma = require_number(j, "sigma", path);
    if (!(sigma >= 0.0)) {
      throw ScenarioError(ScenarioError::Code::schema, path + ".sigma: must be nonnegative");
    }
    return with_seed(DisturbanceProcess::laplace(sigma));
  }
  if (type == "iid_empirical") {
    const ordered_json& sup = require_field(j, "support", path);
    const ordered_json& wts = require_field(j, "weights", path);
    if (!sup.is_array() || !wts.is_array()) {
      throw ScenarioError(ScenarioError::Code::schema, path + ": support/weights must be arrays");
    }
    std::vector<double> support, weights;
    for (std::size_t i = 0; i < sup.size(); ++i) {
      support.push_back(as_number(sup[i], path + ".support[" + std::to_string(i) + "]"));
    }
    for (std::size_t i = 0; i < wts.size(); ++i) {
      weights.push_back(as_number(wts[i], path + ".weights[" + std::to_string(i) + "]"));
    }
    try {
      return with_seed(DisturbanceProcess::empirical(std::move(support), std::move(weights)));
    } catch (const Error& e) {
      throw ScenarioError(ScenarioError::Code::semantic, path + ": " + e.what());
    }
  }
  if (type == "markov") {
    const ordered_json& rows = require_field(j, "transition", path);
    if (!rows.is_array() || rows.empty()) {
      throw ScenarioError(ScenarioError::Code::schema, path + ".transition: expected a matrix");
    }
    const int n = static_cast<int>(rows.size());
    Eigen::MatrixXd p(n, n);
    for (int i = 0; i < n; ++i) {
      const ordered_json& row = rows[i];
      if (!row.is_array() || static_cast<int>(row.size()) != n) {
        throw ScenarioError(ScenarioError::Code::schema,
                            path + ".transition: rows must all have length " + std::to_string(n));
      }
      for (int k = 0; k < n; ++k) {
        p(i, k) = as_number(row[k], path + ".transition[" + std::to_string(i) + "][" +
                                        std::to_string(k) + "]");
      }
    }
    const int init = static_cast<int>(require_integer(j, "initial_state", path));
    const ordered_json& dv = require_field(j, "delta_values", path);
    if (!dv.is_array()) {
      throw ScenarioError(ScenarioError::Code::schema, path + ".delta_values: expected an array");
    }
    std::vector<double> deltas;
    for (std::size_t i = 0; i < dv.size(); ++i) {
      deltas.push_back(as_number(dv[i], path + ".delta_values[" + std::to_string(i) + "]"));
    }
    try {
      return with_seed(DisturbanceProcess::markov_process(MarkovChain::validate(std::move(p), init),
                                                          std::move(deltas)));
    } catch (const Error& e) {
      throw ScenarioError(ScenarioError::Code::semantic, path + ": " + e.what());
    }
  }
  throw ScenarioError(ScenarioError::Code::schema, path + ": unknown disturbance type '" + type + "'");
}

inline ordered_json disturbance_to_json(const DisturbanceProcess& d) {
  ordered_json j;
  switch (d.type) {
    case DisturbanceProcess::Type::iid_laplace:
      j["type"] = "iid_laplace";
      j["sigma"] = d.sigma;
      break;
    case DisturbanceProcess::Type::iid_empirical:
      j["type"] = "iid_empirical";
      j["support"] = d.support;
      j["weights"] = d.weights;
      break;
    case DisturbanceProcess::Type::markov: {
      j["type"] = "markov";
      ordered_json rows = ordered_json::array();
      const Eigen::MatrixXd& p = d.chain->transition();
      for (int i = 0; i < p.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (int k = 0; k < p.cols(); ++k) row.push_back(p(i, k));
        rows.push_back(std::move(row));
      }
      j["transition"] = std::move(rows);
      j["initial_state"] = d.chain->initial_state();
      j["delta_values"] = d.delta_values;
      break;
    }
  }
  if (d.seed.has_value()) j["seed"] = *d.seed;
  return j;
}

}  // namespace io_detail

inline PolicyKind policy_from_string(const std::string& s) {
  if (s == "lyapunov") return PolicyKind::lyapunov;
  if (s == "greedy") return PolicyKind::greedy;
  if (s == "no-storage" || s == "no_storage") return PolicyKind::no_storage;
  throw ScenarioError(ScenarioError::Code::schema, "unknown policy '" + s + "'");
}

inline Scenario scenario_from_json(const ordered_json& j, const std::string& source_bytes) {
  using namespace io_detail;
  const std::string root = "scenario";
  const std::string version = require_string(j, "version", root);
  if (version != "1") {
    throw ScenarioError(ScenarioError::Code::schema, "unsupported scenario version '" + version + "'");
  }

  Scenario scenario;
  scenario.horizon = require_integer(j, "horizon", root);
  if (scenario.horizon < 0) {
    throw ScenarioError(ScenarioError::Code::schema, "horizon must be nonnegative");
  }
  scenario.seed = static_cast<std::uint64_t>(require_integer(j, "seed", root));
  scenario.policy = policy_from_string(j.contains("policy") ? require_string(j, "policy", root)
                                                            : std::string("lyapunov"));
  scenario.warmup = j.contains("warmup") ? require_integer(j, "warmup", root) : 0;
  if (scenario.warmup < 0) {
    throw ScenarioError(ScenarioError::Code::schema, "warmup must be nonnegative");
  }

  const ordered_json& buses = require_field(j, "buses", root);
  if (!buses.is_array() || buses.empty()) {
    throw ScenarioError(ScenarioError::Code::schema, "buses: expected a nonempty array");
  }
  for (std::size_t v = 0; v < buses.size(); ++v) {
    const std::string path = "buses[" + std::to_string(v) + "]";
    const ordered_json& bj = buses[v];
    const std::string name = require_string(bj, "name", path);
    for (const BusConfig& other : scenario.buses) {
      if (other.name == name) {
        throw ScenarioError(ScenarioError::Code::semantic,
                            path + ".name: duplicate bus name '" + name + "'");
      }
    }
    const ordered_json& sj = require_field(bj, "storage", path);
    StorageSpec spec;
    spec.s_min = require_number(sj, "s_min", path + ".storage");
    spec.s_max = require_number(sj, "s_max", path + ".storage");
    spec.u_min = require_number(sj, "u_min", path + ".storage");
    spec.u_max = require_number(sj, "u_max", path + ".storage");
    spec.mu_c = require_number(sj, "mu_c", path + ".storage");
    spec.mu_d = require_number(sj, "mu_d", path + ".storage");
    spec.lambda = require_number(sj, "lambda", path + ".storage");
    std::optional<ValidatedStorage> storage;
    try {
      storage = ValidatedStorage::validate(spec);
    } catch (const StorageError& e) {
      throw ScenarioError(ScenarioError::Code::semantic, path + ".storage: " + e.what());
    }

    const ordered_json& cj = require_field(bj, "cost", path);
    if (!cj.is_array()) {
      throw ScenarioError(ScenarioError::Code::schema, path + ".cost: expected an array of terms");
    }
    CostModel cost;
    for (std::size_t l = 0; l < cj.size(); ++l) {
      cost.terms.push_back(term_from_json(cj[l], path + ".cost[" + std::to_string(l) + "]"));
    }
    try {
      validate_cost_model(cost, *storage);
    } catch (const CostModelError& e) {
      throw ScenarioError(ScenarioError::Code::semantic, path + ".cost: " + e.what());
    }

    DisturbanceProcess dist =
        disturbance_from_json(require_field(bj, "disturbance", path), path + ".disturbance");

    const double init = optional_number(bj, "initial_level", path, spec.s_min);
    if (!storage->level_feasible(init, 0.0)) {
      throw ScenarioError(ScenarioError::Code::semantic,
                          path + ".initial_level: outside the storage level bounds");
    }
    scenario.buses.push_back(
        BusConfig{name, *storage, std::move(cost), std::move(dist), init});
  }

  if (j.contains("network")) {
    const ordered_json& nj = j.at("network");
    const ordered_json& ej = require_field(nj, "edges", "network");
    if (!ej.is_array()) {
      throw ScenarioError(ScenarioError::Code::schema, "network.edges: expected an array");
    }
    std::vector<std::pair<int, int>> edges;
    std::vector<double> beta, f_max;
    auto bus_index = [&](const std::string& name, const std::string& path) {
      for (std::size_t v = 0; v < scenario.buses.size(); ++v) {
        if (scenario.buses[v].name == name) return static_cast<int>(v);
      }
      throw ScenarioError(ScenarioError::Code::semantic,
                          path + ": references unknown bus '" + name + "'");
    };
    for (std::size_t e = 0; e < ej.size(); ++e) {
      const std::string path = "network.edges[" + std::to_string(e) + "]";
      edges.emplace_back(bus_index(require_string(ej[e], "from", path), path),
                         bus_index(require_string(ej[e], "to", path), path));
      beta.push_back(require_number(ej[e], "beta", path));
      f_max.push_back(require_number(ej[e], "f_max", path));
    }
    try {
      scenario.network = PowerNetwork::build(static_cast<int>(scenario.buses.size()), edges,
                                             beta, f_max);
    } catch (const NetworkError& e) {
      throw ScenarioError(ScenarioError::Code::semantic, std::string("network: ") + e.what());
    }
  } else if (scenario.buses.size() > 1) {
    throw ScenarioError(ScenarioError::Code::semantic,
                        "multi-bus scenarios require a network section");
  }

  if (j.contains("sweep")) {
    const ordered_json& sw = require_field(j.at("sweep"), "s_max", "sweep");
    if (!sw.is_array() || sw.empty()) {
      throw ScenarioError(ScenarioError::Code::schema, "sweep.s_max: expected a nonempty array");
    }
    for (std::size_t i = 0; i < sw.size(); ++i) {
      const double v = as_number(sw[i], "sweep.s_max[" + std::to_string(i) + "]");
      if (!(v > 0.0)) {
        throw ScenarioError(ScenarioError::Code::schema, "sweep.s_max: values must be positive");
      }
      scenario.sweep_s_max.push_back(v);
    }
  }

  scenario.source_hash = fnv1a_hex(source_bytes);
  return scenario;
}

inline Scenario load_scenario_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(ScenarioError::Code::parse, std::string("parse error: ") + e.what());
  }
  return scenario_from_json(j, text);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ScenarioError(ScenarioError::Code::io, "cannot open scenario file " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario_text(buf.str());
}

inline ordered_json scenario_to_json(const Scenario& s) {
  using namespace io_detail;
  ordered_json j;
  j["version"] = "1";
  j["horizon"] = s.horizon;
  j["seed"] = s.seed;
  j["policy"] = policy_name(s.policy);
  j["warmup"] = s.warmup;
  ordered_json buses = ordered_json::array();
  for (const BusConfig& bus : s.buses) {
    ordered_json bj;
    bj["name"] = bus.name;
    bj["initial_level"] = bus.initial_level;
    ordered_json sj;
    const StorageSpec& sp = bus.storage.spec();
    sj["s_min"] = sp.s_min;
    sj["s_max"] = sp.s_max;
    sj["u_min"] = sp.u_min;
    sj["u_max"] = sp.u_max;
    sj["mu_c"] = sp.mu_c;
    sj["mu_d"] = sp.mu_d;
    sj["lambda"] = sp.lambda;
    bj["storage"] = std::move(sj);
    ordered_json terms = ordered_json::array();
    for (const CostTerm& t : bus.cost.terms) terms.push_back(term_to_json(t));
    bj["cost"] = std::move(terms);
    bj["disturbance"] = disturbance_to_json(bus.disturbance);
    buses.push_back(std::move(bj));
  }
  j["buses"] = std::move(buses);
  if (s.network.has_value() && s.network->num_edges() > 0) {
    ordered_json edges = ordered_json::array();
    for (int e = 0; e < s.network->num_edges(); ++e) {
      ordered_json ej;
      ej["from"] = s.buses[s.network->edges()[e].first].name;
      ej["to"] = s.buses[s.network->edges()[e].second].name;
      ej["beta"] = s.network->beta()(e);
      ej["f_max"] = s.network->f_max()(e);
      edges.push_back(std::move(ej));
    }
    j["network"] = ordered_json{{"edges", std::move(edges)}};
  }
  if (!s.sweep_s_max.empty()) {
    j["sweep"] = ordered_json{{"s_max", s.sweep_s_max}};
  }
  return j;
}

inline std::string serialize_scenario(const Scenario& s) {
  return scenario_to_json(s).dump(2) + "\n";
}

/// Stable per-edge column ids for the trace CSV: "<from>-<to>", with a
/// "#k" suffix disambiguating parallel edges.
inline std::vector<std::string> edge_column_ids(const Scenario& s) {
  std::vector<std::string> ids;
  if (!s.network.has_value()) return ids;
  for (int e = 0; e < s.network->num_edges(); ++e) {
    const auto& [a, b] = s.network->edges()[e];
    std::string base = s.buses[a].name + "-" + s.buses[b].name;
    int dup = 1;
    for (const std::string& prev : ids) {
      if (prev == base || prev.rfind(base + "#", 0) == 0) ++dup;
    }
    ids.push_back(dup > 1 ? base + "#" + std::to_string(dup) : base);
  }
  return ids;
}

inline std::string trace_to_csv(const SimulationTrace& trace, const Scenario& scenario) {
  std::ostringstream out;
  const std::vector<std::string> edge_ids = edge_column_ids(scenario);
  out << "t,bus,s,u,cost";
  for (const std::string& id : edge_ids) out << ",flow:" << id;
  out << "\n";
  const int nb = trace.num_buses;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const TraceRow& row = trace.rows[i];
    out << row.t << "," << scenario.buses[row.bus].name << "," << format_double(row.s) << ","
        << format_double(row.u) << "," << format_double(row.cost);
    if (!edge_ids.empty()) {
      const Eigen::VectorXd& f = trace.flows[static_cast<std::size_t>(row.t - 1)];
      for (int e = 0; e < f.size(); ++e) out << "," << format_double(f(e));
    }
    out << "\n";
    (void)nb;
  }
  return out.str();
}

}  // namespace stornet
