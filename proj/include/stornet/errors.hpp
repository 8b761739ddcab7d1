#pragma once

#include <stdexcept>
#include <string>

namespace stornet {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Storage specification violates one of the consistency assumptions.
/// The code identifies which inequality failed.
class StorageError : public Error {
public:
  enum class Code {
    bounds_order,       // s_min <= s_max or u_min <= 0 <= u_max violated
    efficiency_range,   // mu_c, mu_d, lambda outside (0, 1]
    feasibility_low,    // lambda*s_min + u_max >= s_min violated
    feasibility_high,   // lambda*s_max + u_min <= s_max violated
    control_range,      // u_max - u_min < s_max - s_min violated
    ramp,               // operation outside [u_min, u_max]
    level_bound         // resulting level outside [s_min, s_max]
  };

  StorageError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

private:
  Code code_;
};

class NetworkError : public Error {
public:
  enum class Code { empty, bad_admittance, bad_capacity, self_loop, disconnected, unknown_bus, dimension };
  NetworkError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

private:
  Code code_;
};

class CostModelError : public Error {
public:
  enum class Code { bad_coefficient, nonconvex, schedule_range };
  CostModelError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

private:
  Code code_;
};

class ChainError : public Error {
public:
  enum class Code { not_stochastic, reducible, periodic, bad_state, bad_moments };
  ChainError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

private:
  Code code_;
};

class PlannerError : public Error {
public:
  explicit PlannerError(const std::string& msg) : Error(msg) {}
};

class SolverError : public Error {
public:
  explicit SolverError(const std::string& msg) : Error(msg) {}
};

/// Simulation assertion failure; carries the period index and a state dump.
class SimulationError : public Error {
public:
  SimulationError(long period, const std::string& msg) : Error(msg), period_(period) {}
  long period() const { return period_; }

private:
  long period_;
};

/// Scenario file problems, split by stage so callers can distinguish
/// a malformed file from a semantically invalid one.
class ScenarioError : public Error {
public:
  enum class Code { io, parse, schema, semantic };
  ScenarioError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

private:
  Code code_;
};

}  // namespace stornet
