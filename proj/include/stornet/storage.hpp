#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "stornet/errors.hpp"

namespace stornet {

/// Absolute slack used when asserting level bounds after a step.
inline constexpr double kLevelTol = 1e-9;

/// Generalized storage: a first-order element s(t+1) = lambda*s(t) + u(t)
/// with level bounds, per-period operation bounds and linear conversion
/// losses. Covers batteries (s >= 0), deferrable demand (s <= 0) and
/// aggregate flexible-load models (symmetric bounds).
struct StorageSpec {
  double s_min = 0.0;   // minimum level
  double s_max = 0.0;   // capacity
  double u_min = 0.0;   // max discharge per period (<= 0)
  double u_max = 0.0;   // max charge per period (>= 0)
  double mu_c = 1.0;    // charging efficiency, (0, 1]
  double mu_d = 1.0;    // discharging efficiency, (0, 1]
  double lambda = 1.0;  // per-period retention, (0, 1]
};

struct StorageState {
  double level = 0.0;
};

namespace detail {
inline double pos(double x) { return x > 0.0 ? x : 0.0; }
}  // namespace detail

/// A StorageSpec that passed all consistency checks. Construction goes
/// through validate(); the wrapped spec is immutable afterwards.
class ValidatedStorage {
public:
  static ValidatedStorage validate(const StorageSpec& s) {
    std::ostringstream msg;
    if (!(s.s_min <= s.s_max) || !(s.u_min <= 0.0) || !(0.0 <= s.u_max)) {
      msg << "storage bounds must satisfy s_min <= s_max and u_min <= 0 <= u_max, got "
          << "[" << s.s_min << ", " << s.s_max << "], [" << s.u_min << ", " << s.u_max << "]";
      throw StorageError(StorageError::Code::bounds_order, msg.str());
    }
    auto in01 = [](double x) { return x > 0.0 && x <= 1.0; };
    if (!in01(s.mu_c) || !in01(s.mu_d) || !in01(s.lambda)) {
      msg << "efficiencies mu_c, mu_d and retention lambda must lie in (0, 1], got "
          << s.mu_c << ", " << s.mu_d << ", " << s.lambda;
      throw StorageError(StorageError::Code::efficiency_range, msg.str());
    }
    if (!(s.lambda * s.s_min + s.u_max >= s.s_min)) {
      msg << "lambda*s_min + u_max >= s_min violated: " << s.lambda << "*" << s.s_min
          << " + " << s.u_max << " < " << s.s_min;
      throw StorageError(StorageError::Code::feasibility_low, msg.str());
    }
    if (!(s.lambda * s.s_max + s.u_min <= s.s_max)) {
      msg << "lambda*s_max + u_min <= s_max violated: " << s.lambda << "*" << s.s_max
          << " + " << s.u_min << " > " << s.s_max;
      throw StorageError(StorageError::Code::feasibility_high, msg.str());
    }
    if (!(s.u_max - s.u_min < s.s_max - s.s_min)) {
      msg << "u_max - u_min < s_max - s_min violated: " << (s.u_max - s.u_min)
          << " >= " << (s.s_max - s.s_min);
      throw StorageError(StorageError::Code::control_range, msg.str());
    }
    return ValidatedStorage(s);
  }

  const StorageSpec& spec() const { return spec_; }

  double s_min() const { return spec_.s_min; }
  double s_max() const { return spec_.s_max; }
  double u_min() const { return spec_.u_min; }
  double u_max() const { return spec_.u_max; }
  double mu_c() const { return spec_.mu_c; }
  double mu_d() const { return spec_.mu_d; }
  double lambda() const { return spec_.lambda; }

  bool level_feasible(double level, double tol = kLevelTol) const {
    return level >= spec_.s_min - tol && level <= spec_.s_max + tol;
  }

  void check_ramp(double u) const {
    if (!(u >= spec_.u_min - kLevelTol && u <= spec_.u_max + kLevelTol)) {
      std::ostringstream msg;
      msg << "operation " << u << " outside ramp bounds [" << spec_.u_min << ", "
          << spec_.u_max << "]";
      throw StorageError(StorageError::Code::ramp, msg.str());
    }
  }

  /// Advance the dynamics one period. Out-of-range results are errors,
  /// not clamped: a certified controller never produces them, so clamping
  /// would only hide bugs.
  StorageState step(const StorageState& state, double u) const {
    check_ramp(u);
    const double next = spec_.lambda * state.level + u;
    if (!level_feasible(next)) {
      std::ostringstream msg;
      msg << "step produced level " << next << " outside [" << spec_.s_min << ", "
          << spec_.s_max << "] (from level " << state.level << ", u " << u << ")";
      throw StorageError(StorageError::Code::level_bound, msg.str());
    }
    return StorageState{next};
  }

  /// Net energy the operation injects into the bus: discharging injects
  /// mu_d * u-, charging withdraws u+ / mu_c.
  double net_injection(double u) const {
    check_ramp(u);
    const double up = detail::pos(u);
    const double un = detail::pos(-u);
    return spec_.mu_d * un - up / spec_.mu_c;
  }

private:
  explicit ValidatedStorage(const StorageSpec& s) : spec_(s) {}
  StorageSpec spec_;
};

}  // namespace stornet
