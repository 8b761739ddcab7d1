#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "stornet/errors.hpp"
#include "stornet/storage.hpp"

namespace stornet {

/// Coefficient process for a cost term: either a deterministic
/// period-of-day rule or an i.i.d. draw, realized once per period.
struct Schedule {
  enum class Type { constant, table, day_night, iid_uniform };

  Type type = Type::constant;
  double value = 0.0;                  // constant
  std::vector<double> values;          // table, indexed by t mod period
  int period = 24;                     // day_night period
  double day = 0.0, night = 0.0;       // day_night values
  int day_start = 7, day_end = 19;     // day window, [start, end) on t mod period
  double lo = 0.0, hi = 0.0;           // iid_uniform support

  static Schedule constant(double v) {
    Schedule s;
    s.type = Type::constant;
    s.value = v;
    return s;
  }
  static Schedule day_night_rule(double day_v, double night_v, int start = 7, int end = 19,
                                 int per = 24) {
    Schedule s;
    s.type = Type::day_night;
    s.day = day_v;
    s.night = night_v;
    s.day_start = start;
    s.day_end = end;
    s.period = per;
    return s;
  }
  static Schedule table(std::vector<double> v) {
    Schedule s;
    s.type = Type::table;
    s.values = std::move(v);
    return s;
  }
  static Schedule iid_uniform(double lo, double hi) {
    Schedule s;
    s.type = Type::iid_uniform;
    s.lo = lo;
    s.hi = hi;
    return s;
  }

  bool stochastic() const { return type == Type::iid_uniform; }

  double value_at(long t) const {
    switch (type) {
      case Type::constant:
        return value;
      case Type::table:
        return values.empty() ? 0.0 : values[static_cast<std::size_t>(t % static_cast<long>(values.size()))];
      case Type::day_night: {
        const long phase = t % period;
        return (phase >= day_start && phase < day_end) ? day : night;
      }
      case Type::iid_uniform:
        throw CostModelError(CostModelError::Code::bad_coefficient,
                             "stochastic schedule has no deterministic value");
    }
    return 0.0;
  }

  double min_value() const {
    switch (type) {
      case Type::constant:
        return value;
      case Type::table:
        return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
      case Type::day_night:
        return std::min(day, night);
      case Type::iid_uniform:
        return lo;
    }
    return 0.0;
  }

  double max_value() const {
    switch (type) {
      case Type::constant:
        return value;
      case Type::table:
        return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
      case Type::day_night:
        return std::max(day, night);
      case Type::iid_uniform:
        return hi;
    }
    return 0.0;
  }
};

enum class CostKind { positive_part, linear };

/// One stage-cost term p(t) * phi(arg) with
///   arg = alpha_delta*delta - alpha_c*hC(u+) + alpha_d*hD(u-)
///         + alpha_f*inflow + alpha_const(t)
/// and phi the positive part or the identity.
struct CostTerm {
  CostKind kind = CostKind::positive_part;
  double alpha_delta = 0.0;
  double alpha_c = 0.0;
  double alpha_d = 0.0;
  double alpha_f = 0.0;
  Schedule alpha_const = Schedule::constant(0.0);
  Schedule p = Schedule::constant(0.0);
  double p_min = 0.0;
  double p_max = 0.0;
};

struct CostModel {
  std::vector<CostTerm> terms;
};

/// Realized per-period stochastic data for one bus: the imbalance plus
/// the realized coefficient and constant of every term.
struct CostRealization {
  double delta = 0.0;
  std::vector<double> p;            // one per term
  std::vector<double> alpha_const;  // one per term
};

struct SubderivBounds {
  double lo = 0.0;
  double hi = 0.0;
};

/// Slope of a term's argument with respect to u on the charging branch (u > 0).
inline double arg_slope_charge(const CostTerm& term, const ValidatedStorage& storage) {
  return -term.alpha_c / storage.mu_c();
}

/// Slope of a term's argument with respect to u on the discharging branch (u < 0).
inline double arg_slope_discharge(const CostTerm& term, const ValidatedStorage& storage) {
  return -term.alpha_d * storage.mu_d();
}

/// Checks coefficient sanity and convexity of g in u for every admissible
/// coefficient realization. Convexity holds iff on every term the branch
/// slope is nondecreasing across the kink at u = 0 for all p in
/// [p_min, p_max]; nonconvex models are rejected outright because the
/// breakpoint and LP solvers rely on convexity.
inline void validate_cost_model(const CostModel& model, const ValidatedStorage& storage) {
  const double tol = 1e-12;
  for (std::size_t i = 0; i < model.terms.size(); ++i) {
    const CostTerm& term = model.terms[i];
    std::ostringstream where;
    where << "term " << i << ": ";
    if (!(term.p_min <= term.p_max)) {
      throw CostModelError(CostModelError::Code::bad_coefficient,
                           where.str() + "p_min exceeds p_max");
    }
    if (term.alpha_const.stochastic()) {
      throw CostModelError(CostModelError::Code::bad_coefficient,
                           where.str() + "alpha_const must be deterministic");
    }
    if (term.p.min_value() < term.p_min - tol || term.p.max_value() > term.p_max + tol) {
      std::ostringstream msg;
      msg << where.str() << "coefficient schedule range [" << term.p.min_value() << ", "
          << term.p.max_value() << "] escapes [" << term.p_min << ", " << term.p_max << "]";
      throw CostModelError(CostModelError::Code::schedule_range, msg.str());
    }
    const double sc = arg_slope_charge(term, storage);
    const double sd = arg_slope_discharge(term, storage);
    if (term.kind == CostKind::positive_part) {
      if (term.p_min < 0.0) {
        throw CostModelError(CostModelError::Code::bad_coefficient,
                             where.str() + "positive-part terms require p_min >= 0");
      }
      if (!(sd <= sc + tol)) {
        std::ostringstream msg;
        msg << where.str() << "nonconvex in u: argument slope drops from " << sd << " (u<0) to "
            << sc << " (u>0)";
        throw CostModelError(CostModelError::Code::nonconvex, msg.str());
      }
    } else {
      for (double p : {term.p_min, term.p_max}) {
        if (!(p * sd <= p * sc + tol)) {
          std::ostringstream msg;
          msg << where.str() << "nonconvex in u for coefficient " << p;
          throw CostModelError(CostModelError::Code::nonconvex, msg.str());
        }
      }
    }
  }
}

inline double term_argument(const CostTerm& term, const ValidatedStorage& storage, double delta,
                            double alpha_const_value, double u, double inflow) {
  const double up = detail::pos(u);
  const double un = detail::pos(-u);
  return term.alpha_delta * delta - term.alpha_c * (up / storage.mu_c()) +
         term.alpha_d * (storage.mu_d() * un) + term.alpha_f * inflow + alpha_const_value;
}

/// Stage cost under a realization, with the charge/discharge split taken
/// independently (used to audit LP relaxations; u_plus/u_minus >= 0).
inline double evaluate_cost_split(const CostModel& model, const ValidatedStorage& storage,
                                  const CostRealization& real, double u_plus, double u_minus,
                                  double inflow) {
  double total = 0.0;
  for (std::size_t i = 0; i < model.terms.size(); ++i) {
    const CostTerm& term = model.terms[i];
    const double arg = term.alpha_delta * real.delta -
                       term.alpha_c * (u_plus / storage.mu_c()) +
                       term.alpha_d * (storage.mu_d() * u_minus) + term.alpha_f * inflow +
                       real.alpha_const[i];
    total += real.p[i] * (term.kind == CostKind::positive_part ? detail::pos(arg) : arg);
  }
  return total;
}

inline double evaluate_cost(const CostModel& model, const ValidatedStorage& storage,
                            const CostRealization& real, double u, double inflow) {
  return evaluate_cost_split(model, storage, real, detail::pos(u), detail::pos(-u), inflow);
}

/// Extreme sub-derivative values of g with respect to u over all admissible
/// operations, coefficients and disturbances, obtained by enumerating the
/// branch slopes of every term against its coefficient bounds. Positive-part
/// terms contribute zero slope whenever their argument is inactive, so 0 is
/// always a candidate for them.
inline SubderivBounds subderivative_bounds(const CostModel& model,
                                           const ValidatedStorage& storage) {
  SubderivBounds out;
  for (const CostTerm& term : model.terms) {
    const double sc = arg_slope_charge(term, storage);
    const double sd = arg_slope_discharge(term, storage);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    auto consider = [&](double v) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    };
    if (term.kind == CostKind::positive_part) consider(0.0);
    for (double p : {term.p_min, term.p_max}) {
      consider(p * sc);
      consider(p * sd);
    }
    out.lo += lo;
    out.hi += hi;
  }
  return out;
}

}  // namespace stornet
