#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>
#include <vector>

#include "stornet/cost.hpp"
#include "stornet/errors.hpp"
#include "stornet/rng.hpp"

namespace stornet {

/// Finite-state ergodic chain for the disturbance state. Validation checks
/// row stochasticity, irreducibility (strong connectivity of the support
/// digraph) and aperiodicity (gcd of level differences along edges).
class MarkovChain {
public:
  static MarkovChain validate(Eigen::MatrixXd transition, int initial_state) {
    const int n = static_cast<int>(transition.rows());
    if (n < 1 || transition.cols() != n) {
      throw ChainError(ChainError::Code::not_stochastic, "transition matrix must be square");
    }
    if (initial_state < 0 || initial_state >= n) {
      throw ChainError(ChainError::Code::bad_state, "initial state outside the state space");
    }
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) {
        if (transition(i, j) < 0.0) {
          throw ChainError(ChainError::Code::not_stochastic, "negative transition probability");
        }
        row += transition(i, j);
      }
      if (std::abs(row - 1.0) > 1e-12) {
        std::ostringstream msg;
        msg << "row " << i << " sums to " << row;
        throw ChainError(ChainError::Code::not_stochastic, msg.str());
      }
    }
    check_irreducible(transition);
    check_aperiodic(transition);
    MarkovChain c;
    c.transition_ = std::move(transition);
    c.initial_state_ = initial_state;
    return c;
  }

  const Eigen::MatrixXd& transition() const { return transition_; }
  int initial_state() const { return initial_state_; }
  int num_states() const { return static_cast<int>(transition_.rows()); }

  /// Next state by CDF inversion on a uniform draw.
  int step(int state, double u) const {
    double acc = 0.0;
    const int n = num_states();
    for (int j = 0; j < n; ++j) {
      acc += transition_(state, j);
      if (u < acc) return j;
    }
    return n - 1;
  }

private:
  static void check_irreducible(const Eigen::MatrixXd& p) {
    const int n = static_cast<int>(p.rows());
    auto reach_all = [&](bool transpose) {
      std::vector<char> seen(n, 0);
      std::queue<int> q;
      q.push(0);
      seen[0] = 1;
      int count = 1;
      while (!q.empty()) {
        const int v = q.front();
        q.pop();
        for (int w = 0; w < n; ++w) {
          const double edge = transpose ? p(w, v) : p(v, w);
          if (edge > 0.0 && !seen[w]) {
            seen[w] = 1;
            ++count;
            q.push(w);
          }
        }
      }
      return count == n;
    };
    if (!reach_all(false) || !reach_all(true)) {
      throw ChainError(ChainError::Code::reducible, "chain is not irreducible");
    }
  }

  static void check_aperiodic(const Eigen::MatrixXd& p) {
    // For a strongly connected support digraph the period equals the gcd of
    // level[u] + 1 - level[v] over all edges, with levels from a BFS.
    const int n = static_cast<int>(p.rows());
    std::vector<int> level(n, -1);
    std::queue<int> q;
    q.push(0);
    level[0] = 0;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int w = 0; w < n; ++w) {
        if (p(v, w) > 0.0 && level[w] < 0) {
          level[w] = level[v] + 1;
          q.push(w);
        }
      }
    }
    int d = 0;
    for (int v = 0; v < n; ++v) {
      for (int w = 0; w < n; ++w) {
        if (p(v, w) > 0.0) d = std::gcd(d, std::abs(level[v] + 1 - level[w]));
      }
    }
    if (d != 1) {
      std::ostringstream msg;
      msg << "chain has period " << d;
      throw ChainError(ChainError::Code::periodic, msg.str());
    }
  }

  Eigen::MatrixXd transition_;
  int initial_state_ = 0;
};

struct ReturnTimeMoments {
  double mean = 1.0;
  double second_moment = 1.0;
};

/// Exact first and second moments of the first return time to ref_state,
/// from the taboo-chain first-passage recursions: with Q the transition
/// block over the other states, (I-Q)m = 1 and (I-Q)q = 1 + 2Qm.
inline ReturnTimeMoments return_time_moments(const MarkovChain& chain, int ref_state) {
  const int n = chain.num_states();
  if (ref_state < 0 || ref_state >= n) {
    throw ChainError(ChainError::Code::bad_state, "reference state outside the state space");
  }
  if (n == 1) return {1.0, 1.0};
  const Eigen::MatrixXd& p = chain.transition();
  std::vector<int> others;
  others.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    if (i != ref_state) others.push_back(i);
  }
  const int k = n - 1;
  Eigen::MatrixXd q(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) q(a, b) = p(others[a], others[b]);
  }
  const Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(k, k) - q;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
  const Eigen::VectorXd m = lu.solve(ones);
  const Eigen::VectorXd qm = lu.solve(ones + 2.0 * (q * m));

  ReturnTimeMoments out;
  out.mean = 1.0;
  out.second_moment = 1.0;
  for (int a = 0; a < k; ++a) {
    const double pj = p(ref_state, others[a]);
    out.mean += pj * m(a);
    out.second_moment += pj * (2.0 * m(a) + qm(a));
  }
  return out;
}

/// Disturbance model for one bus.
struct DisturbanceProcess {
  enum class Type { iid_laplace, iid_empirical, markov };

  Type type = Type::iid_laplace;
  double sigma = 0.0;                          // iid_laplace
  std::vector<double> support, weights;        // iid_empirical, weights normalized at load
  std::optional<MarkovChain> chain;            // markov
  std::vector<double> delta_values;            // markov: state -> imbalance
  std::optional<std::uint64_t> seed;           // pins this bus's stream regardless of run seed

  static DisturbanceProcess laplace(double sigma) {
    DisturbanceProcess p;
    p.type = Type::iid_laplace;
    p.sigma = sigma;
    return p;
  }
  static DisturbanceProcess empirical(std::vector<double> support, std::vector<double> weights) {
    if (support.empty() || support.size() != weights.size()) {
      throw ScenarioError(ScenarioError::Code::semantic,
                          "empirical disturbance needs matching nonempty support and weights");
    }
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) {
        throw ScenarioError(ScenarioError::Code::semantic, "negative empirical weight");
      }
      total += w;
    }
    if (!(total > 0.0)) {
      throw ScenarioError(ScenarioError::Code::semantic, "empirical weights sum to zero");
    }
    for (double& w : weights) w /= total;
    DisturbanceProcess p;
    p.type = Type::iid_empirical;
    p.support = std::move(support);
    p.weights = std::move(weights);
    return p;
  }
  static DisturbanceProcess markov_process(MarkovChain chain, std::vector<double> delta_values) {
    if (static_cast<int>(delta_values.size()) != chain.num_states()) {
      throw ScenarioError(ScenarioError::Code::semantic,
                          "delta_values length must match the chain state count");
    }
    DisturbanceProcess p;
    p.type = Type::markov;
    p.delta_values = std::move(delta_values);
    p.chain = std::move(chain);
    return p;
  }
};

// Draw-stream layout within a (seed, stream, t) counter cell: imbalance
// draws use k in [0, 32), the chain transition uses k = 100, term
// coefficient draws use k = 1000 + term index.
inline constexpr std::uint64_t kDrawChain = 100;
inline constexpr std::uint64_t kDrawCoeffBase = 1000;

/// Laplace truncation radius, as a multiple of the scale; keeps the support
/// compact while affecting < 7e-4 of the mass.
inline constexpr double kLaplaceTruncation = 8.0;

/// Reproducible per-bus disturbance stream. Sequential access is O(1); any
/// random access replays deterministically from the start, so a sample is a
/// pure function of (seed, stream, t).
class DisturbanceSampler {
public:
  DisturbanceSampler(const DisturbanceProcess& proc, std::uint64_t seed, std::uint64_t stream)
      : proc_(&proc), seed_(proc.seed.value_or(seed)), stream_(stream) {
    reset();
  }

  void reset() {
    t_next_ = 1;
    if (proc_->type == DisturbanceProcess::Type::markov) {
      state_ = proc_->chain->initial_state();
    }
  }

  /// Imbalance at period t >= 1.
  double delta_at(long t) {
    if (proc_->type != DisturbanceProcess::Type::markov) return iid_delta(t);
    if (t < t_next_) reset();
    while (t_next_ < t) {
      const double u = rng::uniform01(rng::counter(seed_, stream_, t_next_, kDrawChain));
      state_ = proc_->chain->step(state_, u);
      ++t_next_;
    }
    return proc_->delta_values[state_];
  }

private:
  double iid_delta(long t) const {
    switch (proc_->type) {
      case DisturbanceProcess::Type::iid_laplace: {
        const double b = proc_->sigma / std::sqrt(2.0);
        if (b == 0.0) return 0.0;
        const double cap = kLaplaceTruncation * b;
        double x = 0.0;
        for (std::uint64_t k = 0; k < 32; ++k) {
          x = rng::laplace(rng::uniform01(rng::counter(seed_, stream_, t, k)), b);
          if (std::abs(x) <= cap) return x;
        }
        return std::clamp(x, -cap, cap);
      }
      case DisturbanceProcess::Type::iid_empirical: {
        const double u = rng::uniform01(rng::counter(seed_, stream_, t, 0));
        double acc = 0.0;
        for (std::size_t i = 0; i < proc_->weights.size(); ++i) {
          acc += proc_->weights[i];
          if (u < acc) return proc_->support[i];
        }
        return proc_->support.back();
      }
      case DisturbanceProcess::Type::markov:
        break;
    }
    return 0.0;
  }

  const DisturbanceProcess* proc_;
  std::uint64_t seed_, stream_;
  long t_next_ = 1;
  int state_ = 0;
};

/// Realize the per-period cost coefficients: deterministic schedules
/// evaluate at t, stochastic ones draw from the bus's counter stream.
inline CostRealization realize_cost(const CostModel& model, double delta, long t,
                                    std::uint64_t seed, std::uint64_t stream) {
  CostRealization real;
  real.delta = delta;
  real.p.resize(model.terms.size());
  real.alpha_const.resize(model.terms.size());
  for (std::size_t i = 0; i < model.terms.size(); ++i) {
    const CostTerm& term = model.terms[i];
    if (term.p.stochastic()) {
      const std::uint64_t h = rng::counter(seed, stream, t, kDrawCoeffBase + i);
      real.p[i] = rng::uniform(h, term.p.lo, term.p.hi);
    } else {
      real.p[i] = term.p.value_at(t);
    }
    real.alpha_const[i] = term.alpha_const.value_at(t);
  }
  return real;
}

}  // namespace stornet
