#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stornet/policies.hpp"

using namespace stornet;
using test_oracle::balancing_cost;
using test_oracle::fixed_realization;
using test_oracle::unserved_cost;

namespace {
ValidatedStorage unit_storage() {
  return ValidatedStorage::validate(StorageSpec{0, 1, -0.1, 0.1, 1, 1, 1});
}
}  // namespace

TEST_CASE("myopic single-bus actions") {
  const auto st = unit_storage();
  const auto cost = balancing_cost(1.0, 1.0);
  // Surplus of 0.3 with 0.2 of headroom: absorb up to the ramp bound.
  {
    const auto real = fixed_realization(cost, 0.3, {1, 1});
    REQUIRE(greedy_single_bus(st, cost, real, 0.8) == Catch::Approx(0.1).margin(1e-12));
  }
  // Deficit of 0.3 with 0.05 stored: hand over everything available.
  {
    const auto real = fixed_realization(cost, -0.3, {1, 1});
    REQUIRE(greedy_single_bus(st, cost, real, 0.05) == Catch::Approx(-0.05).margin(1e-12));
  }
  // No imbalance: no operation.
  {
    const auto real = fixed_realization(cost, 0.0, {1, 1});
    REQUIRE(greedy_single_bus(st, cost, real, 0.5) == 0.0);
  }
}

TEST_CASE("myopic action equals the clipped-imbalance rule for lossless balancing") {
  const auto st = unit_storage();
  const auto cost = balancing_cost(1.0, 1.0);
  const auto net = PowerNetwork::build(1, {}, {}, {});
  test_oracle::TestRng rng(71);
  for (int i = 0; i < 200; ++i) {
    const double s = rng.uniform(0.0, 1.0);
    const double delta = rng.uniform(-0.4, 0.4);
    const auto real = fixed_realization(cost, delta, {1, 1});
    const double lo = std::max(st.u_min(), st.s_min() - s);
    const double hi = std::min(st.u_max(), st.s_max() - s);
    const double expected = std::clamp(delta, lo, hi);
    REQUIRE(greedy_single_bus(st, cost, real, s) == Catch::Approx(expected).margin(1e-10));

    // LP route agrees.
    BusOnline bus;
    bus.storage = &st;
    bus.cost = &cost;
    bus.real = real;
    bus.shifted_level = 0.0;
    bus.weight = 1.0;
    bus.dbounds = subderivative_bounds(cost, st);
    const std::vector<double> levels = {s};
    const auto sol = greedy_network({bus}, net, levels);
    REQUIRE(sol.u(0) == Catch::Approx(expected).margin(1e-9));
  }
}

TEST_CASE("myopic dispatch respects the level bounds by construction") {
  test_oracle::TestRng rng(72);
  for (int i = 0; i < 50; ++i) {
    const auto st = test_oracle::random_storage(rng, 0.8, 1.0);
    const auto cost = test_oracle::random_convex_cost(rng, st);
    CostRealization real;
    real.delta = rng.uniform(-1.0, 1.0);
    for (const CostTerm& term : cost.terms) {
      real.p.push_back(rng.uniform(term.p_min, term.p_max));
      real.alpha_const.push_back(term.alpha_const.value_at(1));
    }
    const double s = rng.uniform(st.s_min(), st.s_max());
    const double u = greedy_single_bus(st, cost, real, s);
    const double next = st.lambda() * s + u;
    REQUIRE(next >= st.s_min() - 1e-9);
    REQUIRE(next <= st.s_max() + 1e-9);
    REQUIRE(u >= st.u_min() - 1e-12);
    REQUIRE(u <= st.u_max() + 1e-12);
  }
}

TEST_CASE("no-storage dispatch") {
  const auto st = unit_storage();
  const auto cost = balancing_cost(1.0, 1.0);
  const auto net1 = PowerNetwork::build(1, {}, {}, {});
  {
    BusOnline bus;
    bus.storage = &st;
    bus.cost = &cost;
    bus.real = fixed_realization(cost, 0.2, {1, 1});
    bus.shifted_level = 0.0;
    bus.weight = 1.0;
    bus.dbounds = subderivative_bounds(cost, st);
    const auto sol = no_storage_network({bus}, net1);
    REQUIRE(sol.u(0) == 0.0);
    REQUIRE(sol.stage_cost == Catch::Approx(0.2).margin(1e-12));
  }
  // Flows still help when lines exist.
  {
    const auto net2 = PowerNetwork::build(2, {{0, 1}}, {1.0}, {1.0});
    const auto flow_cost = unserved_cost(Schedule::constant(1.0), 1.0, 1.0, true);
    BusOnline a;
    a.storage = &st;
    a.cost = &flow_cost;
    a.real = fixed_realization(flow_cost, 0.5, {1.0});
    a.shifted_level = 0.0;
    a.weight = 1.0;
    a.dbounds = subderivative_bounds(flow_cost, st);
    BusOnline b = a;
    b.real = fixed_realization(flow_cost, -0.5, {1.0});
    const auto sol = no_storage_network({a, b}, net2);
    REQUIRE(sol.u(0) == 0.0);
    REQUIRE(sol.u(1) == 0.0);
    REQUIRE(sol.flow(0) == Catch::Approx(0.5).margin(1e-9));
    REQUIRE(sol.stage_cost == Catch::Approx(0.0).margin(1e-9));
  }
}
