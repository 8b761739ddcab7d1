#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stornet/planner.hpp"

using namespace stornet;

namespace {
ValidatedStorage storage(double s_min, double s_max, double u_min, double u_max, double lambda) {
  return ValidatedStorage::validate(StorageSpec{s_min, s_max, u_min, u_max, 1, 1, lambda});
}
}  // namespace

TEST_CASE("admissible region formulas") {
  {
    const auto st = storage(0, 1, -0.1, 0.1, 1.0);
    const auto r = gamma_w_region(st, -1.0, 1.0, 0.4);
    REQUIRE(r.w_max == Catch::Approx(0.4).margin(1e-15));
    REQUIRE(r.ks_min == Catch::Approx(-0.5).margin(1e-12));
    REQUIRE(r.ks_max == Catch::Approx(-0.5).margin(1e-12));
  }
  {
    const auto st = storage(0, 10, -1, 1, 0.9);
    const auto r = gamma_w_region(st, -1.0, 1.0, 1.0);
    REQUIRE(r.ks_min == Catch::Approx(-8.888888888888889).epsilon(1e-10));
    REQUIRE(r.ks_max == Catch::Approx(-2.2222222222222223).epsilon(1e-10));
    REQUIRE(r.w_max == Catch::Approx(4.0).margin(1e-12));
  }
  {
    // Zero weight drops the slope contribution.
    const auto st = storage(0, 10, -1, 1, 0.9);
    const auto r = gamma_w_region(st, -1.0, 1.0, 0.0);
    REQUIRE(r.ks_min == Catch::Approx((0.0 + 0.0) / 0.9 - 10.0).margin(1e-12));
    REQUIRE(r.ks_max == Catch::Approx((0.0 - 1.0) / 0.9 - 0.0).margin(1e-12));
  }
  REQUIRE_THROWS_AS(gamma_w_region(storage(0, 1, -0.1, 0.1, 1.0), 1.0, -1.0, 0.1), PlannerError);
}

TEST_CASE("degenerate slope range reports an unbounded weight") {
  const auto st = storage(0, 1, -0.1, 0.1, 1.0);
  const auto r = gamma_w_region(st, 0.5, 0.5, 1.0);
  REQUIRE(std::isinf(r.w_max));
}

TEST_CASE("certified bound values") {
  {
    const auto st = storage(0, 1, -0.1, 0.1, 1.0);
    REQUIRE(suboptimality_bound(st, -0.5, 0.4) == Catch::Approx(0.0125).margin(1e-15));
    REQUIRE(suboptimality_bound(st, 0.3, 0.4) == Catch::Approx(0.0125).margin(1e-15));
  }
  {
    const auto st = storage(-1, 1, -0.5, 0.5, 0.5);
    REQUIRE(suboptimality_bound(st, 0.0, 1.0) == Catch::Approx(0.375).margin(1e-15));
  }
  {
    const auto st = ValidatedStorage::validate(StorageSpec{0, 1, 0, 0, 1, 1, 1});
    REQUIRE(suboptimality_bound(st, 0.0, 0.7) == 0.0);
  }
  REQUIRE_THROWS_AS(suboptimality_bound(storage(0, 1, -0.1, 0.1, 1.0), 0.0, 0.0), PlannerError);
}

TEST_CASE("closed-form optimum for lossless storage") {
  const auto st = storage(0, 1, -0.1, 0.1, 1.0);
  const auto plan = plan_single_bus(st, -1.0, 1.0);
  REQUIRE(plan.gamma == Catch::Approx(-0.5).margin(1e-12));
  REQUIRE(plan.w == Catch::Approx(0.4).margin(1e-12));
  REQUIRE(plan.bound == Catch::Approx(0.0125).margin(1e-12));
  REQUIRE(plan.m_s_weighted == 0.0);
}

TEST_CASE("dissipative planner matches the grid reference") {
  const auto st = storage(0, 1, -0.1, 0.1, 0.999);
  const double d_hi = 3.0 / 0.95;
  const auto plan = plan_single_bus(st, 0.0, d_hi);
  const double oracle = test_oracle::plan_grid_oracle(st, 0.0, d_hi);
  REQUIRE(plan.bound <= oracle * (1.0 + 1e-9));
  REQUIRE(std::abs(plan.bound - oracle) <= 1e-4 * std::abs(oracle));
  // Box constraints hold with tiny slack.
  const auto r = gamma_w_region(st, 0.0, d_hi, plan.w);
  REQUIRE(plan.gamma >= r.ks_min - 1e-12);
  REQUIRE(plan.gamma <= r.ks_max + 1e-12);
  REQUIRE(plan.w <= r.w_max + 1e-12);
  REQUIRE(plan.bound ==
          Catch::Approx(suboptimality_bound(st, plan.gamma, plan.w)).margin(0.0));
}

TEST_CASE("homogeneous buses plan independently") {
  const auto st = storage(0, 1, -0.1, 0.1, 0.999);
  const CostModel cost = test_oracle::unserved_cost(Schedule::day_night_rule(3.0, 1.0), 1.0, 3.0);
  std::vector<ValidatedStorage> storages(5, st);
  std::vector<CostModel> costs(5, cost);
  const auto params = plan_parameters(storages, costs);
  const auto single = plan_parameters({st}, {cost});
  REQUIRE(params.buses.size() == 5);
  for (const BusPlan& p : params.buses) {
    REQUIRE(p.gamma == single.buses[0].gamma);
    REQUIRE(p.w == single.buses[0].w);
    REQUIRE(p.bound == single.buses[0].bound);
  }
  REQUIRE(params.certified_bound == Catch::Approx(5.0 * single.certified_bound).epsilon(1e-12));
}

TEST_CASE("shared-weight mode still satisfies every per-bus region") {
  const auto st_a = storage(0, 1, -0.1, 0.1, 0.999);
  const auto st_b = storage(0, 2, -0.15, 0.15, 0.99);
  const CostModel cost = test_oracle::balancing_cost(1.0, 1.0);
  const auto params = plan_parameters_shared_w({st_a, st_b}, {cost, cost});
  REQUIRE(params.shared_w);
  REQUIRE(params.buses[0].w == params.buses[1].w);
  const auto d = subderivative_bounds(cost, st_a);
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& st = v == 0 ? st_a : st_b;
    const auto r = gamma_w_region(st, d.lo, d.hi, params.buses[v].w);
    REQUIRE(params.buses[v].w <= r.w_max + 1e-12);
    REQUIRE(params.buses[v].gamma >= r.ks_min - 1e-12);
    REQUIRE(params.buses[v].gamma <= r.ks_max + 1e-12);
  }
  // A shared weight cannot beat per-bus weights.
  const auto free_params = plan_parameters({st_a, st_b}, {cost, cost});
  REQUIRE(free_params.certified_bound <= params.certified_bound + 1e-12);
}

TEST_CASE("positive minimum level plus strong dissipation can void the region") {
  // Valid under both consistency assumptions, yet no weight is admissible:
  // the storage must charge heavily every period just to stay above s_min,
  // which consumes the entire control headroom.
  const auto st = storage(1.0, 4.0, -1.35, 1.35, 0.5);
  const auto r = gamma_w_region(st, -1.0, 1.0, 0.0);
  REQUIRE(r.w_max < 0.0);
  REQUIRE_THROWS_AS(plan_single_bus(st, -1.0, 1.0), PlannerError);
}

TEST_CASE("degenerate slopes cap the weight and report it") {
  const auto st = storage(0, 1, -0.1, 0.1, 1.0);
  const auto plan = plan_single_bus(st, 0.7, 0.7);
  REQUIRE(plan.w_capped);
  REQUIRE(plan.w == Catch::Approx(1e6).epsilon(1e-12));
  REQUIRE(std::isinf(plan.w_max));
}

TEST_CASE("markov-case bound identities") {
  const auto st = storage(0, 1, -0.1, 0.1, 0.9);
  const double gamma = -0.4, w = 0.5;
  const double m_u = bound_ramp_component(st, gamma);
  const double m_s = bound_level_component(st, gamma);
  // Single-state chain: epoch factor (2*1+1)/1 = 3.
  REQUIRE(markov_bound(st, gamma, w, 1.0, 1.0) ==
          Catch::Approx((0.9 * 0.1 * m_s + 3.0 * m_u) / w).margin(1e-15));
  // Symmetric two-state chain: (2*6+2)/2 = 7.
  REQUIRE(markov_bound(st, gamma, w, 2.0, 6.0) ==
          Catch::Approx((0.9 * 0.1 * m_s + 7.0 * m_u) / w).margin(1e-15));
  REQUIRE_THROWS_AS(markov_bound(st, gamma, w, 0.5, 1.0), ChainError);
  REQUIRE_THROWS_AS(markov_bound(st, gamma, w, 2.0, 3.0), ChainError);  // below mean^2
}

TEST_CASE("chain bound dominates the independent-draw bound") {
  test_oracle::TestRng rng(61);
  for (int i = 0; i < 50; ++i) {
    const auto st = test_oracle::random_storage(rng);
    const double gamma = rng.uniform(-st.s_max(), -st.s_min());
    const double w = rng.uniform(0.1, 2.0);
    const double mean = rng.uniform(1.0, 5.0);
    const double second = mean * mean + rng.uniform(0.0, 10.0);
    REQUIRE(markov_bound(st, gamma, w, mean, second) >=
            suboptimality_bound(st, gamma, w) - 1e-12);
  }
}

TEST_CASE("shift interval is nonempty across the admissible weights") {
  test_oracle::TestRng rng(62);
  for (int i = 0; i < 100; ++i) {
    const auto st = test_oracle::random_storage(rng);
    const double d_lo = -rng.uniform(0.0, 2.0);
    const double d_hi = d_lo + rng.uniform(1e-6, 3.0);
    const auto probe = gamma_w_region(st, d_lo, d_hi, 0.0);
    for (int k = 1; k <= 16; ++k) {
      const double w = probe.w_max * k / 16.0;
      const auto r = gamma_w_region(st, d_lo, d_hi, w);
      REQUIRE(r.ks_max >= r.ks_min - 1e-9 * (1.0 + std::abs(r.ks_min)));
    }
  }
}

TEST_CASE("bound scales consistently with the instance") {
  // With lossless storage the bound admits the explicit ramp/capacity form,
  // so scaling every energy quantity by c scales the bound by c.
  test_oracle::TestRng rng(63);
  for (int i = 0; i < 30; ++i) {
    const double u_max = rng.uniform(0.05, 0.5);
    const double span = rng.uniform(2.5, 6.0) * (2 * u_max);
    const auto st = storage(0.0, span, -u_max, u_max, 1.0);
    const double d_lo = -rng.uniform(0.5, 2.0);
    const double d_hi = rng.uniform(0.5, 2.0);
    const auto plan = plan_single_bus(st, d_lo, d_hi);
    const double rho = span / (2 * u_max);
    const double closed_form = (d_hi - d_lo) * u_max / (4.0 * (rho - 1.0));
    REQUIRE(plan.bound == Catch::Approx(closed_form).epsilon(1e-10));

    const double c = rng.uniform(1.5, 4.0);
    const auto scaled = storage(0.0, c * span, -c * u_max, c * u_max, 1.0);
    const auto plan_c = plan_single_bus(scaled, d_lo, d_hi);
    REQUIRE(plan_c.bound == Catch::Approx(c * plan.bound).epsilon(1e-10));
  }
}

TEST_CASE("shrinking the ramp strictly improves the lossless bound") {
  const double span = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (double u_max : {0.2, 0.1, 0.05, 0.025, 0.0125}) {
    const auto st = storage(0.0, span, -u_max, u_max, 1.0);
    const auto plan = plan_single_bus(st, -1.0, 1.0);
    REQUIRE(plan.bound < prev);
    prev = plan.bound;
  }
}

TEST_CASE("randomized planner runs match the grid reference") {
  test_oracle::TestRng rng(64);
  for (int i = 0; i < 8; ++i) {
    const auto st = test_oracle::random_storage(rng, 0.5, 1.0);
    const double d_lo = -rng.uniform(0.0, 2.0);
    const double d_hi = d_lo + rng.uniform(0.1, 3.0);
    const auto plan = plan_single_bus(st, d_lo, d_hi);
    const double oracle = test_oracle::plan_grid_oracle(st, d_lo, d_hi, 120, 120);
    REQUIRE(plan.bound <= oracle * (1.0 + 1e-9) + 1e-12);
    REQUIRE(std::abs(plan.bound - oracle) <= 2e-3 * (std::abs(oracle) + 1e-12));
  }
}
