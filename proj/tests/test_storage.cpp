#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stornet/storage.hpp"

using namespace stornet;

namespace {
StorageSpec spec(double s_min, double s_max, double u_min, double u_max, double mu_c, double mu_d,
                 double lambda) {
  return StorageSpec{s_min, s_max, u_min, u_max, mu_c, mu_d, lambda};
}
}  // namespace

TEST_CASE("validation accepts the reference battery parameters") {
  REQUIRE_NOTHROW(ValidatedStorage::validate(spec(0, 100, -10, 10, 0.85, 0.85, 0.97)));
  REQUIRE_NOTHROW(ValidatedStorage::validate(spec(0, 1, -0.1, 0.1, 1, 1, 1)));
  // Compressed-air profile and a demand-side element (nonpositive levels).
  REQUIRE_NOTHROW(ValidatedStorage::validate(spec(0, 3000, -300, 300, 0.85, 0.85, 1.0)));
  REQUIRE_NOTHROW(ValidatedStorage::validate(spec(-5, 0, -1, 1, 1, 1, 1)));
}

TEST_CASE("each consistency assumption fails with its own error code") {
  auto code_of = [](const StorageSpec& s) {
    try {
      ValidatedStorage::validate(s);
    } catch (const StorageError& e) {
      return e.code();
    }
    FAIL("expected a StorageError");
    return StorageError::Code::bounds_order;
  };
  REQUIRE(code_of(spec(1, 0, -1, 1, 1, 1, 1)) == StorageError::Code::bounds_order);
  REQUIRE(code_of(spec(0, 10, 1, 2, 1, 1, 1)) == StorageError::Code::bounds_order);
  REQUIRE(code_of(spec(0, 10, -1, 1, 1.2, 1, 1)) == StorageError::Code::efficiency_range);
  // lambda*s_min + u_max < s_min
  REQUIRE(code_of(spec(1, 5, -1, 0.3, 1, 1, 0.5)) == StorageError::Code::feasibility_low);
  // lambda*s_max + u_min > s_max
  REQUIRE(code_of(spec(-5, -1, -0.3, 1, 1, 1, 0.5)) == StorageError::Code::feasibility_high);
  // u_max - u_min >= s_max - s_min
  REQUIRE(code_of(spec(0, 10, -6, 6, 1, 1, 0.5)) == StorageError::Code::control_range);
}

TEST_CASE("step follows the linear dynamics and rejects excursions") {
  const auto ideal = ValidatedStorage::validate(spec(0, 1, -0.1, 0.1, 1, 1, 1));
  REQUIRE(ideal.step(StorageState{0.5}, 0.1).level == Catch::Approx(0.6).margin(1e-15));

  const auto nas = ValidatedStorage::validate(spec(0, 100, -10, 10, 0.85, 0.85, 0.97));
  REQUIRE(nas.step(StorageState{100}, -10).level == Catch::Approx(87.0).margin(1e-12));

  REQUIRE_THROWS_AS(ideal.step(StorageState{1.0}, 0.1), StorageError);
  REQUIRE_THROWS_AS(ideal.step(StorageState{0.5}, 0.2), StorageError);  // ramp
  try {
    ideal.step(StorageState{1.0}, 0.1);
    FAIL("expected error");
  } catch (const StorageError& e) {
    REQUIRE(e.code() == StorageError::Code::level_bound);
  }
}

TEST_CASE("conversion losses on the bus injection") {
  const auto nas = ValidatedStorage::validate(spec(0, 100, -10, 10, 0.85, 0.85, 0.97));
  REQUIRE(nas.net_injection(10.0) == Catch::Approx(-10.0 / 0.85).epsilon(1e-12));
  REQUIRE(nas.net_injection(-10.0) == Catch::Approx(8.5).epsilon(1e-12));
  REQUIRE(nas.net_injection(0.0) == 0.0);
}

TEST_CASE("a feasible operation always exists from a feasible level") {
  test_oracle::TestRng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto st = test_oracle::random_storage(rng);
    // The two closed-form inequalities are exactly the existence conditions
    // at the extreme levels; interior levels interpolate.
    REQUIRE(st.lambda() * st.s_min() + st.u_max() >= st.s_min() - 1e-12);
    REQUIRE(st.lambda() * st.s_max() + st.u_min() <= st.s_max() + 1e-12);
  }
}

TEST_CASE("step is affine in the operation") {
  test_oracle::TestRng rng(12);
  for (int i = 0; i < 200; ++i) {
    const auto st = test_oracle::random_storage(rng);
    const double s = rng.uniform(st.s_min(), st.s_max());
    const double span = st.u_max() - st.u_min();
    const double u1 = rng.uniform(st.u_min(), st.u_max());
    const double u2 = rng.uniform(0.0, std::min(span * 0.1, st.u_max() - u1));
    const double base = st.lambda() * s;
    if (base + u1 < st.s_min() || base + u1 + u2 > st.s_max()) continue;
    const double a = st.step(StorageState{s}, u1 + u2).level;
    const double b = st.step(StorageState{s}, u1).level;
    REQUIRE(a - b == Catch::Approx(u2).margin(1e-12));
  }
}

TEST_CASE("net injection is nonincreasing and kinked only at zero") {
  test_oracle::TestRng rng(13);
  for (int i = 0; i < 100; ++i) {
    const auto st = test_oracle::random_storage(rng);
    double prev_u = st.u_min();
    double prev = st.net_injection(prev_u);
    REQUIRE(prev >= 0.0);
    REQUIRE(st.net_injection(st.u_max()) <= 0.0);
    for (int k = 1; k <= 40; ++k) {
      const double u = st.u_min() + (st.u_max() - st.u_min()) * k / 40.0;
      const double cur = st.net_injection(u);
      REQUIRE(cur <= prev + 1e-12);
      prev = cur;
    }
    // Piecewise linear with one kink: slopes constant on each side of zero.
    const double mu_d = st.mu_d(), mu_c = st.mu_c();
    const double q = st.u_min() * 0.5;
    REQUIRE(st.net_injection(q) == Catch::Approx(-mu_d * q).margin(1e-12));
    const double r = st.u_max() * 0.5;
    REQUIRE(st.net_injection(r) == Catch::Approx(-r / mu_c).margin(1e-12));
  }
}
