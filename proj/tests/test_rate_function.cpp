#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "zrp/rate_function.hpp"

using namespace zrp;

TEST_CASE("power rate basics") {
  RateFunction r = RateFunction::power(1.0);
  REQUIRE(r(0) == 0.0);
  REQUIRE(r(1) == 1.0);
  REQUIRE(r(7) == 7.0);
  REQUIRE(r.is_power());

  RateFunction s = RateFunction::power(0.5);
  REQUIRE(s(4) == Catch::Approx(2.0).margin(1e-14));
  REQUIRE_THROWS_AS(RateFunction::power(-0.1), InvalidArgument);
}

TEST_CASE("table rate and horizon") {
  RateFunction r = RateFunction::table({1.0, 2.0, 3.0});
  REQUIRE(r(0) == 0.0);
  REQUIRE(r(2) == 2.0);
  REQUIRE(r.horizon() == 3);
  REQUIRE_THROWS_AS(r(4), HorizonError);
  REQUIRE_THROWS_AS(RateFunction::table({}), InvalidArgument);
  REQUIRE_THROWS_AS(RateFunction::table({1.0, 0.0}), InvalidArgument);
}

TEST_CASE("R(k) prefix sums") {
  RateFunction r = RateFunction::power(1.0);
  REQUIRE(r.big_r(0) == 0.0);
  // R(3) = 1 + 1/2 + 1/3 = 11/6
  REQUIRE(r.big_r(3) == Catch::Approx(11.0 / 6.0).epsilon(1e-14));
  RateFunction s = RateFunction::power(0.5);
  double expected = 1.0 + 1.0 / std::sqrt(2.0) + 1.0 / std::sqrt(3.0) + 0.5;
  REQUIRE(s.big_r(4) == Catch::Approx(expected).epsilon(1e-14));
  REQUIRE_THROWS_AS(r.big_r(-1), InvalidArgument);
  RateFunction t = RateFunction::table({1.0, 2.0});
  REQUIRE(t.big_r(2) == Catch::Approx(1.5).epsilon(1e-14));
  REQUIRE_THROWS_AS(t.big_r(3), HorizonError);
}

TEST_CASE("Delta increments") {
  RateFunction r = RateFunction::power(1.0);
  REQUIRE(r.delta(0) == 1.0);   // r(1) - r(0)
  REQUIRE(r.delta(5) == 1.0);
  RateFunction s = RateFunction::power(0.5);
  REQUIRE(s.delta(3) == Catch::Approx(2.0 - std::sqrt(3.0)).epsilon(1e-14));
  REQUIRE(s.max_delta(10) == 1.0);  // concave: Delta(0) = r(1) = 1 dominates
}

TEST_CASE("linear bound sup r(k)/k") {
  REQUIRE(RateFunction::power(0.5).linear_bound(20) == 1.0);
  REQUIRE(RateFunction::power(1.0).linear_bound(20) == 1.0);
  RateFunction t = RateFunction::table({2.0, 2.5, 3.0});
  REQUIRE(t.linear_bound(3) == 2.0);
}

TEST_CASE("min_k_with_rate_at_least binary search") {
  RateFunction r = RateFunction::power(1.0);
  REQUIRE(r.min_k_with_rate_at_least(2.5, 100).value() == 3);
  REQUIRE(r.min_k_with_rate_at_least(0.0, 100).value() == 0);
  REQUIRE(r.min_k_with_rate_at_least(1.0, 100).value() == 1);
  REQUIRE_FALSE(r.min_k_with_rate_at_least(200.0, 100).has_value());
  RateFunction s = RateFunction::power(0.5);
  REQUIRE(s.min_k_with_rate_at_least(6.0, 100).value() == 36);
}

TEST_CASE("validate_rate") {
  auto ok = validate_rate(RateFunction::power(0.7), 50);
  REQUIRE(ok.valid);
  REQUIRE_FALSE(ok.monotonicity_violation.has_value());
  REQUIRE(ok.sup_ratio == 1.0);
  REQUIRE(ok.unboundedness_declared_not_checked);

  auto bad = validate_rate(RateFunction::table({1.0, 3.0, 2.0}), 3);
  REQUIRE_FALSE(bad.valid);
  REQUIRE(bad.monotonicity_violation.value() == 3);
}

TEST_CASE("ModelSpec::make") {
  ModelSpec spec = ModelSpec::make(RateFunction::power(0.5), 4, 8);
  REQUIRE(spec.rho == Catch::Approx(2.0));
  REQUIRE(spec.kappa == Catch::Approx(2.0));  // rho * sup sqrt(k)/k = 2 * 1

  ModelSpec wide = ModelSpec::make(RateFunction::power(1.0), 3, 6, 3.0);
  REQUIRE(wide.rho == 3.0);
  REQUIRE(wide.kappa == Catch::Approx(3.0));

  REQUIRE_THROWS_AS(ModelSpec::make(RateFunction::power(1.0), 1, 2),
                    InvalidArgument);
  REQUIRE_THROWS_AS(ModelSpec::make(RateFunction::power(1.0), 3, 6, 1.0),
                    InvalidArgument);
  REQUIRE_THROWS_AS(ModelSpec::make(RateFunction::table({1.0, 2.0}), 3, 6),
                    HorizonError);
}
