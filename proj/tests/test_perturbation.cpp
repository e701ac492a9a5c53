#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "pertl/duffing.hpp"
#include "pertl/perturbation.hpp"
#include "support/polynomial_oracle.hpp"

using namespace pertl;

namespace {

PolynomialNonlinearODE make_ode(int q, double eps, double x_star = 0.0) {
  PolynomialNonlinearODE ode;
  ode.g = {1.0, 0.0, 1.0};
  ode.q = q;
  ode.epsilon = eps;
  ode.bc_value = x_star;
  ode.bc_derivatives = {0.0};
  return ode;
}

}  // namespace

TEST_CASE("enumerate_multi_indices matches the worked examples") {
  CHECK(enumerate_multi_indices(2, 2, 1) == std::vector<std::vector<int>>{{2, 0, 0}});
  CHECK(enumerate_multi_indices(2, 2, 2) == std::vector<std::vector<int>>{{1, 1, 0}});
  CHECK(enumerate_multi_indices(3, 3, 3) == std::vector<std::vector<int>>{{1, 2, 0, 0}, {2, 0, 1, 0}});
}

TEST_CASE("enumerate_multi_indices agrees with brute force and satisfies both constraints") {
  for (int q = 2; q <= 5; ++q) {
    for (int p = 1; p <= 5; ++p) {
      for (int j = 1; j <= p; ++j) {
        const auto got = enumerate_multi_indices(q, p, j);
        CHECK(got == test_support::brute_force_indices(q, p, j));
        for (const auto& k : got) {
          int sum = 0, weighted = 0;
          for (int i = 0; i <= p; ++i) {
            sum += k[i];
            weighted += i * k[i];
            if (i >= j) CHECK(k[i] == 0);  // f_j only uses orders < j
          }
          CHECK(sum == q);
          CHECK(weighted == j - 1);
        }
      }
    }
  }
}

TEST_CASE("enumerate_multi_indices rejects invalid arguments") {
  CHECK_THROWS_AS(enumerate_multi_indices(1, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_multi_indices(2, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_multi_indices(2, 2, 3), std::invalid_argument);
}

TEST_CASE("multinomial coefficient includes k_0!") {
  const std::vector<int> k{1, 1, 0};
  CHECK(multinomial_coefficient(2, k) == 2);
  const std::vector<int> k3{2, 1, 0};
  CHECK(multinomial_coefficient(3, k3) == 3);
  const std::vector<int> k20{5, 5, 5, 5};
  CHECK(multinomial_coefficient(20, k20) == 11732745024LL);
  const std::vector<int> big{21};
  CHECK_THROWS(multinomial_coefficient(21, big));
}

TEST_CASE("build_cascade for q = 2 reproduces f_1 = -x0^2 and f_2 = -2 x0 x1") {
  const auto spec = build_cascade(make_ode(2, 0.1), 2);
  REQUIRE(spec.terms.size() == 3);
  CHECK(spec.terms[0].empty());
  CHECK(spec.terms[1] == std::vector<ForcingTerm>{{-1.0, {2, 0, 0}}});
  CHECK(spec.terms[2] == std::vector<ForcingTerm>{{-2.0, {1, 1, 0}}});
}

TEST_CASE("build_cascade for q = 3, p = 2") {
  const auto spec = build_cascade(make_ode(3, 0.1), 2);
  CHECK(spec.terms[1] == std::vector<ForcingTerm>{{-1.0, {3, 0, 0}}});
  CHECK(spec.terms[2] == std::vector<ForcingTerm>{{-3.0, {2, 1, 0}}});
}

TEST_CASE("p = 0 leaves only the linear equation") {
  for (int q = 2; q <= 6; ++q) {
    const auto spec = build_cascade(make_ode(q, 0.3), 0);
    CHECK(spec.terms.size() == 1);
    CHECK(spec.terms[0].empty());
    CHECK(spec.bc_scale == 1.0);
  }
}

TEST_CASE("cascade terms match brute-force expansion of eps * (sum eps^i x_i)^q") {
  for (int q = 2; q <= 4; ++q) {
    for (int p = 0; p <= 4; ++p) {
      const auto spec = build_cascade(make_ode(q, 0.2), p);
      const auto expected = test_support::expected_cascade_terms(q, p);
      for (int j = 1; j <= p; ++j) {
        std::map<std::vector<int>, long long> got;
        for (const auto& t : spec.terms[j]) {
          CHECK(t.coefficient == std::round(t.coefficient));
          got[t.exponents] += static_cast<long long>(t.coefficient);
        }
        CHECK(got == expected[j]);
      }
    }
  }
}

TEST_CASE("build_cascade errors and warnings") {
  CHECK_THROWS_AS(build_cascade(make_ode(2, 0.5), -1), std::invalid_argument);
  // 1 + eps = 0 at eps = -1, p = 1
  CHECK_THROWS_AS(build_cascade(make_ode(2, -1.0), 1), std::invalid_argument);
  CHECK(build_cascade(make_ode(2, 0.5), 3).warnings.empty());
  CHECK(build_cascade(make_ode(2, 1.5), 3).warnings.size() == 1);
}

TEST_CASE("evaluate_forcing hand values") {
  SUBCASE("zero solution annihilates every monomial") {
    const auto spec = build_cascade(make_ode(3, 0.5), 3);
    const std::vector<OrderEvaluator> solved{[](double) { return 0.0; }};
    const std::vector<double> t{0.0, 1.0, 2.5};
    CHECK(evaluate_forcing(spec, 1, solved, t) == std::vector<double>{0.0, 0.0, 0.0});
  }
  SUBCASE("q = 2, f_2 = -2 x0 x1 at t = 2") {
    const auto spec = build_cascade(make_ode(2, 0.5), 2);
    const std::vector<OrderEvaluator> solved{[](double) { return 1.0; }, [](double t) { return t; }};
    const std::vector<double> t{2.0};
    CHECK(evaluate_forcing(spec, 2, solved, t)[0] == doctest::Approx(-4.0));
  }
  SUBCASE("q = 3, f_2 = -3 x0^2 x1 at t = 2") {
    const auto spec = build_cascade(make_ode(3, 0.5), 2);
    const std::vector<OrderEvaluator> solved{[](double t) { return t; }, [](double) { return 1.0; }};
    const std::vector<double> t{2.0};
    CHECK(evaluate_forcing(spec, 2, solved, t)[0] == doctest::Approx(-12.0));
  }
}

TEST_CASE("evaluate_forcing signals missing orders") {
  const auto spec = build_cascade(make_ode(2, 0.5), 3);
  const std::vector<double> t{0.5};
  const std::vector<OrderEvaluator> one{[](double) { return 1.0; }};
  CHECK_THROWS_AS(evaluate_forcing(spec, 2, one, t), std::invalid_argument);
  const std::vector<OrderEvaluator> hole{[](double) { return 1.0; }, OrderEvaluator{}};
  CHECK_THROWS_AS(evaluate_forcing(spec, 2, hole, t), std::invalid_argument);
}

TEST_CASE("evaluate_forcing is bitwise deterministic") {
  const auto spec = build_cascade(make_ode(4, 0.3), 6);
  std::vector<std::vector<double>> solved(6, std::vector<double>(50));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (auto& v : solved)
    for (double& x : v) x = nd(rng);
  const auto a = evaluate_forcing_values(spec, 6, solved);
  const auto b = evaluate_forcing_values(spec, 6, solved);
  CHECK(a == b);
}

TEST_CASE("split_boundary") {
  SUBCASE("eps = 0 keeps the boundary value") {
    const auto ode = make_ode(3, 0.0, 3.0);
    for (const auto& u : split_boundary(ode, build_cascade(ode, 2))) CHECK(u[0] == 3.0);
  }
  SUBCASE("eps = 0.5, p = 2 divides by 1.75") {
    const auto ode = make_ode(3, 0.5, 3.0);
    const auto parts = split_boundary(ode, build_cascade(ode, 2));
    REQUIRE(parts.size() == 3);
    for (const auto& u : parts) CHECK(u[0] == doctest::Approx(1.7142857142857142).epsilon(1e-15));
  }
  SUBCASE("zero boundary stays zero") {
    const auto ode = make_ode(2, -0.4, 0.0);
    for (const auto& u : split_boundary(ode, build_cascade(ode, 5))) {
      CHECK(u == std::vector<double>{0.0, 0.0});
    }
  }
}

TEST_CASE("split boundary recombines to the original vector") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> eps_dist(-0.9, 0.9), val(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    PolynomialNonlinearODE ode;
    ode.g = {1.0, 2.0, 3.0, 1.5};
    ode.q = 3;
    ode.epsilon = eps_dist(rng);
    ode.bc_value = val(rng);
    ode.bc_derivatives = {val(rng), val(rng)};
    const int p = trial % 14;
    const auto parts = split_boundary(ode, build_cascade(ode, p));
    const auto original = ode.boundary_vector();
    for (std::size_t c = 0; c < original.size(); ++c) {
      double sum = 0.0, w = 1.0;
      for (int k = 0; k <= p; ++k) {
        sum += w * parts[k][c];
        w *= ode.epsilon;
      }
      CHECK(sum == doctest::Approx(original[c]).epsilon(1e-14));
    }
  }
}

TEST_CASE("compose_solution") {
  const std::vector<double> t{0.0, 1.0, 2.0};
  const std::vector<OrderEvaluator> single{[](double s) { return s * s; }};
  CHECK(compose_solution(single, 0.7, 0, t) == std::vector<double>{0.0, 1.0, 4.0});

  const std::vector<OrderEvaluator> several{[](double s) { return s; }, [](double) { return 9.0; },
                                            [](double) { return -4.0; }};
  CHECK(compose_solution(several, 0.0, 2, t) == std::vector<double>{0.0, 1.0, 2.0});

  const std::vector<OrderEvaluator> ones(3, [](double) { return 1.0; });
  for (double v : compose_solution(ones, 0.5, 2, t)) CHECK(v == doctest::Approx(1.75));

  CHECK_THROWS_AS(compose_solution(ones, 0.5, 3, t), std::invalid_argument);
}

TEST_CASE("cascade text form round-trips and is stable") {
  const auto spec = build_cascade(make_ode(3, 0.5), 3);
  const auto text = cascade_to_text(spec);
  CHECK(cascade_from_text(text) == spec);
  CHECK(text.find("\"format\": \"pertl-cascade/1\"") != std::string::npos);
  CHECK_THROWS(cascade_from_text("{\"format\": \"other\"}"));
}

TEST_CASE("Duffing instance maps onto the polynomial class") {
  DuffingParams d{0.3, 1.2, 0.5, 2.0, 1.1, -0.7, 0.0};
  const auto ode = duffing_ode(d);
  CHECK(ode.g == std::vector<double>{1.2, 0.3, 1.0});
  CHECK(ode.q == 3);
  CHECK(ode.epsilon == 0.5);
  CHECK(ode.forcing(0.0) == doctest::Approx(2.0));
  CHECK(ode.boundary_vector() == std::vector<double>{-0.7, 0.0});
  CHECK_NOTHROW(ode.validate());
  auto bad = ode;
  bad.g.back() = 0.0;
  CHECK_THROWS(bad.validate());
}
