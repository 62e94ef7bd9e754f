#include "msb/survival.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace msb;

namespace {

Outcomes flipped(const Outcomes& y) {
  Outcomes f = y;
  for (auto& o : f) o.event = !o.event;
  return f;
}

void check_survival_curve(const StepCurve& s) {
  CHECK(s.before_first == 1.0);
  double prev = 1.0;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    CHECK(s.values[k] >= 0.0);
    CHECK(s.values[k] <= prev);
    prev = s.values[k];
    if (k > 0) CHECK(s.times[k] > s.times[k - 1]);
  }
}

}  // namespace

TEST_CASE("step curve evaluation is right continuous") {
  StepCurve c{{1.0, 3.0}, {0.8, 0.4}, 1.0};
  CHECK(c(0.5) == 1.0);
  CHECK(c(1.0) == 0.8);
  CHECK(c(2.9) == 0.8);
  CHECK(c(3.0) == 0.4);
  CHECK(c(100.0) == 0.4);
  CHECK(c.left_limit(1.0) == 1.0);
  CHECK(c.left_limit(3.0) == 0.8);
  CHECK(c.left_limit(3.5) == 0.4);
}

TEST_CASE("kaplan meier hand cases") {
  const Outcomes y{{1, true}, {2, true}, {3, true}};
  const auto km = kaplan_meier(y);
  CHECK(km(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(km(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(km(3) == 0.0);

  const auto cens = kaplan_meier(Outcomes{{1, false}, {4, false}});
  CHECK(cens(0.5) == 1.0);
  CHECK(cens(10) == 1.0);

  CHECK_THROWS_AS(kaplan_meier(Outcomes{}), DataError);
  CHECK_THROWS_AS(nelson_aalen(Outcomes{}), DataError);
  CHECK_THROWS_AS(censoring_km(Outcomes{}), DataError);
}

TEST_CASE("events precede censorings at tied times") {
  // at t=2: one death, one censoring, at risk 3
  const auto km = kaplan_meier(Outcomes{{1, true}, {2, true}, {2, false}, {3, true}});
  CHECK(km(2) == doctest::Approx(0.75 * 2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("no censoring gives one minus the ECDF") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto y = oracle::random_outcomes(rng, 15, 8, 1.0);
    const auto km = kaplan_meier(y);
    for (const auto& o : y) {
      double below = 0;
      for (const auto& u : y) below += u.time <= o.time ? 1 : 0;
      CHECK(km(o.time) == doctest::Approx(1.0 - below / 15.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("kaplan meier matches brute-force product form") {
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + uniform_index(rng, 20);
    const auto y = oracle::random_outcomes(rng, n, 1 + static_cast<int>(uniform_index(rng, 12)), 0.6);
    const auto km = kaplan_meier(y);
    check_survival_curve(km);
    for (double t = 0.0; t <= 14.0; t += 0.5) CHECK(std::abs(km(t) - oracle::km_at(y, t)) <= 1e-12);
  }
}

TEST_CASE("censoring KM is KM of the flipped sample") {
  CHECK(censoring_km(Outcomes{{1, true}, {2, true}})(5) == 1.0);
  Rng rng(23);
  for (int rep = 0; rep < 50; ++rep) {
    auto y = oracle::random_outcomes(rng, 5 + uniform_index(rng, 10), 6, 0.5);
    // distinct times so no tie convention interferes
    for (std::size_t i = 0; i < y.size(); ++i) y[i].time = static_cast<double>(i) + 0.25 * uniform_open(rng);
    const auto g = censoring_km(y);
    const auto k = kaplan_meier(flipped(y));
    for (double t = 0.0; t < 16.0; t += 0.1) CHECK(g(t) == doctest::Approx(k(t)).epsilon(1e-14));
  }
}

TEST_CASE("nelson aalen hand cases") {
  CHECK(nelson_aalen(Outcomes{{1, true}})(1) == 1.0);
  const auto h = nelson_aalen(Outcomes{{1, true}, {2, true}});
  CHECK(h(1) == 0.5);
  CHECK(h(2) == 1.5);
  const auto z = nelson_aalen(Outcomes{{1, false}, {2, false}});
  CHECK(z(3) == 0.0);
  CHECK(z.before_first == 0.0);
}

TEST_CASE("breslow baseline") {
  Rng rng(29);
  SUBCASE("zero predictors reduce to nelson aalen") {
    for (int rep = 0; rep < 30; ++rep) {
      const auto y = oracle::random_outcomes(rng, 4 + uniform_index(rng, 20), 7, 0.6);
      const std::vector<double> lp(y.size(), 0.0);
      const auto b = breslow_baseline(y, lp);
      const auto na = nelson_aalen(y);
      for (double t = 0; t < 9; t += 0.25) CHECK(std::abs(b(t) - na(t)) <= 1e-12);
    }
  }
  SUBCASE("risk set sum") {
    const Outcomes y{{1, true}, {2, false}, {3, true}};
    const std::vector<double> lp{std::log(2.0), 0.0, 0.0};
    const auto b = breslow_baseline(y, lp);
    CHECK(b(1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(b(3) == doctest::Approx(1.25).epsilon(1e-15));
  }
  SUBCASE("shift invariance") {
    const auto y = oracle::random_outcomes(rng, 25, 10, 0.7);
    std::vector<double> lp(y.size()), shifted(y.size());
    const double c = 1.7;
    for (std::size_t i = 0; i < y.size(); ++i) {
      lp[i] = oracle::normal(rng);
      shifted[i] = lp[i] + c;
    }
    const auto b0 = breslow_baseline(y, lp), b1 = breslow_baseline(y, shifted);
    for (std::size_t k = 0; k < b0.values.size(); ++k) {
      CHECK(b1.values[k] == doctest::Approx(b0.values[k] * std::exp(-c)).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto s0 = cox_survival(b0, lp[i]), s1 = cox_survival(b1, shifted[i]);
      check_survival_curve(s0);
      for (double t = 0; t < 12; t += 0.5) CHECK(std::abs(s0(t) - s1(t)) <= 1e-10);
    }
  }
  CHECK_THROWS_AS(breslow_baseline(Outcomes{{1, true}}, std::vector<double>{0.0, 1.0}), DataError);
}

TEST_CASE("log-rank test") {
  Rng rng(31);
  SUBCASE("matches textbook observed minus expected") {
    for (int rep = 0; rep < 100; ++rep) {
      const auto a = oracle::random_outcomes(rng, 3 + uniform_index(rng, 15), 8, 0.6);
      const auto b = oracle::random_outcomes(rng, 3 + uniform_index(rng, 15), 8, 0.6);
      const auto r = logrank_test(a, b);
      const double expected = oracle::logrank(a, b);
      CHECK(r.statistic == doctest::Approx(expected).epsilon(1e-10));
      CHECK(r.p_value == doctest::Approx(std::erfc(std::sqrt(expected / 2.0))).epsilon(1e-10));
    }
  }
  SUBCASE("identical groups") {
    const auto a = oracle::random_outcomes(rng, 12, 6, 0.6);
    const auto r = logrank_test(a, a);
    CHECK(std::abs(r.statistic) <= 1e-12);
    CHECK(r.p_value == doctest::Approx(1.0));
  }
  SUBCASE("no events anywhere") {
    const auto r = logrank_test(Outcomes{{1, false}}, Outcomes{{2, false}});
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("well separated groups") {
    Outcomes a, b;
    for (int i = 1; i <= 5; ++i) {
      a.push_back({static_cast<double>(i), true});
      b.push_back({static_cast<double>(i + 5), true});
    }
    CHECK(logrank_test(a, b).p_value < 0.05);
  }
  SUBCASE("permutation within group") {
    auto a = oracle::random_outcomes(rng, 10, 6, 0.6);
    const auto b = oracle::random_outcomes(rng, 10, 6, 0.6);
    const double s = logrank_test(a, b).statistic;
    shuffle(a, rng);
    CHECK(logrank_test(a, b).statistic == doctest::Approx(s).epsilon(1e-13));
  }
}

TEST_CASE("chi-square upper tail") {
  CHECK(chi2_1df_sf(0.0) == 1.0);
  CHECK(chi2_1df_sf(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(chi2_1df_sf(6.634896601021214) == doctest::Approx(0.01).epsilon(1e-12));
}
