#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "tfdiff/fracderiv.hpp"

using namespace tfdiff;

TEST_CASE("fractional order is restricted to (0,1)", "[fracderiv]") {
    CHECK_THROWS_AS(FractionalOrder(0.0), std::domain_error);
    CHECK_THROWS_AS(FractionalOrder(1.0), std::domain_error);
    CHECK_THROWS_AS(FractionalOrder(-0.3), std::domain_error);
    CHECK(FractionalOrder(0.5).alpha == 0.5);
}

TEST_CASE("power-law kernel values", "[fracderiv]") {
    // g_{1/2}(1) = 1/Gamma(1/2) = 1/sqrt(pi)
    CHECK(rl_kernel(0.5, 1.0) == Catch::Approx(0.5641895835477563).epsilon(1e-14));
    CHECK(rl_kernel(1.0, 0.7) == Catch::Approx(1.0).epsilon(1e-14));
    // g_2(t) = t
    CHECK(rl_kernel(2.0, 0.25) == Catch::Approx(0.25).epsilon(1e-14));
    CHECK_THROWS_AS(rl_kernel(0.5, 0.0), std::domain_error);
    CHECK_THROWS_AS(rl_kernel(0.0, 1.0), std::domain_error);
}

TEST_CASE("psi increments", "[fracderiv]") {
    const FractionalOrder a(0.5);
    CHECK(psi(a, 1.0) == Catch::Approx(1.0 / std::tgamma(1.5)).epsilon(1e-14));
    CHECK(psi(a, 2.0) ==
          Catch::Approx((std::sqrt(2.0) - 1.0) / std::tgamma(1.5)).epsilon(1e-14));
    CHECK_THROWS_AS(psi(a, 0.5), std::domain_error);
    // positive and nonincreasing
    double prev = psi(a, 1.0);
    for (int r = 2; r <= 2000; ++r) {
        const double cur = psi(a, static_cast<double>(r));
        CHECK(cur > 0.0);
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("weights for M=2, alpha=1/2", "[fracderiv]") {
    const CoefficientTable t(FractionalOrder(0.5), 2);
    const auto row = t.row(2);
    REQUIRE(row.size() == 2);
    CHECK(row[0] == Catch::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-15));
    CHECK(row[1] == Catch::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-15));
    CHECK(row[0] == Catch::Approx(0.41421356).margin(1e-8));
    CHECK(row[1] == Catch::Approx(0.58578644).margin(1e-8));
    CHECK(t.weight(1, 0) == Catch::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(t.weight(2, 2), std::out_of_range);
    CHECK_THROWS_AS(t.weight(3, 0), std::out_of_range);
}

TEST_CASE("rows are nonnegative and sum to one", "[fracderiv]") {
    for (double alpha : {0.2, 0.5, 0.8}) {
        const CoefficientTable t(FractionalOrder(alpha), 256);
        for (int m = 1; m <= 256; ++m) {
            double sum = 0.0;
            for (int k = 0; k < m; ++k) {
                const double w = t.weight(m, k);
                REQUIRE(w >= 0.0);
                sum += w;
            }
            REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
        }
    }
}

TEST_CASE("column-sum identities from the energy argument", "[fracderiv]") {
    for (double alpha : {0.2, 0.5, 0.8}) {
        const CoefficientTable t(FractionalOrder(alpha), 256);
        const double g2ma = std::tgamma(2.0 - alpha);
        // sum_{n=1}^m C_{n,0} = m^{1-alpha}
        double acc = 0.0;
        for (int m = 1; m <= 256; ++m) {
            acc += t.weight(m, 0);
            REQUIRE(acc ==
                    Catch::Approx(std::pow(static_cast<double>(m), 1.0 - alpha)).margin(1e-12));
        }
        // sum_{n=k+1}^m C_{n,k} = 1 - Gamma(2-alpha) psi(m+1-k)
        for (int k = 1; k < 256; ++k) {
            double s = 0.0;
            for (int n = k + 1; n <= 256; ++n) {
                s += t.weight(n, k);
                const double expected = 1.0 - g2ma * t.psi_value(n + 1 - k);
                REQUIRE(s == Catch::Approx(expected).margin(1e-12));
            }
        }
    }
}

TEST_CASE("concavity bound on the increments", "[fracderiv]") {
    for (double alpha : {0.2, 0.5, 0.8}) {
        for (int m = 1; m <= 256; ++m)
            for (int k = 1; k <= m; ++k) {
                const double e = 1.0 - alpha;
                const double diff = std::pow(static_cast<double>(m + 1 - k), e) -
                                    std::pow(static_cast<double>(m - k), e);
                CHECK(diff >= e * std::pow(static_cast<double>(m), -alpha) - 1e-14);
            }
    }
}

TEST_CASE("discrete Caputo is exact on u(t) = t", "[fracderiv]") {
    for (double alpha : {0.2, 0.5, 0.8}) {
        const FractionalOrder a(alpha);
        const TimeGrid g(1.0, 1024);
        const CoefficientTable t(a, 1024);
        std::vector<double> samples(1025);
        for (int k = 0; k <= 1024; ++k) samples[static_cast<std::size_t>(k)] = k * g.h;
        for (int m = 1; m <= 1024; ++m) {
            const double got = discrete_caputo(
                t, g, std::span<const double>(samples.data(), static_cast<std::size_t>(m) + 1), m);
            const double want = caputo_reference(a, m * g.h, 1.0);
            REQUIRE(got == Catch::Approx(want).margin(1e-10));
        }
    }
}

TEST_CASE("discrete Caputo converges on u(t) = t^2", "[fracderiv]") {
    const FractionalOrder a(0.5);
    double prev_err = 1e300;
    for (int M : {64, 256, 1024}) {
        const TimeGrid g(1.0, M);
        const CoefficientTable t(a, M);
        std::vector<double> samples(static_cast<std::size_t>(M) + 1);
        for (int k = 0; k <= M; ++k)
            samples[static_cast<std::size_t>(k)] = (k * g.h) * (k * g.h);
        const double got = discrete_caputo(t, g, samples, M);
        const double err = std::abs(got - caputo_reference(a, 1.0, 2.0));
        CHECK(err < prev_err);
        prev_err = err;
    }
    CHECK(prev_err < 1e-4);
}

TEST_CASE("discrete Caputo input validation", "[fracderiv]") {
    const CoefficientTable t(FractionalOrder(0.5), 4);
    const TimeGrid g(1.0, 4);
    std::vector<double> s{0.0, 1.0};
    CHECK_THROWS_AS(discrete_caputo(t, g, s, 2), std::invalid_argument);
    CHECK_THROWS_AS(discrete_caputo(t, g, s, 0), std::out_of_range);
}

TEST_CASE("Mittag-Leffler special values", "[fracderiv]") {
    CHECK(mittag_leffler(1.0, 1.0) == Catch::Approx(std::exp(1.0)).margin(1e-10));
    CHECK(mittag_leffler(0.5, 0.0) == 1.0);
    // E_{1/2}(-1) = e * erfc(1)
    CHECK(mittag_leffler(0.5, -1.0) ==
          Catch::Approx(std::exp(1.0) * std::erfc(1.0)).margin(1e-12));
    CHECK(mittag_leffler(0.5, -1.0) == Catch::Approx(0.4275836).margin(1e-7));
    CHECK_THROWS_AS(mittag_leffler(0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(mittag_leffler(1.5, 1.0), std::domain_error);
}

TEST_CASE("Mittag-Leffler agrees with independent oracles on [-5,5]", "[fracderiv]") {
    // alpha = 1/2: closed form E_{1/2}(z) = exp(z^2) erfc(-z), evaluated in
    // long double.
    for (int i = 0; i <= 200; ++i) {
        const double z = -5.0 + 0.05 * i;
        const long double oracle =
            expl(static_cast<long double>(z) * z) * erfcl(-static_cast<long double>(z));
        REQUIRE(mittag_leffler(0.5, z) ==
                Catch::Approx(static_cast<double>(oracle)).epsilon(1e-9));
    }
    // other alphas: direct long-double series where its own round-off is
    // provably below 1e-12 (largest term < 1e6)
    for (double alpha : {0.2, 0.8}) {
        for (int i = 0; i <= 100; ++i) {
            const double z = -5.0 + 0.1 * i;
            if (z == 0.0) continue;
            if (detail::ml_taylor_max_log_term(alpha, std::abs(z)) > std::log(1e6)) continue;
            long double sum = 0.0L, term = 1.0L;
            for (int n = 0; n < 4000; ++n) {
                sum += term;
                term = powl(static_cast<long double>(z), n + 1) /
                       expl(lgammal(static_cast<long double>(alpha) * (n + 1) + 1.0L));
                if (fabsl(term) < 1e-22L && n > 8) break;
            }
            REQUIRE(mittag_leffler(alpha, z) ==
                    Catch::Approx(static_cast<double>(sum)).epsilon(1e-9));
        }
    }
}

TEST_CASE("Mittag-Leffler asymptotic branch on large negative arguments", "[fracderiv]") {
    // E_{1/2}(-pi^2) = exp(pi^4) erfc(pi^2), the eigenmode decay factor
    const long double p2 = 9.869604401089358618834490999876L;
    const long double oracle = expl(p2 * p2) * erfcl(p2);
    CHECK(mittag_leffler(0.5, -static_cast<double>(p2)) ==
          Catch::Approx(static_cast<double>(oracle)).epsilon(1e-10));
    // complete monotonicity: decreasing in |z| for z < 0
    for (double alpha : {0.2, 0.5, 0.8}) {
        double prev = 1.0;
        for (double x = 0.5; x <= 60.0; x += 0.5) {
            const double v = mittag_leffler(alpha, -x);
            CHECK(v > 0.0);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("Mittag-Leffler growth for positive arguments", "[fracderiv]") {
    // E_{1/2}(2) = exp(4) erfc(-2)
    CHECK(mittag_leffler(0.5, 2.0) ==
          Catch::Approx(std::exp(4.0) * std::erfc(-2.0)).epsilon(1e-12));
    CHECK(std::isinf(mittag_leffler(0.5, 1e6)));
}
