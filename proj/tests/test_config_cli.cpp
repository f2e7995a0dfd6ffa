#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <variant>

#include "tfdiff/config.hpp"
#include "tfdiff/expression.hpp"

using namespace tfdiff;

namespace {
constexpr double pi = 3.14159265358979323846;
}

TEST_CASE("expression grammar", "[config]") {
    const Expression e = Expression::parse("2*x^2 + sin(pi*t) - y/4");
    CHECK(e(3.0, 8.0, 0.5) == Catch::Approx(18.0 + 1.0 - 2.0).epsilon(1e-14));
    CHECK(Expression::parse("-x^2")(2.0, 0, 0) == Catch::Approx(-4.0));
    CHECK(Expression::parse("(-x)^2")(2.0, 0, 0) == Catch::Approx(4.0));
    // right-associative power
    CHECK(Expression::parse("2^3^2")(0, 0, 0) == Catch::Approx(512.0));
    CHECK(Expression::parse("exp(0)")(0, 0, 0) == 1.0);
    CHECK(Expression::parse("cos(pi)")(0, 0, 0) == Catch::Approx(-1.0).epsilon(1e-14));
    CHECK(Expression::parse("1/0.5")(0, 0, 0) == Catch::Approx(2.0));
    CHECK(Expression::parse("x").uses_variable('x'));
    CHECK_FALSE(Expression::parse("x").uses_variable('t'));
}

TEST_CASE("expression parse errors carry positions", "[config]") {
    CHECK_THROWS_AS(Expression::parse("2 +"), ParseError);
    CHECK_THROWS_AS(Expression::parse("sin 3"), ParseError);
    CHECK_THROWS_AS(Expression::parse("(1+2"), ParseError);
    CHECK_THROWS_AS(Expression::parse("foo(1)"), ParseError);
    CHECK_THROWS_AS(Expression::parse("1 2"), ParseError);
    CHECK_THROWS_AS(Expression::parse(""), ParseError);
    try {
        Expression::parse("1 + bar");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.column == 4);
        CHECK(std::string(e.what()).find("bar") != std::string::npos);
    }
}

TEST_CASE("config parsing fills defaults", "[config]") {
    const ParsedConfig c = parse_config_text("[problem]\nalpha = 0.3\nM = 10\nu0 = 0\n");
    REQUIRE(std::holds_alternative<RunConfig>(c));
    const RunConfig& r = std::get<RunConfig>(c);
    CHECK(r.alpha == 0.3);
    CHECK(r.M == 10);
    CHECK(r.T == 1.0);
    CHECK(r.N == 63);
    CHECK(r.dim == 1);
    CHECK(r.oracle == "none");
}

TEST_CASE("config validation names the offending key", "[config]") {
    auto parse_and_validate = [](const std::string& text) {
        validate_config(parse_config_text(text));
    };
    CHECK_THROWS_WITH(parse_and_validate("[problem]\nalpha = 1.0\n"),
                      Catch::Matchers::ContainsSubstring("alpha must lie strictly in (0,1)"));
    CHECK_THROWS_WITH(parse_and_validate("[problem]\nN = 1\n"),
                      Catch::Matchers::ContainsSubstring("problem.N"));
    CHECK_THROWS_WITH(parse_and_validate("[problem]\nu0 = sin(t)\n"),
                      Catch::Matchers::ContainsSubstring("problem.u0"));
    CHECK_THROWS_WITH(parse_and_validate("[problem]\nf = wobble(x)\n"),
                      Catch::Matchers::ContainsSubstring("problem.f"));
    CHECK_THROWS_WITH(parse_and_validate("[output]\nsnapshots = 0.5, 2.5\n"),
                      Catch::Matchers::ContainsSubstring("snapshots"));
    CHECK_THROWS_WITH(parse_and_validate("[output]\noracle = psychic\n"),
                      Catch::Matchers::ContainsSubstring("oracle"));
}

TEST_CASE("unknown sections and keys are rejected", "[config]") {
    CHECK_THROWS_WITH(parse_config_text("[problem]\nbanana = 1\n"),
                      Catch::Matchers::ContainsSubstring("problem.banana"));
    CHECK_THROWS_AS(parse_config_text("[conjecture]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("alpha = 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[problem]\nalpha 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[problem]\nalpha = fast\n"), ConfigError);
}

TEST_CASE("study ladders must increase in M", "[config]") {
    const std::string good =
        "[problem]\nu0 = sin(pi*x)\n[study]\nladder = 64:63, 128:63\n";
    const ParsedConfig c = parse_config_text(good);
    REQUIRE(std::holds_alternative<StudyConfig>(c));
    validate_config(c);
    CHECK(std::get<StudyConfig>(c).ladder.size() == 2);

    const std::string bad =
        "[problem]\nu0 = sin(pi*x)\n[study]\nladder = 64:63, 32:31\n";
    CHECK_THROWS_WITH(validate_config(parse_config_text(bad)),
                      Catch::Matchers::ContainsSubstring("strictly increasing"));
    CHECK_THROWS_AS(parse_config_text("[study]\nladder = 64-63\n"), ConfigError);
}

TEST_CASE("presets parse, validate, and build problems", "[config]") {
    for (const char* name : {"zero", "eigenmode", "manufactured", "stationary", "aniso2d"}) {
        const ParsedConfig c = parse_preset(name);
        REQUIRE(std::holds_alternative<RunConfig>(c));
        RunConfig rc = std::get<RunConfig>(c);
        CHECK(rc.preset == name);
        rc.M = 4;
        rc.N = 7;
        if (rc.dim == 2) rc.Ny = 7;
        const ProblemSpec p = build_problem(rc);
        CHECK(p.grid.M == 4);
        const SchemeHistory h = run(p);
        CHECK(h.fields.size() == 5);
    }
    CHECK_THROWS_AS(parse_preset("plasma"), ConfigError);
}

TEST_CASE("manufactured preset source matches the exact forcing", "[config]") {
    // u = (1+t^2) sin(pi x): f = d_t^a u + L u with
    // d_t^a (t^2) = 2 t^{2-a} / Gamma(3-a)
    const RunConfig rc = std::get<RunConfig>(parse_preset("manufactured"));
    const ProblemSpec p = build_problem(rc);
    const FractionalOrder a(rc.alpha);
    for (double t : {0.1, 0.5, 0.9}) {
        for (double x : {0.25, 0.5, 0.75}) {
            const double want = std::sin(pi * x) * (caputo_reference(a, t, 2.0) +
                                                    pi * pi * (1.0 + t * t));
            CHECK(p.f(x, 0.0, t) == Catch::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("oracle values", "[config]") {
    RunConfig rc = std::get<RunConfig>(parse_preset("eigenmode"));
    CHECK(oracle_value(rc, 0.5, 0.0) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(oracle_value(rc, 0.5, 1.0) ==
          Catch::Approx(mittag_leffler(0.5, -pi * pi)).epsilon(1e-12));
    rc.oracle = "manufactured";
    CHECK(oracle_value(rc, 0.5, 1.0) == Catch::Approx(2.0).epsilon(1e-14));
    rc.oracle = "none";
    CHECK_THROWS_AS(oracle_value(rc, 0.5, 1.0), ConfigError);
}

TEST_CASE("comments and blank lines are ignored", "[config]") {
    const std::string text =
        "# leading comment\n\n[problem]\nalpha = 0.25  # inline\n\n# trailing\n";
    const RunConfig r = std::get<RunConfig>(parse_config_text(text));
    CHECK(r.alpha == 0.25);
}
