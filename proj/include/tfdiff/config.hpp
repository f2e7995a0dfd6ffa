#pragma once

// INI-style run/study configuration: parsing with line-numbered errors,
// validation that names the offending key, shipped presets, and the
// translation of a validated config into a ProblemSpec.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tfdiff/expression.hpp"
#include "tfdiff/fracderiv.hpp"
#include "tfdiff/timestepper.hpp"

namespace tfdiff {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    double alpha = 0.5;
    double T = 1.0;
    int M = 64;
    int dim = 1;
    double x_lo = 0.0, x_hi = 1.0;
    double y_lo = 0.0, y_hi = 1.0;
    int N = 63;   // interior nodes along x
    int Ny = 0;   // interior nodes along y (0: same as N)
    std::string a11 = "1", a12 = "0", a22 = "1";
    double lambda = 0.9;
    std::string f = "0";
    std::string u0 = "0";
    std::string oracle = "none";  // none | eigenmode | manufactured
    std::vector<double> snapshots;  // defaults to {0, T} when empty
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string preset;
    bool diag_energy = true;
    bool diag_weak_form = true;
    bool diag_kernel = true;

    int ny_effective() const { return Ny > 0 ? Ny : N; }
};

struct StudyConfig {
    RunConfig base;
    std::vector<std::pair<int, int>> ladder;  // (M, N) rungs
};

using ParsedConfig = std::variant<RunConfig, StudyConfig>;

namespace detail {

inline double config_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + ": trailing characters in '" + v + "'");
    return out;
}

inline long long config_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + ": trailing characters in '" + v + "'");
    return out;
}

inline bool config_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

// Expression-valued keys: parse errors are re-thrown naming the key;
// forbid lists which variables may appear.
inline Expression config_expression(const std::string& key, const std::string& text,
                                    const std::string& forbid) {
    Expression e;
    try {
        e = Expression::parse(text);
    } catch (const ParseError& pe) {
        throw ConfigError(key + ": " + pe.what());
    }
    for (char v : forbid)
        if (e.uses_variable(v))
            throw ConfigError(key + ": variable '" + std::string(1, v) + "' is not allowed here");
    return e;
}

}  // namespace detail

/// Parses the structured key-value text (sections [problem], [output],
/// [study], [diagnostics]). Returns a StudyConfig when a ladder is given.
/// Unknown sections or keys are rejected with the full key path.
inline ParsedConfig parse_config_text(const std::string& text) {
    RunConfig run;
    std::vector<std::pair<int, int>> ladder;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "problem" && section != "output" && section != "study" &&
                section != "diagnostics")
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                              "' outside any section");
        const std::string path = section + "." + key;

        if (section == "problem") {
            if (key == "alpha") run.alpha = detail::config_double(path, val);
            else if (key == "T") run.T = detail::config_double(path, val);
            else if (key == "M") run.M = static_cast<int>(detail::config_int(path, val));
            else if (key == "dim") run.dim = static_cast<int>(detail::config_int(path, val));
            else if (key == "x_lo") run.x_lo = detail::config_double(path, val);
            else if (key == "x_hi") run.x_hi = detail::config_double(path, val);
            else if (key == "y_lo") run.y_lo = detail::config_double(path, val);
            else if (key == "y_hi") run.y_hi = detail::config_double(path, val);
            else if (key == "N") run.N = static_cast<int>(detail::config_int(path, val));
            else if (key == "Ny") run.Ny = static_cast<int>(detail::config_int(path, val));
            else if (key == "a11") run.a11 = val;
            else if (key == "a12") run.a12 = val;
            else if (key == "a22") run.a22 = val;
            else if (key == "lambda") run.lambda = detail::config_double(path, val);
            else if (key == "f") run.f = val;
            else if (key == "u0") run.u0 = val;
            else throw ConfigError("unknown key '" + path + "'");
        } else if (section == "output") {
            if (key == "dir") run.out_dir = val;
            else if (key == "seed")
                run.seed = static_cast<std::uint64_t>(detail::config_int(path, val));
            else if (key == "oracle") run.oracle = val;
            else if (key == "snapshots") {
                run.snapshots.clear();
                for (const auto& item : detail::split(val, ','))
                    if (!item.empty()) run.snapshots.push_back(detail::config_double(path, item));
            } else throw ConfigError("unknown key '" + path + "'");
        } else if (section == "study") {
            if (key == "ladder") {
                ladder.clear();
                for (const auto& item : detail::split(val, ',')) {
                    if (item.empty()) continue;
                    const std::size_t colon = item.find(':');
                    if (colon == std::string::npos)
                        throw ConfigError(path + ": rung '" + item + "' must be M:N");
                    const int m = static_cast<int>(
                        detail::config_int(path, detail::trim(item.substr(0, colon))));
                    const int n = static_cast<int>(
                        detail::config_int(path, detail::trim(item.substr(colon + 1))));
                    ladder.emplace_back(m, n);
                }
            } else throw ConfigError("unknown key '" + path + "'");
        } else {  // diagnostics
            if (key == "energy") run.diag_energy = detail::config_bool(path, val);
            else if (key == "weak_form") run.diag_weak_form = detail::config_bool(path, val);
            else if (key == "kernel") run.diag_kernel = detail::config_bool(path, val);
            else throw ConfigError("unknown key '" + path + "'");
        }
    }

    if (ladder.empty()) return run;
    StudyConfig study;
    study.base = run;
    study.ladder = std::move(ladder);
    return study;
}

/// Validates the numeric ranges and expression fields of a RunConfig.
inline void validate_config(const RunConfig& c) {
    if (!(c.alpha > 0.0 && c.alpha < 1.0))
        throw ConfigError("problem.alpha must lie strictly in (0,1), got " +
                          std::to_string(c.alpha));
    if (!(c.T > 0.0)) throw ConfigError("problem.T must be positive");
    if (c.M < 1) throw ConfigError("problem.M must be >= 1");
    if (c.dim != 1 && c.dim != 2) throw ConfigError("problem.dim must be 1 or 2");
    if (!(c.x_hi > c.x_lo)) throw ConfigError("problem.x_hi must exceed problem.x_lo");
    if (c.dim == 2 && !(c.y_hi > c.y_lo))
        throw ConfigError("problem.y_hi must exceed problem.y_lo");
    if (c.N < 2) throw ConfigError("problem.N must be >= 2");
    if (c.dim == 2 && c.ny_effective() < 2) throw ConfigError("problem.Ny must be >= 2");
    if (!(c.lambda > 0.0 && c.lambda < 1.0))
        throw ConfigError("problem.lambda must lie strictly in (0,1)");
    detail::config_expression("problem.a11", c.a11, "t");
    detail::config_expression("problem.a12", c.a12, "t");
    detail::config_expression("problem.a22", c.a22, "t");
    detail::config_expression("problem.u0", c.u0, "t");
    detail::config_expression("problem.f", c.f, "");
    if (c.oracle != "none" && c.oracle != "eigenmode" && c.oracle != "manufactured")
        throw ConfigError("output.oracle must be none, eigenmode, or manufactured");
    if (c.oracle != "none" && c.dim != 1)
        throw ConfigError("output.oracle: oracles are defined on 1D problems only");
    for (double s : c.snapshots)
        if (s < 0.0 || s > c.T)
            throw ConfigError("output.snapshots: time " + std::to_string(s) +
                              " outside [0, T]");
}

inline void validate_config(const StudyConfig& c) {
    validate_config(c.base);
    if (c.ladder.size() < 2) throw ConfigError("study.ladder needs at least 2 rungs");
    for (std::size_t i = 0; i < c.ladder.size(); ++i) {
        if (c.ladder[i].first < 1 || c.ladder[i].second < 2)
            throw ConfigError("study.ladder: rung " + std::to_string(i + 1) + " out of range");
        if (i > 0 && c.ladder[i].first <= c.ladder[i - 1].first)
            throw ConfigError("study.ladder must be strictly increasing in M");
    }
}

inline void validate_config(const ParsedConfig& c) {
    std::visit([](const auto& v) { validate_config(v); }, c);
}

inline ParsedConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ParsedConfig c = parse_config_text(ss.str());
    validate_config(c);
    return c;
}

/// Shipped preset texts. 2/Gamma(2.5) and friends appear as literal
/// constants because the grammar has no gamma function.
inline std::string preset_text(const std::string& name) {
    static const std::map<std::string, std::string> presets{
        {"zero",
         "[problem]\n"
         "alpha = 0.5\nT = 1\nM = 64\nN = 63\n"
         "u0 = 0\nf = 0\n"},
        {"eigenmode",
         "[problem]\n"
         "alpha = 0.5\nT = 1\nM = 256\nN = 255\n"
         "a11 = 1\nlambda = 0.9\n"
         "u0 = sin(pi*x)\nf = 0\n"
         "[output]\noracle = eigenmode\n"},
        {"manufactured",
         "[problem]\n"
         "alpha = 0.5\nT = 1\nM = 64\nN = 255\n"
         "a11 = 1\nlambda = 0.9\n"
         "u0 = sin(pi*x)\n"
         "f = sin(pi*x)*(2/1.3293403881791370*t^1.5 + pi^2*(1+t^2))\n"
         "[output]\noracle = manufactured\n"},
        {"stationary",
         "[problem]\n"
         "alpha = 0.5\nT = 1\nM = 64\nN = 63\n"
         "u0 = x*(1-x)\nf = 2\n"},
        {"aniso2d",
         "[problem]\n"
         "alpha = 0.5\nT = 1\nM = 128\ndim = 2\nN = 63\nNy = 63\n"
         "a11 = 2\na12 = 0.5\na22 = 1\nlambda = 0.5\n"
         "u0 = sin(pi*x)*sin(pi*y)\n"
         "f = sin(pi*x)*sin(pi*y)*(2/1.3293403881791370*t^1.5 + 3*pi^2*(1+t^2))"
         " - pi^2*(1+t^2)*cos(pi*x)*cos(pi*y)\n"}};
    const auto it = presets.find(name);
    if (it == presets.end()) throw ConfigError("unknown preset '" + name + "'");
    return it->second;
}

inline ParsedConfig parse_preset(const std::string& name) {
    ParsedConfig c = parse_config_text(preset_text(name));
    std::visit([&](auto& v) {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, RunConfig>) v.preset = name;
        else v.base.preset = name;
    }, c);
    validate_config(c);
    return c;
}

/// Validated RunConfig -> ProblemSpec (expressions compiled once).
inline ProblemSpec build_problem(const RunConfig& c) {
    validate_config(c);
    const Expression a11 = Expression::parse(c.a11);
    const Expression a12 = Expression::parse(c.a12);
    const Expression a22 = Expression::parse(c.a22);
    const Expression f = Expression::parse(c.f);
    const Expression u0 = Expression::parse(c.u0);

    SpatialMesh mesh = c.dim == 1
                           ? SpatialMesh::interval(c.x_lo, c.x_hi, c.N)
                           : SpatialMesh::rectangle(c.x_lo, c.x_hi, c.y_lo, c.y_hi, c.N,
                                                    c.ny_effective());
    DiffusionField a = DiffusionField::tensor(
        [a11, a12, a22](double x, double y) {
            return std::array<double, 3>{a11(x, y, 0.0), a12(x, y, 0.0), a22(x, y, 0.0)};
        },
        c.lambda);
    return ProblemSpec{FractionalOrder(c.alpha),
                       TimeGrid(c.T, c.M),
                       mesh,
                       a,
                       [f](double x, double y, double t) { return f(x, y, t); },
                       [u0](double x, double y) { return u0(x, y, 0.0); }};
}

/// Exact-solution oracles for the shipped presets. "eigenmode" is
/// E_alpha(-pi^2 t^alpha) sin(pi x) on (0,1); "manufactured" is
/// (1 + t^2) sin(pi x).
inline double oracle_value(const RunConfig& c, double x, double t) {
    constexpr double pi = 3.14159265358979323846;
    if (c.oracle == "eigenmode")
        return mittag_leffler(c.alpha, -pi * pi * std::pow(t, c.alpha)) * std::sin(pi * x);
    if (c.oracle == "manufactured") return (1.0 + t * t) * std::sin(pi * x);
    throw ConfigError("oracle_value: no oracle selected");
}

}  // namespace tfdiff
