// Command-line front end: solve / study / diagnose / kernel-gap over the
// header-only tfdiff library. All emitted numbers use 17-significant-digit
// round-trip formatting so repeated runs are byte-identical (wall-time
// fields excepted).

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tfdiff/config.hpp"
#include "tfdiff/diagnostics.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace tfdiff;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitCertificate = 4;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CommonOpts {
    std::string config;
    std::string preset;
    std::string out;
    std::int64_t seed = -1;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "path to a config file");
    cmd->add_option("--preset", o.preset, "built-in preset name");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "seed recorded in reports");
    cmd->add_option("--threads", o.threads, "worker thread budget (runs are serial)");
}

ParsedConfig resolve_config(const CommonOpts& o) {
    if (o.config.empty() == o.preset.empty())
        throw ConfigError("give exactly one of --config and --preset");
    ParsedConfig c = o.config.empty() ? parse_preset(o.preset) : parse_config_file(o.config);
    RunConfig& base = std::holds_alternative<RunConfig>(c) ? std::get<RunConfig>(c)
                                                           : std::get<StudyConfig>(c).base;
    if (!o.out.empty()) base.out_dir = o.out;
    if (base.out_dir.empty()) {
        const char* env = std::getenv("TFDIFF_OUT");
        base.out_dir = env && *env ? env : "out";
    }
    if (o.seed >= 0) base.seed = static_cast<std::uint64_t>(o.seed);
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const ordered_json& j) {
    write_text(path, j.dump(2) + "\n");
}

ordered_json parameters_json(const RunConfig& c) {
    ordered_json j;
    j["preset"] = c.preset;
    j["alpha"] = c.alpha;
    j["T"] = c.T;
    j["M"] = c.M;
    j["dim"] = c.dim;
    j["x_lo"] = c.x_lo;
    j["x_hi"] = c.x_hi;
    if (c.dim == 2) {
        j["y_lo"] = c.y_lo;
        j["y_hi"] = c.y_hi;
    }
    j["N"] = c.N;
    if (c.dim == 2) j["Ny"] = c.ny_effective();
    j["a11"] = c.a11;
    j["a12"] = c.a12;
    j["a22"] = c.a22;
    j["lambda"] = c.lambda;
    j["f"] = c.f;
    j["u0"] = c.u0;
    j["oracle"] = c.oracle;
    j["seed"] = c.seed;
    return j;
}

ProgressCallback stderr_progress(int M) {
    const int every = std::max(1, M / 10);
    return [every, M](const ProgressEvent& e) {
        if (e.step % every == 0 || e.step == M)
            std::fprintf(stderr, "step %d/%d residual=%.3e elapsed=%.2fs\n", e.step, M,
                         e.residual, e.seconds);
    };
}

/// Relative max-nodal error at t = T against the configured oracle.
double oracle_final_error(const RunConfig& c, const ProblemSpec& p, const SchemeHistory& h) {
    double num = 0.0, den = 0.0;
    const SpatialField& last = h.fields.back();
    for (int i = 1; i <= p.mesh.nx; ++i) {
        const double ex = oracle_value(c, p.mesh.node_x(i), p.grid.T);
        num = std::max(num, std::abs(last[static_cast<std::size_t>(p.mesh.dof(i))] - ex));
        den = std::max(den, std::abs(ex));
    }
    return den > 0.0 ? num / den : num;
}

int cmd_solve(const RunConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    ProblemSpec p = build_problem(c);
    SchemeHistory h = run(p, stderr_progress(c.M));

    std::vector<double> snaps = c.snapshots;
    if (snaps.empty()) snaps = {0.0, c.T};
    Reconstruction recon{&h, ReconstructionMode::piecewise_linear};

    std::string csv = p.mesh.dim == 1 ? "x,t,u\n" : "x,y,t,u\n";
    for (double t : snaps) {
        if (p.mesh.dim == 1) {
            for (int i = 0; i <= p.mesh.nx + 1; ++i) {
                const int d = p.mesh.dof(i);
                const double u = d < 0 ? 0.0 : recon.evaluate(d, t);
                csv += fmt17(p.mesh.node_x(i)) + "," + fmt17(t) + "," + fmt17(u) + "\n";
            }
        } else {
            for (int j = 0; j <= p.mesh.ny + 1; ++j)
                for (int i = 0; i <= p.mesh.nx + 1; ++i) {
                    const int d = p.mesh.dof(i, j);
                    const double u = d < 0 ? 0.0 : recon.evaluate(d, t);
                    csv += fmt17(p.mesh.node_x(i)) + "," + fmt17(p.mesh.node_y(j)) + "," +
                           fmt17(t) + "," + fmt17(u) + "\n";
                }
        }
    }
    write_text(fs::path(c.out_dir) / "solution.csv", csv);

    double res_max = 0.0, res_sum = 0.0;
    for (double r : h.step_residuals) {
        res_max = std::max(res_max, r);
        res_sum += r;
    }
    ordered_json j;
    j["command"] = "solve";
    j["parameters"] = parameters_json(c);
    j["residual_stats"] = {{"max", res_max},
                           {"mean", h.step_residuals.empty()
                                        ? 0.0
                                        : res_sum / static_cast<double>(h.step_residuals.size())}};
    if (c.oracle != "none") {
        j["oracle"] = {{"name", c.oracle},
                       {"max_final_relative_error", oracle_final_error(c, p, h)}};
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    j["wall_time_seconds"] = dt.count();
    write_json(fs::path(c.out_dir) / "summary.json", j);
    return 0;
}

int cmd_study(const StudyConfig& sc) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig& base = sc.base;

    struct Rung {
        int M, N;
        double error = std::numeric_limits<double>::quiet_NaN();
        double order = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<Rung> rungs;
    std::vector<SpatialField> finals;
    for (const auto& [M, N] : sc.ladder) {
        RunConfig rc = base;
        rc.M = M;
        rc.N = N;
        if (rc.dim == 2) rc.Ny = N;
        ProblemSpec p = build_problem(rc);
        std::fprintf(stderr, "rung M=%d N=%d\n", M, N);
        SchemeHistory h = run(p);
        Rung r{M, N, std::numeric_limits<double>::quiet_NaN(),
               std::numeric_limits<double>::quiet_NaN()};
        if (base.oracle != "none") {
            r.error = oracle_final_error(rc, p, h);
        } else if (!finals.empty() && finals.back().size() == h.fields.back().size()) {
            // self-convergence: max-abs difference of final fields vs the
            // previous rung (requires matching spatial grids)
            double d = 0.0;
            for (std::size_t i = 0; i < finals.back().size(); ++i)
                d = std::max(d, std::abs(h.fields.back()[i] - finals.back()[i]));
            r.error = d;
        }
        finals.push_back(h.fields.back());
        rungs.push_back(r);
    }
    for (std::size_t i = 1; i < rungs.size(); ++i) {
        const double e0 = rungs[i - 1].error, e1 = rungs[i].error;
        if (e0 > 0.0 && e1 > 0.0 && rungs[i].M > rungs[i - 1].M)
            rungs[i].order = std::log(e0 / e1) /
                             std::log(static_cast<double>(rungs[i].M) / rungs[i - 1].M);
    }

    std::string csv = "rung,M,N,error,observed_order\n";
    ordered_json jr = ordered_json::array();
    for (std::size_t i = 0; i < rungs.size(); ++i) {
        csv += std::to_string(i + 1) + "," + std::to_string(rungs[i].M) + "," +
               std::to_string(rungs[i].N) + "," + fmt17(rungs[i].error) + "," +
               fmt17(rungs[i].order) + "\n";
        ordered_json o;
        o["M"] = rungs[i].M;
        o["N"] = rungs[i].N;
        o["error"] = std::isnan(rungs[i].error) ? ordered_json() : ordered_json(rungs[i].error);
        o["observed_order"] =
            std::isnan(rungs[i].order) ? ordered_json() : ordered_json(rungs[i].order);
        jr.push_back(o);
    }
    write_text(fs::path(base.out_dir) / "study.csv", csv);

    ordered_json j;
    j["command"] = "study";
    j["parameters"] = parameters_json(base);
    j["error_metric"] = base.oracle != "none" ? "max_final_relative_error_vs_oracle"
                                              : "max_final_self_difference";
    j["rungs"] = jr;
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    j["wall_time_seconds"] = dt.count();
    write_json(fs::path(base.out_dir) / "study.json", j);
    return 0;
}

/// Residual vectors of the weak form and of the error-term pairing against
/// every nodal hat function at once, for one temporal test. With the lumped
/// mass this is a vector accumulation per quadrature point.
struct HatResiduals {
    std::vector<double> weak_form;  // per node
    std::vector<double> error_term;
};

HatResiduals hat_residuals(const SchemeHistory& h, const KernelApprox& ka,
                           const TemporalTest& eta) {
    const TimeGrid& g = h.problem.grid;
    const int n = h.problem.mesh.dof_count();
    HatResiduals out{std::vector<double>(static_cast<std::size_t>(n), 0.0),
                     std::vector<double>(static_cast<std::size_t>(n), 0.0)};
    Reconstruction recon{&h, ReconstructionMode::piecewise_linear};
    const std::vector<double> mdiag = h.mass.diag();
    std::vector<double> uvec(static_cast<std::size_t>(n)), av(static_cast<std::size_t>(n));
    for (int m = 0; m < g.M; ++m) {
        const double lo = m * g.h;
        const SpatialField& um = h.fields[static_cast<std::size_t>(m)];
        const SpatialField& up = h.fields[static_cast<std::size_t>(m) + 1];
        const SpatialField f_m = h.source_at(lo);
        for (int q = 0; q < 4; ++q) {
            const double t =
                lo + 0.5 * g.h * (1.0 + detail::gauss4_nodes[static_cast<std::size_t>(q)]);
            const double wq =
                0.5 * g.h * detail::gauss4_weights[static_cast<std::size_t>(q)];
            const double ev = eta.eta(t);
            const double ep = eta.eta_prime(t);
            if (ep != 0.0) {
                const SpatialField conv = G_exact(h, t);
                const SpatialField gap = G_gap(h, ka, t);
                for (int i = 0; i < n; ++i) {
                    const double w = wq * ep * mdiag[static_cast<std::size_t>(i)];
                    out.weak_form[static_cast<std::size_t>(i)] -=
                        w * conv[static_cast<std::size_t>(i)];
                    out.error_term[static_cast<std::size_t>(i)] -=
                        w * gap[static_cast<std::size_t>(i)];
                }
            }
            if (ev != 0.0) {
                for (int i = 0; i < n; ++i)
                    uvec[static_cast<std::size_t>(i)] = recon.evaluate(i, t);
                h.stiffness.apply(uvec, av);
                const SpatialField f_t = h.source_at(t);
                const double theta = (t - lo) / g.h;
                for (int i = 0; i < n; ++i)
                    out.weak_form[static_cast<std::size_t>(i)] +=
                        wq * ev *
                        (av[static_cast<std::size_t>(i)] -
                         mdiag[static_cast<std::size_t>(i)] * f_t[static_cast<std::size_t>(i)]);
                for (int i = 0; i < n; ++i)
                    uvec[static_cast<std::size_t>(i)] =
                        theta * (up[static_cast<std::size_t>(i)] - um[static_cast<std::size_t>(i)]);
                h.stiffness.apply(uvec, av);
                for (int i = 0; i < n; ++i)
                    out.error_term[static_cast<std::size_t>(i)] +=
                        wq * ev *
                        (av[static_cast<std::size_t>(i)] -
                         mdiag[static_cast<std::size_t>(i)] *
                             (f_t[static_cast<std::size_t>(i)] - f_m[static_cast<std::size_t>(i)]));
            }
        }
    }
    return out;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

int cmd_diagnose(const RunConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    ProblemSpec p = build_problem(c);
    SchemeHistory h = run(p, stderr_progress(c.M));

    std::vector<std::string> failures;
    ordered_json j;
    j["command"] = "diagnose";
    j["parameters"] = parameters_json(c);
    std::string txt;

    const double scheme_res = verify_scheme_residuals(h);
    j["scheme_residual_max"] = scheme_res;
    if (scheme_res > 1e-8)
        failures.push_back("discrete-equation residual: " + fmt17(scheme_res) + " > 1e-08");
    txt += "scheme residual (max over steps): " + fmt17(scheme_res) + "\n";

    if (c.diag_energy) {
        const EnergyCertificate cert = check_energy_estimate(h);
        double worst_c = HUGE_VAL, worst_s = HUGE_VAL;
        for (const auto& e : cert.coercivity) {
            worst_c = std::min(worst_c, e.slack());
            if (!e.pass)
                failures.push_back("coercivity at m=" + std::to_string(e.m) + ": lhs " +
                                   fmt17(e.lhs) + " < rhs " + fmt17(e.rhs));
        }
        for (const auto& e : cert.summation) {
            worst_s = std::min(worst_s, e.slack());
            if (!e.pass)
                failures.push_back("summation bound at m=" + std::to_string(e.m) + ": lhs " +
                                   fmt17(e.lhs) + " < rhs " + fmt17(e.rhs));
        }
        if (!cert.energy_pass)
            failures.push_back("energy estimate: lhs " + fmt17(cert.lhs) + " > C*data " +
                               fmt17(cert.explicit_constant * cert.rhs_data));
        const L2H1Bound l2h1 = check_l2h1_bound(h);
        if (!l2h1.pass)
            failures.push_back("space-time H1 bound: norms (" + fmt17(l2h1.norm_pc) + ", " +
                               fmt17(l2h1.norm_pl) + ") exceed bound " + fmt17(l2h1.bound));
        j["energy"] = {{"coercivity_min_slack", worst_c},
                       {"summation_min_slack", worst_s},
                       {"lhs", cert.lhs},
                       {"rhs_data", cert.rhs_data},
                       {"ratio", cert.ratio},
                       {"explicit_constant", cert.explicit_constant},
                       {"pass", cert.all_pass()}};
        j["l2h1"] = {{"norm_piecewise_constant", l2h1.norm_pc},
                     {"norm_piecewise_linear", l2h1.norm_pl},
                     {"bound", l2h1.bound},
                     {"pass", l2h1.pass}};
        txt += "energy ratio lhs/data: " + fmt17(cert.ratio) +
               "  (constant " + fmt17(cert.explicit_constant) + ")\n";
        txt += "coercivity min slack: " + fmt17(worst_c) +
               "  summation min slack: " + fmt17(worst_s) + "\n";
        txt += "L2(0,T;H1) norms: pc " + fmt17(l2h1.norm_pc) + "  pl " + fmt17(l2h1.norm_pl) +
               "  bound " + fmt17(l2h1.bound) + "\n";
    }

    KernelApprox ka = build_kernel_approx(p.alpha, p.grid);
    if (c.diag_kernel) {
        const KernelGapReport rep = kernel_gap_sup(ka);
        const double agree = std::abs(rep.sup_gap - rep.closed_form);
        const double tol = 1e-12 * (std::abs(rep.closed_form) + 1.0);
        if (agree > tol)
            failures.push_back("kernel gap: sampled " + fmt17(rep.sup_gap) +
                               " vs closed form " + fmt17(rep.closed_form));
        if (rep.sup_gap > rep.proof_bound + tol)
            failures.push_back("kernel gap: sampled " + fmt17(rep.sup_gap) +
                               " exceeds proof bound " + fmt17(rep.proof_bound));
        j["kernel_gap"] = {{"sup_gap", rep.sup_gap},
                           {"attained_at", rep.attained_at},
                           {"closed_form", rep.closed_form},
                           {"proof_bound", rep.proof_bound}};
        txt += "kernel gap sup: " + fmt17(rep.sup_gap) + "  closed form: " +
               fmt17(rep.closed_form) + "  proof bound: " + fmt17(rep.proof_bound) + "\n";
    }

    if (c.diag_weak_form) {
        // five bump windows x all nodal hat functions (vectorized)
        const std::vector<std::pair<double, double>> windows{
            {0.10, 0.90}, {0.10, 0.50}, {0.50, 0.90}, {0.20, 0.80}, {0.30, 0.70}};
        ordered_json jw = ordered_json::array();
        for (const auto& [s0, s1] : windows) {
            const double t0w = s0 * c.T, t1w = s1 * c.T;
            TemporalTest eta = bump_test(t0w, t1w, c.T);
            ordered_json o;
            o["window"] = {t0w, t1w};
            if (!(eta.margin > p.grid.h)) {
                o["skipped"] = "margin does not exceed h";
            } else {
                const HatResiduals r = hat_residuals(h, ka, eta);
                o["weak_form_max_abs"] = max_abs(r.weak_form);
                o["error_term_max_abs"] = max_abs(r.error_term);
                txt += "weak form, window [" + fmt17(t0w) + ", " + fmt17(t1w) +
                       "]: max |R| = " + fmt17(max_abs(r.weak_form)) +
                       "  max |error term| = " + fmt17(max_abs(r.error_term)) + "\n";
            }
            jw.push_back(o);
        }
        j["weak_form"] = {{"basis", "all nodal hat functions x 5 bump windows"},
                          {"results", jw}};
    }

    j["failures"] = failures;
    j["pass"] = failures.empty();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    j["wall_time_seconds"] = dt.count();
    write_json(fs::path(c.out_dir) / "diagnostics.json", j);
    txt += failures.empty() ? "all certificates pass\n" : "FAILED certificates:\n";
    for (const auto& f : failures) txt += "  " + f + "\n";
    write_text(fs::path(c.out_dir) / "diagnostics.txt", txt);
    if (!failures.empty()) {
        for (const auto& f : failures) std::fprintf(stderr, "certificate failure: %s\n", f.c_str());
        return kExitCertificate;
    }
    return 0;
}

int cmd_kernel_gap(const RunConfig& c) {
    const FractionalOrder alpha(c.alpha);
    const TimeGrid grid(c.T, c.M);
    const KernelGapReport rep = kernel_gap_sup(build_kernel_approx(alpha, grid));
    const KernelGapReport fine = kernel_gap_sup(build_kernel_approx(alpha, TimeGrid(c.T, 2 * c.M)));
    ordered_json j;
    j["command"] = "kernel-gap";
    j["alpha"] = c.alpha;
    j["T"] = c.T;
    j["M"] = c.M;
    j["sup_gap"] = rep.sup_gap;
    j["attained_at"] = rep.attained_at;
    j["closed_form"] = rep.closed_form;
    j["proof_bound"] = rep.proof_bound;
    j["sup_gap_2M"] = fine.sup_gap;
    j["refinement_ratio"] = rep.sup_gap / fine.sup_gap;
    write_json(fs::path(c.out_dir) / "kernel_gap.json", j);
    return 0;
}

RunConfig expect_run(const ParsedConfig& c, const char* cmd) {
    if (!std::holds_alternative<RunConfig>(c))
        throw ConfigError(std::string(cmd) + ": config defines a study ladder; use 'study'");
    return std::get<RunConfig>(c);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-fractional diffusion: solver, refinement studies, certificates"};
    app.require_subcommand(1);
    CommonOpts o;
    CLI::App* solve = app.add_subcommand("solve", "run the scheme and write snapshots");
    CLI::App* study = app.add_subcommand("study", "run a refinement ladder");
    CLI::App* diagnose = app.add_subcommand("diagnose", "run and certify the estimates");
    CLI::App* kernelgap = app.add_subcommand("kernel-gap", "report the kernel approximation gap");
    for (CLI::App* c : {solve, study, diagnose, kernelgap}) add_common(c, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int r = app.exit(e);
        return r == 0 ? 0 : kExitConfig;
    }

    std::string out_dir;
    try {
        const ParsedConfig cfg = resolve_config(o);
        out_dir = std::holds_alternative<RunConfig>(cfg) ? std::get<RunConfig>(cfg).out_dir
                                                         : std::get<StudyConfig>(cfg).base.out_dir;
        fs::create_directories(out_dir);
        if (solve->parsed()) return cmd_solve(expect_run(cfg, "solve"));
        if (diagnose->parsed()) return cmd_diagnose(expect_run(cfg, "diagnose"));
        if (kernelgap->parsed()) return cmd_kernel_gap(expect_run(cfg, "kernel-gap"));
        if (!std::holds_alternative<StudyConfig>(cfg))
            throw ConfigError("study: config has no [study] ladder");
        return cmd_study(std::get<StudyConfig>(cfg));
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        if (!out_dir.empty()) {
            ordered_json j;
            j["error"] = e.what();
            j["exit_code"] = kExitSolver;
            try {
                write_json(fs::path(out_dir) / "error.json", j);
            } catch (...) {
            }
        }
        return kExitSolver;
    }
}
