#pragma once

// Numerical certification of the discrete energy estimates, the weak-form
// residual against finite test bases, and the error-term pairing.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tfdiff/elliptic.hpp"
#include "tfdiff/fracderiv.hpp"
#include "tfdiff/kernelapprox.hpp"
#include "tfdiff/timestepper.hpp"

namespace tfdiff {

struct LedgerEntry {
    int m = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;

    double slack() const { return lhs - rhs; }
};

/// Coercivity of the discrete Caputo operator (a Schwarz-inequality
/// argument): for each m,
///   ( (1/(G(2-a) h^a)) (U_m - sum C_{m,k} U_k), U_m )_M
///     >= (1/(2 G(2-a) h^a)) ( ||U_m||^2 - sum C_{m,k} ||U_k||^2 ).
/// Holds for arbitrary field sequences, not only scheme output.
inline std::vector<LedgerEntry> check_discrete_coercivity(const std::vector<SpatialField>& fields,
                                                          const CoefficientTable& table,
                                                          const TimeGrid& grid,
                                                          const SparseOperator& mass) {
    const int M = static_cast<int>(fields.size()) - 1;
    const double c = 1.0 / (std::tgamma(2.0 - table.alpha()) * std::pow(grid.h, table.alpha()));
    std::vector<double> sq(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
        sq[k] = mass.inner(fields[k].values, fields[k].values);
    std::vector<LedgerEntry> ledger;
    ledger.reserve(static_cast<std::size_t>(M));
    std::vector<double> comb(fields.empty() ? 0 : fields[0].size());
    for (int m = 1; m <= M; ++m) {
        const auto& um = fields[static_cast<std::size_t>(m)].values;
        comb.assign(um.begin(), um.end());
        double rhs_norms = sq[static_cast<std::size_t>(m)];
        for (int k = 0; k < m; ++k) {
            const double w = table.weight(m, k);
            const auto& uk = fields[static_cast<std::size_t>(k)].values;
            for (std::size_t i = 0; i < comb.size(); ++i) comb[i] -= w * uk[i];
            rhs_norms -= w * sq[static_cast<std::size_t>(k)];
        }
        const double lhs = c * mass.inner(comb, um);
        const double rhs = 0.5 * c * rhs_norms;
        const double scale = c * (std::abs(sq[static_cast<std::size_t>(m)]) + 1.0);
        ledger.push_back(LedgerEntry{m, lhs, rhs, lhs >= rhs - 1e-9 * scale});
    }
    return ledger;
}

inline std::vector<LedgerEntry> check_discrete_coercivity(const SchemeHistory& history) {
    return check_discrete_coercivity(history.fields, history.table, history.problem.grid,
                                     history.mass);
}

/// Summation lower bound: for each m,
///   sum_{n<=m} (1/(G(2-a)h^a)) ( ||U_n||^2 - sum_k C_{n,k}||U_k||^2 )
///     >= (mh)^{-a}/G(1-a) sum_{k=1..m} ||U_k||^2
///        - (mh)^{1-a}/(G(2-a) h) ||U_0||^2.
inline std::vector<LedgerEntry> check_summation_bound(const std::vector<SpatialField>& fields,
                                                      const CoefficientTable& table,
                                                      const TimeGrid& grid,
                                                      const SparseOperator& mass) {
    const int M = static_cast<int>(fields.size()) - 1;
    const double a = table.alpha();
    const double c = 1.0 / (std::tgamma(2.0 - a) * std::pow(grid.h, a));
    std::vector<double> sq(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
        sq[k] = mass.inner(fields[k].values, fields[k].values);
    std::vector<LedgerEntry> ledger;
    ledger.reserve(static_cast<std::size_t>(M));
    double lhs_acc = 0.0;
    double sq_acc = 0.0;
    for (int m = 1; m <= M; ++m) {
        double term = sq[static_cast<std::size_t>(m)];
        for (int k = 0; k < m; ++k) term -= table.weight(m, k) * sq[static_cast<std::size_t>(k)];
        lhs_acc += c * term;
        sq_acc += sq[static_cast<std::size_t>(m)];
        const double t_m = static_cast<double>(m) * grid.h;
        const double rhs = std::pow(t_m, -a) / std::tgamma(1.0 - a) * sq_acc -
                           std::pow(t_m, 1.0 - a) / (std::tgamma(2.0 - a) * grid.h) * sq[0];
        const double scale = c * (sq_acc + sq[0] + 1.0);
        ledger.push_back(LedgerEntry{m, lhs_acc, rhs, lhs_acc >= rhs - 1e-9 * scale});
    }
    return ledger;
}

inline std::vector<LedgerEntry> check_summation_bound(const SchemeHistory& history) {
    return check_summation_bound(history.fields, history.table, history.problem.grid,
                                 history.mass);
}

struct EnergyCertificate {
    std::vector<LedgerEntry> coercivity;
    std::vector<LedgerEntry> summation;
    double lhs = 0.0;             // h (sum ||U_m||^2 + sum ||grad U_m||^2)
    double rhs_data = 0.0;        // ||U_0||^2 + h sum ||f_m||^2
    double ratio = 0.0;           // lhs / rhs_data
    double explicit_constant = 0.0;  // assembled from the proof's epsilon choice
    bool energy_pass = false;
    bool all_pass() const {
        for (const auto& e : coercivity)
            if (!e.pass) return false;
        for (const auto& e : summation)
            if (!e.pass) return false;
        return energy_pass;
    }
};

/// Discrete energy estimate: bounds the scheme's space-time norms by the
/// data norms, with the explicit constant assembled from the proof's
/// choice eps = (1-lambda) T^{-a} / Gamma(1-a).
inline EnergyCertificate check_energy_estimate(const SchemeHistory& history) {
    EnergyCertificate cert;
    cert.coercivity = check_discrete_coercivity(history);
    cert.summation = check_summation_bound(history);

    const double a = history.problem.alpha.alpha;
    const double T = history.problem.grid.T;
    const double h = history.problem.grid.h;
    const double lambda = history.problem.a.ellipticity_lambda;

    double sum_l2 = 0.0, sum_h1 = 0.0, sum_f = 0.0;
    for (int m = 1; m <= history.problem.grid.M; ++m) {
        const auto& u = history.fields[static_cast<std::size_t>(m)].values;
        sum_l2 += history.mass.inner(u, u);
        sum_h1 += history.grad.inner(u, u);
        const SpatialField f_m = history.source_at(m * h);
        sum_f += history.mass.inner(f_m.values, f_m.values);
    }
    const double u0_sq = history.mass.inner(history.fields[0].values, history.fields[0].values);
    cert.lhs = h * (sum_l2 + sum_h1);
    cert.rhs_data = u0_sq + h * sum_f;

    const double eps = (1.0 - lambda) * std::pow(T, -a) / std::tgamma(1.0 - a);
    const double coef_l2 = lambda * std::pow(T, -a) / std::tgamma(1.0 - a);
    const double coef_h1 = 2.0 * lambda;
    const double data_coef = std::max(std::pow(T, 1.0 - a) / std::tgamma(2.0 - a), 1.0 / eps);
    cert.explicit_constant = data_coef / std::min(coef_l2, coef_h1);
    cert.ratio = cert.rhs_data > 0.0 ? cert.lhs / cert.rhs_data : 0.0;
    cert.energy_pass = cert.lhs <= cert.explicit_constant * cert.rhs_data +
                                       1e-9 * (cert.lhs + cert.rhs_data + 1.0);
    return cert;
}

struct L2H1Bound {
    double norm_pc = 0.0;  // || u_c^h ||_{L^2(0,T;H^1)}, exact
    double norm_pl = 0.0;  // || u^h ||_{L^2(0,T;H^1)}, exact interval integrals
    double bound = 0.0;    // C * (data norms)
    bool pass = false;
};

/// Space-time H1 norms of the two reconstructions against the data bound.
/// Both integrals run over [h, T] as in the estimate's derivation.
inline L2H1Bound check_l2h1_bound(const SchemeHistory& history) {
    const TimeGrid& g = history.problem.grid;
    const double h = g.h;
    auto h1sq = [&](const SpatialField& u) {
        return history.mass.inner(u.values, u.values) + history.grad.inner(u.values, u.values);
    };
    auto h1dot = [&](const SpatialField& u, const SpatialField& v) {
        return history.mass.inner(u.values, v.values) + history.grad.inner(u.values, v.values);
    };
    double pc = 0.0, pl = 0.0;
    for (int m = 1; m < g.M; ++m) {
        const SpatialField& um = history.fields[static_cast<std::size_t>(m)];
        const SpatialField& up = history.fields[static_cast<std::size_t>(m) + 1];
        pc += h * h1sq(um);
        // exact: int_0^h ||U_m + (s/h) D||^2 ds, D = U_{m+1} - U_m
        SpatialField d(um.mesh);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = up[i] - um[i];
        pl += h * (h1sq(um) + h1dot(um, d) + h1sq(d) / 3.0);
    }
    L2H1Bound out;
    out.norm_pc = std::sqrt(std::max(0.0, pc));
    out.norm_pl = std::sqrt(std::max(0.0, pl));

    const EnergyCertificate cert = check_energy_estimate(history);
    const double u0 = std::sqrt(history.mass.inner(history.fields[0].values,
                                                   history.fields[0].values));
    double f_l2 = 0.0;
    for (int m = 1; m <= g.M; ++m) {
        const SpatialField f_m = history.source_at(m * h);
        f_l2 += g.h * history.mass.inner(f_m.values, f_m.values);
    }
    out.bound = std::sqrt(2.0 * cert.explicit_constant) * (u0 + std::sqrt(f_l2)) +
                1e-9 * (out.norm_pc + out.norm_pl + 1.0);
    out.pass = out.norm_pc <= out.bound && out.norm_pl <= out.bound;
    return out;
}

struct WeakFormResidualReport {
    std::vector<double> residuals;  // one per test pair
    std::string basis_description;
};

/// Residual of the distributional weak form:
///   R = -int int (g_{1-a} * (u^h - U_0)) eta' phi
///       + int int a grad u^h . grad phi eta  -  int int f phi eta.
/// The temporal convolution term equals G[u^h] exactly for the
/// piecewise-linear reconstruction. The per-time fields (convolution,
/// reconstruction, source) are computed once per quadrature point and
/// shared across all test pairs.
inline WeakFormResidualReport weak_form_residual(const SchemeHistory& history,
                                                 const std::vector<TestPair>& tests) {
    const TimeGrid& g = history.problem.grid;
    for (const auto& t : tests)
        if (!(t.eta.margin > g.h))
            throw std::invalid_argument("weak_form_residual: test margin must exceed h");

    const int n = history.problem.mesh.dof_count();
    std::vector<std::vector<double>> aphi(tests.size(),
                                          std::vector<double>(static_cast<std::size_t>(n)));
    for (std::size_t i = 0; i < tests.size(); ++i)
        history.stiffness.apply(tests[i].phi.values, aphi[i]);

    Reconstruction recon{&history, ReconstructionMode::piecewise_linear};
    std::vector<double> residuals(tests.size(), 0.0);
    std::vector<double> eta_v(tests.size()), etap_v(tests.size());
    std::vector<double> uvec(static_cast<std::size_t>(n));
    for (int m = 0; m < g.M; ++m) {
        const double lo = m * g.h;
        for (int q = 0; q < 4; ++q) {
            const double t = lo + 0.5 * g.h * (1.0 + detail::gauss4_nodes[static_cast<std::size_t>(q)]);
            const double wq = 0.5 * g.h * detail::gauss4_weights[static_cast<std::size_t>(q)];
            bool any_eta = false, any_etap = false;
            for (std::size_t i = 0; i < tests.size(); ++i) {
                eta_v[i] = tests[i].eta.eta(t);
                etap_v[i] = tests[i].eta.eta_prime(t);
                any_eta = any_eta || eta_v[i] != 0.0;
                any_etap = any_etap || etap_v[i] != 0.0;
            }
            if (any_etap) {
                const SpatialField conv = G_exact(history, t);
                for (std::size_t i = 0; i < tests.size(); ++i)
                    if (etap_v[i] != 0.0)
                        residuals[i] -= wq * etap_v[i] *
                                        history.mass.inner(tests[i].phi.values, conv.values);
            }
            if (any_eta) {
                for (int j = 0; j < n; ++j)
                    uvec[static_cast<std::size_t>(j)] = recon.evaluate(j, t);
                const SpatialField f_t = history.source_at(t);
                for (std::size_t i = 0; i < tests.size(); ++i) {
                    if (eta_v[i] == 0.0) continue;
                    double dot = 0.0;
                    for (int j = 0; j < n; ++j)
                        dot += aphi[i][static_cast<std::size_t>(j)] * uvec[static_cast<std::size_t>(j)];
                    residuals[i] += wq * eta_v[i] *
                                    (dot - history.mass.inner(tests[i].phi.values, f_t.values));
                }
            }
        }
    }
    WeakFormResidualReport report;
    report.residuals = std::move(residuals);
    report.basis_description = "nodal spatial tests x smooth bump temporal tests";
    return report;
}

inline double weak_form_residual_single(const SchemeHistory& history, const TestPair& test) {
    return weak_form_residual(history, {test}).residuals[0];
}

/// Pairing of the scheme's error term e^h against a test pair, assembled
/// as I1 + I2 + I3:
///   I1: the Caputo mismatch, integrated by parts through the kernel gap,
///   I2: stiffness pairing of u^h(t) - u^h(mh),
///   I3: direct quadrature of f(t) - f(mh).
inline std::vector<double> error_term_pairing(const SchemeHistory& history,
                                              const KernelApprox& approx,
                                              const std::vector<TestPair>& tests) {
    const TimeGrid& g = history.problem.grid;
    for (const auto& t : tests)
        if (!(t.eta.margin > g.h))
            throw std::invalid_argument("error_term_pairing: test margin must exceed h");

    const int n = history.problem.mesh.dof_count();
    std::vector<std::vector<double>> aphi(tests.size(),
                                          std::vector<double>(static_cast<std::size_t>(n)));
    for (std::size_t i = 0; i < tests.size(); ++i)
        history.stiffness.apply(tests[i].phi.values, aphi[i]);

    std::vector<double> totals(tests.size(), 0.0);
    std::vector<double> eta_v(tests.size()), etap_v(tests.size());
    for (int m = 0; m < g.M; ++m) {
        const double lo = m * g.h;
        const SpatialField& um = history.fields[static_cast<std::size_t>(m)];
        const SpatialField& up = history.fields[static_cast<std::size_t>(m) + 1];
        const SpatialField f_m = history.source_at(lo);
        for (int q = 0; q < 4; ++q) {
            const double t = lo + 0.5 * g.h * (1.0 + detail::gauss4_nodes[static_cast<std::size_t>(q)]);
            const double wq = 0.5 * g.h * detail::gauss4_weights[static_cast<std::size_t>(q)];
            bool any_eta = false, any_etap = false;
            for (std::size_t i = 0; i < tests.size(); ++i) {
                eta_v[i] = tests[i].eta.eta(t);
                etap_v[i] = tests[i].eta.eta_prime(t);
                any_eta = any_eta || eta_v[i] != 0.0;
                any_etap = any_etap || etap_v[i] != 0.0;
            }
            // I1 = int int d/dt(G - G^h) phi eta = -int int (G - G^h) phi eta'
            if (any_etap) {
                const SpatialField gap = G_gap(history, approx, t);
                for (std::size_t i = 0; i < tests.size(); ++i)
                    if (etap_v[i] != 0.0)
                        totals[i] -= wq * etap_v[i] *
                                     history.mass.inner(tests[i].phi.values, gap.values);
            }
            if (any_eta) {
                const double theta = (t - lo) / g.h;
                SpatialField f_diff = history.source_at(t);
                for (int j = 0; j < n; ++j)
                    f_diff[static_cast<std::size_t>(j)] -= f_m[static_cast<std::size_t>(j)];
                for (std::size_t i = 0; i < tests.size(); ++i) {
                    if (eta_v[i] == 0.0) continue;
                    double dot = 0.0;
                    for (int j = 0; j < n; ++j)
                        dot += aphi[i][static_cast<std::size_t>(j)] * theta *
                               (up[static_cast<std::size_t>(j)] - um[static_cast<std::size_t>(j)]);
                    totals[i] += wq * eta_v[i] *
                                 (dot - history.mass.inner(tests[i].phi.values, f_diff.values));
                }
            }
        }
    }
    return totals;
}

inline double error_term_pairing_single(const SchemeHistory& history, const KernelApprox& approx,
                                        const TestPair& test) {
    return error_term_pairing(history, approx, {test})[0];
}

}  // namespace tfdiff
