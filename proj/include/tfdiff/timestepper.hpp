#pragma once

// The discrete scheme: boundary-zeroed nodal interpolation of the initial
// datum, the implicit march
//   (c M + A) U_m = M (c sum_k C_{m,k} U_k + f(., mh)),  c = 1/(Gamma(2-a) h^a),
// and the piecewise-constant / piecewise-linear time reconstructions.

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tfdiff/elliptic.hpp"
#include "tfdiff/fracderiv.hpp"

namespace tfdiff {

/// Space-time source f(x, y, t); y is ignored on interval meshes.
using SourceFn = std::function<double(double, double, double)>;
/// Initial datum u0(x, y), required to vanish on the boundary.
using InitialFn = std::function<double(double, double)>;

struct ProblemSpec {
    FractionalOrder alpha;
    TimeGrid grid;
    SpatialMesh mesh;
    DiffusionField a;
    SourceFn f;
    InitialFn u0;
};

struct ProgressEvent {
    int step;
    double residual;  // normalized linear-system residual of the step
    double seconds;   // wall time since the march started
};
using ProgressCallback = std::function<void(const ProgressEvent&)>;

/// Nodal interpolation of u0 with boundary values forced to zero. Rejects
/// data that does not vanish on the boundary.
inline SpatialField approximate_initial(const InitialFn& u0, const SpatialMesh& mesh) {
    auto check_boundary = [&](double x, double y) {
        if (std::abs(u0(x, y)) > 1e-12)
            throw std::invalid_argument("approximate_initial: u0 does not vanish at boundary point (" +
                                        std::to_string(x) + ", " + std::to_string(y) + ")");
    };
    if (mesh.dim == 1) {
        check_boundary(mesh.x_lo, 0.0);
        check_boundary(mesh.x_hi, 0.0);
    } else {
        for (int i = 0; i <= mesh.nx + 1; ++i) {
            check_boundary(mesh.node_x(i), mesh.y_lo);
            check_boundary(mesh.node_x(i), mesh.y_hi);
        }
        for (int j = 0; j <= mesh.ny + 1; ++j) {
            check_boundary(mesh.x_lo, mesh.node_y(j));
            check_boundary(mesh.x_hi, mesh.node_y(j));
        }
    }
    SpatialField out(mesh);
    if (mesh.dim == 1) {
        for (int i = 1; i <= mesh.nx; ++i)
            out[static_cast<std::size_t>(mesh.dof(i))] = u0(mesh.node_x(i), 0.0);
    } else {
        for (int j = 1; j <= mesh.ny; ++j)
            for (int i = 1; i <= mesh.nx; ++i)
                out[static_cast<std::size_t>(mesh.dof(i, j))] = u0(mesh.node_x(i), mesh.node_y(j));
    }
    return out;
}

/// Full scheme output: U_0..U_M plus the assembled operators and weights.
struct SchemeHistory {
    ProblemSpec problem;
    CoefficientTable table;
    SparseOperator stiffness;
    SparseOperator mass;
    SparseOperator grad;  // identity-coefficient stiffness (H1 seminorm)
    std::vector<SpatialField> fields;      // U_0..U_M
    std::vector<double> step_residuals;    // normalized residual per step m=1..M

    double caputo_scale() const {
        return 1.0 / (std::tgamma(2.0 - problem.alpha.alpha) *
                      std::pow(problem.grid.h, problem.alpha.alpha));
    }

    /// Nodal samples of f at time t.
    SpatialField source_at(double t) const {
        SpatialField out(problem.mesh);
        const SpatialMesh& mesh = problem.mesh;
        if (mesh.dim == 1) {
            for (int i = 1; i <= mesh.nx; ++i)
                out[static_cast<std::size_t>(mesh.dof(i))] = problem.f(mesh.node_x(i), 0.0, t);
        } else {
            for (int j = 1; j <= mesh.ny; ++j)
                for (int i = 1; i <= mesh.nx; ++i)
                    out[static_cast<std::size_t>(mesh.dof(i, j))] =
                        problem.f(mesh.node_x(i), mesh.node_y(j), t);
        }
        return out;
    }
};

/// One implicit step: given U_0..U_{m-1} in history.fields, computes U_m.
inline SpatialField advance(const SchemeHistory& history, int m) {
    const int M = history.problem.grid.M;
    if (m < 1 || m > M) throw std::out_of_range("advance: m out of range");
    if (history.fields.size() < static_cast<std::size_t>(m))
        throw std::invalid_argument("advance: history incomplete before step " + std::to_string(m));
    const int n = history.problem.mesh.dof_count();
    const double c = history.caputo_scale();
    const double t_m = static_cast<double>(m) * history.problem.grid.h;

    std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < m; ++k) {
        const double w = history.table.weight(m, k);
        const auto& u = history.fields[static_cast<std::size_t>(k)].values;
        for (int i = 0; i < n; ++i) acc[static_cast<std::size_t>(i)] += w * u[static_cast<std::size_t>(i)];
    }
    SpatialField f_m = history.source_at(t_m);
    for (int i = 0; i < n; ++i)
        acc[static_cast<std::size_t>(i)] = c * acc[static_cast<std::size_t>(i)] + f_m[static_cast<std::size_t>(i)];
    SpatialField rhs(history.problem.mesh);
    history.mass.apply(acc, rhs.values);
    return solve_step_system(history.stiffness, history.mass, c, rhs);
}

/// Runs the full march; deterministic given the problem.
inline SchemeHistory run(const ProblemSpec& problem, const ProgressCallback& progress = {}) {
    SchemeHistory h{problem,
                    build_coefficients(problem.alpha, problem.grid.M),
                    assemble_stiffness(problem.mesh, problem.a),
                    assemble_mass(problem.mesh),
                    assemble_identity_stiffness(problem.mesh),
                    {},
                    {}};
    h.fields.reserve(static_cast<std::size_t>(problem.grid.M) + 1);
    h.fields.push_back(approximate_initial(problem.u0, problem.mesh));
    const auto t0 = std::chrono::steady_clock::now();
    const int n = problem.mesh.dof_count();
    const double c = h.caputo_scale();
    std::vector<double> work(static_cast<std::size_t>(n));
    for (int m = 1; m <= problem.grid.M; ++m) {
        SpatialField u = advance(h, m);
        // normalized residual ||(cM+A)U - rhs|| / (1 + ||rhs||)
        std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
        for (int k = 0; k < m; ++k) {
            const double w = h.table.weight(m, k);
            const auto& uk = h.fields[static_cast<std::size_t>(k)].values;
            for (int i = 0; i < n; ++i) acc[static_cast<std::size_t>(i)] += w * uk[static_cast<std::size_t>(i)];
        }
        SpatialField f_m = h.source_at(static_cast<double>(m) * problem.grid.h);
        for (int i = 0; i < n; ++i)
            acc[static_cast<std::size_t>(i)] = c * acc[static_cast<std::size_t>(i)] + f_m[static_cast<std::size_t>(i)];
        std::vector<double> rhs(static_cast<std::size_t>(n));
        h.mass.apply(acc, rhs);
        h.stiffness.apply(u.values, work);
        const std::vector<double> mdiag = h.mass.diag();
        double res2 = 0.0, rhs2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = work[static_cast<std::size_t>(i)] +
                             c * mdiag[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)] -
                             rhs[static_cast<std::size_t>(i)];
            res2 += r * r;
            rhs2 += rhs[static_cast<std::size_t>(i)] * rhs[static_cast<std::size_t>(i)];
        }
        const double residual = std::sqrt(res2) / (1.0 + std::sqrt(rhs2));
        h.fields.push_back(std::move(u));
        h.step_residuals.push_back(residual);
        if (progress) {
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
            progress(ProgressEvent{m, residual, dt.count()});
        }
    }
    return h;
}

/// Re-verifies the discrete-equation residual of every stored step;
/// returns the maximum normalized residual.
inline double verify_scheme_residuals(const SchemeHistory& history) {
    const int n = history.problem.mesh.dof_count();
    const double c = history.caputo_scale();
    const std::vector<double> mdiag = history.mass.diag();
    double worst = 0.0;
    std::vector<double> work(static_cast<std::size_t>(n));
    for (int m = 1; m <= history.problem.grid.M; ++m) {
        std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
        for (int k = 0; k < m; ++k) {
            const double w = history.table.weight(m, k);
            const auto& uk = history.fields[static_cast<std::size_t>(k)].values;
            for (int i = 0; i < n; ++i) acc[static_cast<std::size_t>(i)] += w * uk[static_cast<std::size_t>(i)];
        }
        SpatialField f_m = history.source_at(static_cast<double>(m) * history.problem.grid.h);
        for (int i = 0; i < n; ++i)
            acc[static_cast<std::size_t>(i)] = c * acc[static_cast<std::size_t>(i)] + f_m[static_cast<std::size_t>(i)];
        std::vector<double> rhs(static_cast<std::size_t>(n));
        history.mass.apply(acc, rhs);
        const auto& u = history.fields[static_cast<std::size_t>(m)].values;
        history.stiffness.apply(u, work);
        double res2 = 0.0, rhs2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = work[static_cast<std::size_t>(i)] +
                             c * mdiag[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)] -
                             rhs[static_cast<std::size_t>(i)];
            res2 += r * r;
            rhs2 += rhs[static_cast<std::size_t>(i)] * rhs[static_cast<std::size_t>(i)];
        }
        worst = std::max(worst, std::sqrt(res2) / (1.0 + std::sqrt(rhs2)));
    }
    return worst;
}

enum class ReconstructionMode { piecewise_constant, piecewise_linear };

/// Time reconstruction of the scheme iterates: u_c^h (constant on
/// [mh,(m+1)h)) or u^h (linear interpolant). t = T evaluates to U_M in
/// both modes.
struct Reconstruction {
    const SchemeHistory* history;
    ReconstructionMode mode;

    double evaluate(int node, double t) const {
        const TimeGrid& g = history->problem.grid;
        if (t < 0.0 || t > g.T) throw std::out_of_range("Reconstruction: t out of [0,T]");
        int m = static_cast<int>(std::floor(t / g.h));
        if (m > g.M) m = g.M;
        const auto& fields = history->fields;
        if (m == g.M) return fields[static_cast<std::size_t>(m)][static_cast<std::size_t>(node)];
        const double um = fields[static_cast<std::size_t>(m)][static_cast<std::size_t>(node)];
        if (mode == ReconstructionMode::piecewise_constant) return um;
        const double up = fields[static_cast<std::size_t>(m) + 1][static_cast<std::size_t>(node)];
        return um + (up - um) / g.h * (t - m * g.h);
    }
};

/// max_k || U_{k+1} - U_k ||_inf over the whole history.
inline double step_increment_sup(const SchemeHistory& history) {
    double sup = 0.0;
    for (std::size_t k = 0; k + 1 < history.fields.size(); ++k) {
        const auto& a = history.fields[k].values;
        const auto& b = history.fields[k + 1].values;
        for (std::size_t i = 0; i < a.size(); ++i)
            sup = std::max(sup, std::abs(b[i] - a[i]));
    }
    return sup;
}

}  // namespace tfdiff
