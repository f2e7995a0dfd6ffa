#pragma once

// Spatial discretization of the divergence-form operator
//   L u = -sum_ij d_i(a_ij(x) d_j u)
// with homogeneous Dirichlet data, on intervals (P1 finite elements with
// midpoint-sampled coefficient) and axis-aligned rectangles (face-flux
// stencil for a11/a22, symmetric cell-centered coupling for a12).
// Also the per-step implicit solve (c*M + A) U = rhs and discrete norms.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tfdiff {

/// Uniform interior-node mesh on an interval or rectangle. Boundary nodes
/// carry no degrees of freedom (homogeneous Dirichlet built in).
struct SpatialMesh {
    int dim = 1;
    double x_lo = 0.0, x_hi = 1.0;
    double y_lo = 0.0, y_hi = 1.0;
    int nx = 0, ny = 0;  // interior nodes per axis
    double dx = 0.0, dy = 0.0;

    static SpatialMesh interval(double lo, double hi, int n) {
        if (!(hi > lo)) throw std::domain_error("SpatialMesh: empty interval");
        if (n < 2) throw std::domain_error("SpatialMesh: need at least 2 interior nodes");
        SpatialMesh m;
        m.dim = 1;
        m.x_lo = lo;
        m.x_hi = hi;
        m.nx = n;
        m.dx = (hi - lo) / (n + 1);
        return m;
    }

    static SpatialMesh rectangle(double xlo, double xhi, double ylo, double yhi,
                                 int nx_, int ny_) {
        if (!(xhi > xlo) || !(yhi > ylo)) throw std::domain_error("SpatialMesh: empty rectangle");
        if (nx_ < 2 || ny_ < 2) throw std::domain_error("SpatialMesh: need at least 2 interior nodes per axis");
        SpatialMesh m;
        m.dim = 2;
        m.x_lo = xlo;
        m.x_hi = xhi;
        m.y_lo = ylo;
        m.y_hi = yhi;
        m.nx = nx_;
        m.ny = ny_;
        m.dx = (xhi - xlo) / (nx_ + 1);
        m.dy = (yhi - ylo) / (ny_ + 1);
        return m;
    }

    int dof_count() const { return dim == 1 ? nx : nx * ny; }

    // node coordinates; (i,j) run over 0..nx+1 x 0..ny+1 including boundary
    double node_x(int i) const { return x_lo + i * dx; }
    double node_y(int j) const { return y_lo + j * dy; }

    /// DOF index of interior node (i,j), i=1..nx, j=1..ny; -1 for boundary.
    int dof(int i, int j = 1) const {
        if (i < 1 || i > nx) return -1;
        if (dim == 2 && (j < 1 || j > ny)) return -1;
        return dim == 1 ? i - 1 : (j - 1) * nx + (i - 1);
    }

    double cell_volume() const { return dim == 1 ? dx : dx * dy; }
};

/// Symmetric diffusion coefficient a(x) with a declared ellipticity
/// constant lambda in (0,1). 1D fields store only a11.
struct DiffusionField {
    std::function<std::array<double, 3>(double, double)> entries;  // {a11, a12, a22}
    double ellipticity_lambda = 0.5;

    static DiffusionField scalar(std::function<double(double)> a, double lambda) {
        DiffusionField f;
        f.entries = [a = std::move(a)](double x, double) {
            const double v = a(x);
            return std::array<double, 3>{v, 0.0, v};
        };
        f.ellipticity_lambda = lambda;
        return f;
    }

    static DiffusionField tensor(std::function<std::array<double, 3>(double, double)> a,
                                 double lambda) {
        DiffusionField f;
        f.entries = std::move(a);
        f.ellipticity_lambda = lambda;
        return f;
    }

    static DiffusionField identity() {
        return tensor([](double, double) { return std::array<double, 3>{1.0, 0.0, 1.0}; },
                      0.999);
    }
};

/// Nodal values over the interior degrees of freedom of a mesh.
struct SpatialField {
    SpatialMesh mesh;
    std::vector<double> values;

    SpatialField() = default;
    explicit SpatialField(const SpatialMesh& m)
        : mesh(m), values(static_cast<std::size_t>(m.dof_count()), 0.0) {}
    SpatialField(const SpatialMesh& m, std::vector<double> v)
        : mesh(m), values(std::move(v)) {
        if (values.size() != static_cast<std::size_t>(m.dof_count()))
            throw std::invalid_argument("SpatialField: value count does not match mesh");
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

struct SolverError : std::runtime_error {
    double achieved_residual;
    SolverError(const std::string& msg, double res)
        : std::runtime_error(msg), achieved_residual(res) {}
};

struct InvalidCoefficients : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Symmetric sparse operator in CSR form over interior DOFs.
class SparseOperator {
public:
    SparseOperator() = default;

    /// Build from symmetric triplets (both (i,j) and (j,i) must be added,
    /// or use add_sym which inserts both).
    class Builder {
    public:
        explicit Builder(int n) : n_(n) {}
        void add(int i, int j, double v) { entries_[{i, j}] += v; }
        void add_sym(int i, int j, double v) {
            entries_[{i, j}] += v;
            if (i != j) entries_[{j, i}] += v;
        }
        SparseOperator finish(bool diagonal_hint = false) const {
            SparseOperator op;
            op.n_ = n_;
            op.row_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
            for (const auto& [ij, v] : entries_) op.row_ptr_[static_cast<std::size_t>(ij.first) + 1]++;
            for (int i = 0; i < n_; ++i)
                op.row_ptr_[static_cast<std::size_t>(i) + 1] += op.row_ptr_[static_cast<std::size_t>(i)];
            op.col_.resize(entries_.size());
            op.val_.resize(entries_.size());
            std::vector<std::size_t> cursor(op.row_ptr_.begin(), op.row_ptr_.end() - 1);
            for (const auto& [ij, v] : entries_) {
                const std::size_t p = cursor[static_cast<std::size_t>(ij.first)]++;
                op.col_[p] = ij.second;
                op.val_[p] = v;
            }
            op.diagonal_ = diagonal_hint;
            op.tridiagonal_ = true;
            for (const auto& [ij, v] : entries_)
                if (std::abs(ij.first - ij.second) > 1) { op.tridiagonal_ = false; break; }
            return op;
        }

    private:
        int n_;
        std::map<std::pair<int, int>, double> entries_;
    };

    int size() const { return n_; }
    bool tridiagonal() const { return tridiagonal_; }
    bool diagonal() const { return diagonal_; }

    void apply(std::span<const double> x, std::span<double> y) const {
        for (int i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (std::size_t p = row_ptr_[static_cast<std::size_t>(i)];
                 p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p)
                acc += val_[p] * x[static_cast<std::size_t>(col_[p])];
            y[static_cast<std::size_t>(i)] = acc;
        }
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> y(static_cast<std::size_t>(n_));
        apply(x, y);
        return y;
    }

    /// u^T A v.
    double inner(std::span<const double> u, std::span<const double> v) const {
        double acc = 0.0;
        for (int i = 0; i < n_; ++i) {
            double row = 0.0;
            for (std::size_t p = row_ptr_[static_cast<std::size_t>(i)];
                 p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p)
                row += val_[p] * v[static_cast<std::size_t>(col_[p])];
            acc += u[static_cast<std::size_t>(i)] * row;
        }
        return acc;
    }

    double entry(int i, int j) const {
        for (std::size_t p = row_ptr_[static_cast<std::size_t>(i)];
             p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p)
            if (col_[p] == j) return val_[p];
        return 0.0;
    }

    std::vector<double> diag() const {
        std::vector<double> d(static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i) d[static_cast<std::size_t>(i)] = entry(i, i);
        return d;
    }

    /// Exact symmetry of the stored pattern and values.
    bool is_symmetric() const {
        for (int i = 0; i < n_; ++i)
            for (std::size_t p = row_ptr_[static_cast<std::size_t>(i)];
                 p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p)
                if (entry(col_[p], i) != val_[p]) return false;
        return true;
    }

private:
    int n_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<int> col_;
    std::vector<double> val_;
    bool tridiagonal_ = false;
    bool diagonal_ = false;
};

namespace detail {

inline void check_lambda(const std::array<double, 3>& a, double lambda, double x, double y) {
    constexpr double s = 0.70710678118654752440;
    static constexpr std::array<std::array<double, 2>, 4> probes{{
        {1.0, 0.0}, {0.0, 1.0}, {s, s}, {s, -s}}};
    for (const auto& xi : probes) {
        const double q = a[0] * xi[0] * xi[0] + 2.0 * a[1] * xi[0] * xi[1] + a[2] * xi[1] * xi[1];
        if (q < lambda * (xi[0] * xi[0] + xi[1] * xi[1]) - 1e-12)
            throw InvalidCoefficients("assemble_stiffness: ellipticity violated at (" +
                                      std::to_string(x) + ", " + std::to_string(y) + ")");
    }
}

}  // namespace detail

/// Stiffness operator for the bilinear form (A u, v) ~ int a_ij d_j u d_i v.
inline SparseOperator assemble_stiffness(const SpatialMesh& mesh, const DiffusionField& a) {
    SparseOperator::Builder b(mesh.dof_count());
    if (mesh.dim == 1) {
        // P1 elements, coefficient sampled at element midpoints
        for (int e = 1; e <= mesh.nx + 1; ++e) {  // element [x_{e-1}, x_e]
            const double xm = mesh.node_x(e) - 0.5 * mesh.dx;
            const auto av = a.entries(xm, 0.0);
            detail::check_lambda(av, a.ellipticity_lambda, xm, 0.0);
            const double w = av[0] / mesh.dx;
            const int l = mesh.dof(e - 1);
            const int r = mesh.dof(e);
            if (l >= 0) b.add(l, l, w);
            if (r >= 0) b.add(r, r, w);
            if (l >= 0 && r >= 0) b.add_sym(l, r, -w);
        }
    } else {
        const double wx = mesh.dy / mesh.dx;  // x-face weight a11*(du/dx)^2*vol
        const double wy = mesh.dx / mesh.dy;
        // x-faces between (i,j) and (i+1,j)
        for (int j = 1; j <= mesh.ny; ++j)
            for (int i = 0; i <= mesh.nx; ++i) {
                const double xm = mesh.node_x(i) + 0.5 * mesh.dx;
                const double ym = mesh.node_y(j);
                const auto av = a.entries(xm, ym);
                detail::check_lambda(av, a.ellipticity_lambda, xm, ym);
                const double w = av[0] * wx;
                const int l = mesh.dof(i, j);
                const int r = mesh.dof(i + 1, j);
                if (l >= 0) b.add(l, l, w);
                if (r >= 0) b.add(r, r, w);
                if (l >= 0 && r >= 0) b.add_sym(l, r, -w);
            }
        // y-faces between (i,j) and (i,j+1)
        for (int j = 0; j <= mesh.ny; ++j)
            for (int i = 1; i <= mesh.nx; ++i) {
                const double xm = mesh.node_x(i);
                const double ym = mesh.node_y(j) + 0.5 * mesh.dy;
                const auto av = a.entries(xm, ym);
                detail::check_lambda(av, a.ellipticity_lambda, xm, ym);
                const double w = av[2] * wy;
                const int l = mesh.dof(i, j);
                const int r = mesh.dof(i, j + 1);
                if (l >= 0) b.add(l, l, w);
                if (r >= 0) b.add(r, r, w);
                if (l >= 0 && r >= 0) b.add_sym(l, r, -w);
            }
        // mixed term: 2 a12 (Dx u)(Dy u) per cell with bilinear cell gradients
        for (int j = 0; j <= mesh.ny; ++j)
            for (int i = 0; i <= mesh.nx; ++i) {
                const double xm = mesh.node_x(i) + 0.5 * mesh.dx;
                const double ym = mesh.node_y(j) + 0.5 * mesh.dy;
                const auto av = a.entries(xm, ym);
                if (av[1] == 0.0) continue;
                detail::check_lambda(av, a.ellipticity_lambda, xm, ym);
                const double q = 2.0 * av[1] * mesh.dx * mesh.dy;
                // corners: (i,j),(i+1,j),(i,j+1),(i+1,j+1)
                const std::array<int, 4> dofs{mesh.dof(i, j), mesh.dof(i + 1, j),
                                              mesh.dof(i, j + 1), mesh.dof(i + 1, j + 1)};
                const std::array<double, 4> gx{-0.5 / mesh.dx, 0.5 / mesh.dx,
                                               -0.5 / mesh.dx, 0.5 / mesh.dx};
                const std::array<double, 4> gy{-0.5 / mesh.dy, -0.5 / mesh.dy,
                                               0.5 / mesh.dy, 0.5 / mesh.dy};
                for (int p = 0; p < 4; ++p)
                    for (int r = 0; r < 4; ++r) {
                        if (dofs[static_cast<std::size_t>(p)] < 0 ||
                            dofs[static_cast<std::size_t>(r)] < 0)
                            continue;
                        const double v = 0.5 * q *
                                         (gx[static_cast<std::size_t>(p)] * gy[static_cast<std::size_t>(r)] +
                                          gy[static_cast<std::size_t>(p)] * gx[static_cast<std::size_t>(r)]);
                        if (v != 0.0)
                            b.add(dofs[static_cast<std::size_t>(p)],
                                  dofs[static_cast<std::size_t>(r)], v);
                    }
            }
    }
    return b.finish();
}

/// Lumped (diagonal) mass operator: dx (1D) or dx*dy (2D) per DOF.
inline SparseOperator assemble_mass(const SpatialMesh& mesh) {
    SparseOperator::Builder b(mesh.dof_count());
    const double vol = mesh.cell_volume();
    for (int i = 0; i < mesh.dof_count(); ++i) b.add(i, i, vol);
    return b.finish(/*diagonal_hint=*/true);
}

/// Stiffness with a == identity; the discrete H1 seminorm matrix.
inline SparseOperator assemble_identity_stiffness(const SpatialMesh& mesh) {
    return assemble_stiffness(mesh, DiffusionField::identity());
}

namespace detail {

// Thomas algorithm for the tridiagonal system (c*diag(mass) + A) u = rhs.
inline std::vector<double> tridiag_solve(const SparseOperator& A, const std::vector<double>& mdiag,
                                         double c, const std::vector<double>& rhs) {
    const int n = A.size();
    std::vector<double> dl(static_cast<std::size_t>(n), 0.0), d(static_cast<std::size_t>(n), 0.0),
        du(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        d[static_cast<std::size_t>(i)] = c * mdiag[static_cast<std::size_t>(i)] + A.entry(i, i);
        if (i > 0) dl[static_cast<std::size_t>(i)] = A.entry(i, i - 1);
        if (i < n - 1) du[static_cast<std::size_t>(i)] = A.entry(i, i + 1);
    }
    std::vector<double> u(rhs);
    for (int i = 1; i < n; ++i) {
        const double w = dl[static_cast<std::size_t>(i)] / d[static_cast<std::size_t>(i) - 1];
        d[static_cast<std::size_t>(i)] -= w * du[static_cast<std::size_t>(i) - 1];
        u[static_cast<std::size_t>(i)] -= w * u[static_cast<std::size_t>(i) - 1];
    }
    u[static_cast<std::size_t>(n) - 1] /= d[static_cast<std::size_t>(n) - 1];
    for (int i = n - 2; i >= 0; --i)
        u[static_cast<std::size_t>(i)] =
            (u[static_cast<std::size_t>(i)] - du[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i) + 1]) /
            d[static_cast<std::size_t>(i)];
    return u;
}

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace detail

/// Solves (c*M + A) U = rhs to relative residual 1e-10. Tridiagonal systems
/// (1D) go through a direct banded solve; otherwise Jacobi-preconditioned CG
/// with iteration cap 20*N.
inline SpatialField solve_step_system(const SparseOperator& A, const SparseOperator& Mop,
                                      double c, const SpatialField& rhs) {
    if (!(c > 0.0)) throw std::domain_error("solve_step_system: c must be positive");
    if (A.size() != Mop.size() || A.size() != static_cast<int>(rhs.size()))
        throw std::invalid_argument("solve_step_system: operator/field size mismatch");
    const int n = A.size();
    const std::vector<double> mdiag = Mop.diag();
    const double rhs_norm = detail::norm2(rhs.values);
    const double tol = 1e-10 * (rhs_norm > 0.0 ? rhs_norm : 1.0);

    auto apply_system = [&](const std::vector<double>& x, std::vector<double>& y) {
        A.apply(x, y);
        if (Mop.diagonal()) {
            for (int i = 0; i < n; ++i)
                y[static_cast<std::size_t>(i)] += c * mdiag[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        } else {
            std::vector<double> t(static_cast<std::size_t>(n));
            Mop.apply(x, t);
            for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] += c * t[static_cast<std::size_t>(i)];
        }
    };

    SpatialField out(rhs.mesh);
    if (rhs_norm == 0.0) return out;

    if (A.tridiagonal() && Mop.diagonal()) {
        out.values = detail::tridiag_solve(A, mdiag, c, rhs.values);
        return out;
    }

    // PCG with Jacobi preconditioner
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    std::vector<double> r(rhs.values), z(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n)),
        Ap(static_cast<std::size_t>(n));
    std::vector<double> prec = A.diag();
    for (int i = 0; i < n; ++i)
        prec[static_cast<std::size_t>(i)] += c * mdiag[static_cast<std::size_t>(i)];
    auto precondition = [&](const std::vector<double>& in, std::vector<double>& outv) {
        for (int i = 0; i < n; ++i) outv[static_cast<std::size_t>(i)] = in[static_cast<std::size_t>(i)] / prec[static_cast<std::size_t>(i)];
    };
    precondition(r, z);
    p = z;
    double rz = 0.0;
    for (int i = 0; i < n; ++i) rz += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
    const int cap = 20 * n;
    double res = detail::norm2(r);
    for (int it = 0; it < cap && res > tol; ++it) {
        apply_system(p, Ap);
        double pAp = 0.0;
        for (int i = 0; i < n; ++i) pAp += p[static_cast<std::size_t>(i)] * Ap[static_cast<std::size_t>(i)];
        if (!(pAp > 0.0))
            throw SolverError("solve_step_system: operator not positive definite", res);
        const double alpha = rz / pAp;
        for (int i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(i)] -= alpha * Ap[static_cast<std::size_t>(i)];
        }
        precondition(r, z);
        double rz_new = 0.0;
        for (int i = 0; i < n; ++i) rz_new += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i)
            p[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
        res = detail::norm2(r);
    }
    if (res > tol)
        throw SolverError("solve_step_system: CG did not reach tolerance, residual " +
                              std::to_string(res),
                          res);
    out.values = std::move(x);
    return out;
}

/// Discrete L2 norm sqrt(u^T M u) and H1 seminorm sqrt(u^T A_id u), the
/// latter always with identity coefficient.
inline std::pair<double, double> discrete_norms(const SpatialField& u, const SparseOperator& A_id,
                                                const SparseOperator& Mop) {
    if (static_cast<int>(u.size()) != A_id.size() || A_id.size() != Mop.size())
        throw std::invalid_argument("discrete_norms: size mismatch");
    const double l2 = std::sqrt(std::max(0.0, Mop.inner(u.values, u.values)));
    const double h1 = std::sqrt(std::max(0.0, A_id.inner(u.values, u.values)));
    return {l2, h1};
}

}  // namespace tfdiff
