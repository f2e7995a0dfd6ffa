#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "tfdiff/elliptic.hpp"

using namespace tfdiff;

namespace {
constexpr double pi = 3.14159265358979323846;
}

TEST_CASE("mesh construction and DOF numbering", "[elliptic]") {
    const SpatialMesh m1 = SpatialMesh::interval(0.0, 1.0, 7);
    CHECK(m1.dof_count() == 7);
    CHECK(m1.dx == Catch::Approx(0.125));
    CHECK(m1.dof(0) == -1);
    CHECK(m1.dof(8) == -1);
    CHECK(m1.dof(3) == 2);
    CHECK(m1.node_x(4) == Catch::Approx(0.5));

    const SpatialMesh m2 = SpatialMesh::rectangle(0.0, 1.0, 0.0, 2.0, 3, 7);
    CHECK(m2.dof_count() == 21);
    CHECK(m2.dof(1, 1) == 0);
    CHECK(m2.dof(3, 7) == 20);
    CHECK(m2.dof(0, 1) == -1);
    CHECK(m2.dof(1, 8) == -1);
    CHECK(m2.cell_volume() == Catch::Approx(0.25 * 0.25));

    CHECK_THROWS_AS(SpatialMesh::interval(1.0, 0.0, 5), std::domain_error);
    CHECK_THROWS_AS(SpatialMesh::interval(0.0, 1.0, 1), std::domain_error);
}

TEST_CASE("1D stiffness with unit coefficient", "[elliptic]") {
    const SpatialMesh mesh = SpatialMesh::interval(0.0, 1.0, 9);
    const SparseOperator A = assemble_stiffness(mesh, DiffusionField::identity());
    CHECK(A.tridiagonal());
    CHECK(A.is_symmetric());
    for (int i = 0; i < 9; ++i) {
        CHECK(A.entry(i, i) == Catch::Approx(2.0 / mesh.dx).epsilon(1e-14));
        if (i > 0) CHECK(A.entry(i, i - 1) == Catch::Approx(-1.0 / mesh.dx).epsilon(1e-14));
    }
    // discrete eigenvector sin(pi x): A v = (4/dx) sin^2(pi dx / 2) v
    std::vector<double> v(9), av(9);
    for (int i = 1; i <= 9; ++i)
        v[static_cast<std::size_t>(i - 1)] = std::sin(pi * mesh.node_x(i));
    A.apply(v, av);
    const double lam = 4.0 / mesh.dx * std::pow(std::sin(pi * mesh.dx / 2.0), 2);
    for (int i = 0; i < 9; ++i)
        CHECK(av[static_cast<std::size_t>(i)] ==
              Catch::Approx(lam * v[static_cast<std::size_t>(i)]).margin(1e-12));
}

TEST_CASE("2D identity coefficient gives the 5-point stencil", "[elliptic]") {
    const SpatialMesh mesh = SpatialMesh::rectangle(0.0, 1.0, 0.0, 1.0, 4, 4);
    const SparseOperator A = assemble_stiffness(mesh, DiffusionField::identity());
    CHECK(A.is_symmetric());
    const int c = mesh.dof(2, 2);
    CHECK(A.entry(c, c) ==
          Catch::Approx(2.0 * (mesh.dy / mesh.dx + mesh.dx / mesh.dy)).epsilon(1e-14));
    CHECK(A.entry(c, mesh.dof(3, 2)) == Catch::Approx(-mesh.dy / mesh.dx).epsilon(1e-14));
    CHECK(A.entry(c, mesh.dof(2, 3)) == Catch::Approx(-mesh.dx / mesh.dy).epsilon(1e-14));
    CHECK(A.entry(c, mesh.dof(3, 3)) == 0.0);
}

TEST_CASE("anisotropic 2D stiffness is symmetric positive definite", "[elliptic]") {
    const SpatialMesh mesh = SpatialMesh::rectangle(0.0, 1.0, 0.0, 1.0, 6, 5);
    const DiffusionField a = DiffusionField::tensor(
        [](double, double) { return std::array<double, 3>{2.0, 0.5, 1.0}; }, 0.5);
    const SparseOperator A = assemble_stiffness(mesh, a);
    CHECK(A.is_symmetric());
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(mesh.dof_count()));
        for (auto& x : v) x = dist(rng);
        CHECK(A.inner(v, v) > 0.0);
    }
}

TEST_CASE("declared ellipticity constant is enforced", "[elliptic]") {
    const SpatialMesh mesh = SpatialMesh::rectangle(0.0, 1.0, 0.0, 1.0, 3, 3);
    // indefinite matrix [[1,2],[2,1]]
    const DiffusionField bad = DiffusionField::tensor(
        [](double, double) { return std::array<double, 3>{1.0, 2.0, 1.0}; }, 0.5);
    CHECK_THROWS_AS(assemble_stiffness(mesh, bad), InvalidCoefficients);
    // scalar coefficient below the declared constant
    const SpatialMesh m1 = SpatialMesh::interval(0.0, 1.0, 4);
    const DiffusionField low = DiffusionField::scalar([](double) { return 0.5; }, 0.9);
    CHECK_THROWS_AS(assemble_stiffness(m1, low), InvalidCoefficients);
}

TEST_CASE("lumped mass operator", "[elliptic]") {
    const SpatialMesh mesh = SpatialMesh::interval(0.0, 1.0, 15);
    const SparseOperator M = assemble_mass(mesh);
    CHECK(M.diagonal());
    for (int i = 0; i < 15; ++i) CHECK(M.entry(i, i) == Catch::Approx(mesh.dx).epsilon(1e-15));
}

TEST_CASE("implicit step solve: direct and iterative paths", "[elliptic]") {
    // 1D goes through the banded solve
    {
        const SpatialMesh mesh = SpatialMesh::interval(0.0, 1.0, 31);
        const SparseOperator A = assemble_stiffness(mesh, DiffusionField::identity());
        const SparseOperator M = assemble_mass(mesh);
        SpatialField rhs(mesh);
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = std::sin(0.3 * (1.0 + i));
        const double c = 7.5;
        const SpatialField u = solve_step_system(A, M, c, rhs);
        std::vector<double> au(rhs.size());
        A.apply(u.values, au);
        const std::vector<double> md = M.diag();
        double res = 0.0;
        for (std::size_t i = 0; i < rhs.size(); ++i) {
            const double r = au[i] + c * md[i] * u[i] - rhs[i];
            res += r * r;
        }
        CHECK(std::sqrt(res) < 1e-9);
    }
    // 2D goes through preconditioned CG
    {
        const SpatialMesh mesh = SpatialMesh::rectangle(0.0, 1.0, 0.0, 1.0, 15, 15);
        const DiffusionField a = DiffusionField::tensor(
            [](double, double) { return std::array<double, 3>{2.0, 0.5, 1.0}; }, 0.5);
        const SparseOperator A = assemble_stiffness(mesh, a);
        const SparseOperator M = assemble_mass(mesh);
        SpatialField rhs(mesh);
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = std::cos(0.1 * (1.0 + i));
        const double c = 3.0;
        const SpatialField u = solve_step_system(A, M, c, rhs);
        std::vector<double> au(rhs.size());
        A.apply(u.values, au);
        const std::vector<double> md = M.diag();
        double res = 0.0, rn = 0.0;
        for (std::size_t i = 0; i < rhs.size(); ++i) {
            const double r = au[i] + c * md[i] * u[i] - rhs[i];
            res += r * r;
            rn += rhs[i] * rhs[i];
        }
        CHECK(std::sqrt(res) <= 1e-10 * std::sqrt(rn) * (1.0 + 1e-6));
    }
    // zero right-hand side short-circuits to zero
    {
        const SpatialMesh mesh = SpatialMesh::interval(0.0, 1.0, 8);
        const SparseOperator A = assemble_stiffness(mesh, DiffusionField::identity());
        const SparseOperator M = assemble_mass(mesh);
        const SpatialField u = solve_step_system(A, M, 1.0, SpatialField(mesh));
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] == 0.0);
    }
}

TEST_CASE("discrete norms of the interpolated eigenmode", "[elliptic]") {
    const SpatialMesh mesh = SpatialMesh::interval(0.0, 1.0, 255);
    const SparseOperator A = assemble_identity_stiffness(mesh);
    const SparseOperator M = assemble_mass(mesh);
    SpatialField u(mesh);
    for (int i = 1; i <= mesh.nx; ++i)
        u[static_cast<std::size_t>(mesh.dof(i))] = std::sin(pi * mesh.node_x(i));
    const auto [l2, h1] = discrete_norms(u, A, M);
    CHECK(l2 == Catch::Approx(std::sqrt(0.5)).epsilon(1e-3));
    CHECK(h1 == Catch::Approx(pi * std::sqrt(0.5)).epsilon(1e-3));
}

TEST_CASE("stationary balance: P1 stiffness of x(1-x) equals the constant load",
          "[elliptic]") {
    const SpatialMesh mesh = SpatialMesh::interval(0.0, 1.0, 63);
    const SparseOperator A = assemble_stiffness(mesh, DiffusionField::identity());
    SpatialField u(mesh);
    for (int i = 1; i <= mesh.nx; ++i) {
        const double x = mesh.node_x(i);
        u[static_cast<std::size_t>(mesh.dof(i))] = x * (1.0 - x);
    }
    std::vector<double> au(u.size());
    A.apply(u.values, au);
    for (std::size_t i = 0; i < u.size(); ++i)
        CHECK(au[i] == Catch::Approx(2.0 * mesh.dx).margin(1e-12));
}
