#pragma once

// Piecewise-linear under-approximation g^h_{3-alpha} of the kernel
// g_{3-alpha}, the convolution functionals G[u^h] and G^h[u^h], the gap
// report, and the weak pairing of the gap against test functions.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tfdiff/elliptic.hpp"
#include "tfdiff/fracderiv.hpp"
#include "tfdiff/timestepper.hpp"

namespace tfdiff {

/// g^h_{3-alpha}: zero on [0,h], continuous piecewise linear with slope
/// g_{2-alpha}(mh) on (mh,(m+1)h). The gap g_{3-alpha} - g^h_{3-alpha} is
/// nonnegative and nondecreasing.
struct KernelApprox {
    double alpha;
    TimeGrid grid;
    std::vector<double> breakpoints;  // value at t = mh, m = 0..M+1
    std::vector<double> slopes;       // slope on (mh,(m+1)h), m = 0..M

    double value(double t) const {
        if (t < 0.0 || t > grid.T + grid.h * (1.0 + 1e-12))
            throw std::out_of_range("KernelApprox: t out of [0, T+h]");
        if (t <= grid.h) return 0.0;
        int m = static_cast<int>(std::floor(t / grid.h));
        if (m > grid.M) m = grid.M;
        return breakpoints[static_cast<std::size_t>(m)] +
               slopes[static_cast<std::size_t>(m)] * (t - m * grid.h);
    }

    /// Gap l^h(t) = g_{3-alpha}(t) - g^h_{3-alpha}(t); zero at t = 0.
    double gap(double t) const {
        if (t == 0.0) return 0.0;
        return rl_kernel(3.0 - alpha, t) - value(t);
    }
};

inline KernelApprox build_kernel_approx(const FractionalOrder& alpha, const TimeGrid& grid) {
    KernelApprox k{alpha.alpha, grid, {}, {}};
    k.slopes.resize(static_cast<std::size_t>(grid.M) + 1);
    k.breakpoints.resize(static_cast<std::size_t>(grid.M) + 2);
    k.slopes[0] = 0.0;  // g_{2-alpha}(0) = 0 for alpha < 1
    for (int m = 1; m <= grid.M; ++m)
        k.slopes[static_cast<std::size_t>(m)] = rl_kernel(2.0 - alpha.alpha, m * grid.h);
    k.breakpoints[0] = 0.0;
    for (int m = 0; m <= grid.M; ++m)
        k.breakpoints[static_cast<std::size_t>(m) + 1] =
            k.breakpoints[static_cast<std::size_t>(m)] + k.slopes[static_cast<std::size_t>(m)] * grid.h;
    return k;
}

struct KernelGapReport {
    double alpha;
    double T;
    int M;
    double sup_gap;      // sampled: g_{3-alpha}(T) - g^h_{3-alpha}(T)
    double attained_at;  // = T (the gap is nondecreasing)
    double closed_form;  // h^{2-a}/Gamma(3-a) * (M^{2-a} - (2-a) sum k^{1-a})
    double proof_bound;  // (2-a)/Gamma(3-a) * T^{1-a} * h
};

inline KernelGapReport kernel_gap_sup(const KernelApprox& approx) {
    const double a = approx.alpha;
    const TimeGrid& g = approx.grid;
    const double sup = approx.gap(g.T);
    double ksum = 0.0;
    for (int k = 1; k < g.M; ++k) ksum += std::pow(static_cast<double>(k), 1.0 - a);
    const double closed = std::pow(g.h, 2.0 - a) / std::tgamma(3.0 - a) *
                          (std::pow(static_cast<double>(g.M), 2.0 - a) - (2.0 - a) * ksum);
    const double bound = (2.0 - a) / std::tgamma(3.0 - a) * std::pow(g.T, 1.0 - a) * g.h;
    return KernelGapReport{a, g.T, g.M, sup, g.T, closed, bound};
}

/// Smooth temporal test function with value/derivative evaluators,
/// vanishing on [0, margin] and [T - margin, T].
struct TemporalTest {
    std::function<double(double)> eta;
    std::function<double(double)> eta_prime;
    double margin;
};

struct TestPair {
    SpatialField phi;
    TemporalTest eta;
};

/// C^inf bump on (t0,t1): exp(-1/(s(1-s))) scaled to peak 1, zero outside.
inline TemporalTest bump_test(double t0, double t1, double domain_T) {
    if (!(t1 > t0) || t0 < 0.0 || t1 > domain_T)
        throw std::domain_error("bump_test: need 0 <= t0 < t1 <= T");
    auto eta = [t0, t1](double t) {
        if (t <= t0 || t >= t1) return 0.0;
        const double s = (t - t0) / (t1 - t0);
        return std::exp(4.0 - 1.0 / (s * (1.0 - s)));
    };
    auto eta_prime = [t0, t1](double t) {
        if (t <= t0 || t >= t1) return 0.0;
        const double w = t1 - t0;
        const double s = (t - t0) / w;
        const double g = s * (1.0 - s);
        return std::exp(4.0 - 1.0 / g) * ((1.0 - 2.0 * s) / (g * g)) / w;
    };
    const double margin = std::min(t0, domain_T - t1);
    return TemporalTest{eta, eta_prime, margin};
}

namespace detail {

// Increment D_k = (U_{k+1} - U_k)/h accumulated with weight w into out.
inline void add_increment(std::vector<double>& out, const SchemeHistory& history, int k,
                          double w) {
    const auto& a = history.fields[static_cast<std::size_t>(k)].values;
    const auto& b = history.fields[static_cast<std::size_t>(k) + 1].values;
    const double s = w / history.problem.grid.h;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * (b[i] - a[i]);
}

// Shared expansion of the convolution functionals: kernel(t - kh) weights
// against the step increments. kernel must vanish at 0.
template <class Kernel>
SpatialField convolution_expansion(const SchemeHistory& history, double t, Kernel&& kernel) {
    const TimeGrid& g = history.problem.grid;
    if (t < 0.0 || t >= g.T + 1e-15 * g.T)
        throw std::out_of_range("convolution functional: t must lie in [0, T)");
    SpatialField out(history.problem.mesh);
    if (t == 0.0) return out;
    const int m = std::min(static_cast<int>(std::floor(t / g.h)), g.M - 1);
    add_increment(out.values, history, m, kernel(t - m * g.h));
    for (int k = 0; k < m; ++k)
        add_increment(out.values, history, k, kernel(t - k * g.h) - kernel(t - (k + 1) * g.h));
    return out;
}

}  // namespace detail

/// G[u^h](t) = (g_{2-alpha} * du^h/ds)(t), evaluated by the exact
/// closed-form expansion in g_{3-alpha}.
inline SpatialField G_exact(const SchemeHistory& history, double t) {
    const double a = history.problem.alpha.alpha;
    return detail::convolution_expansion(history, t, [a](double s) {
        return s <= 0.0 ? 0.0 : rl_kernel(3.0 - a, s);
    });
}

/// G^h[u^h](t): the same expansion with g^h_{3-alpha} in place of g_{3-alpha}.
inline SpatialField G_approx(const SchemeHistory& history, const KernelApprox& approx, double t) {
    return detail::convolution_expansion(history, t,
                                         [&approx](double s) { return s <= 0.0 ? 0.0 : approx.value(s); });
}

/// (G - G^h)(t) assembled directly from the gap l^h, avoiding the
/// cancellation of subtracting two O(1) fields.
inline SpatialField G_gap(const SchemeHistory& history, const KernelApprox& approx, double t) {
    return detail::convolution_expansion(history, t,
                                         [&approx](double s) { return s <= 0.0 ? 0.0 : approx.gap(s); });
}

/// d_t^alpha u^h(t) at arbitrary t in (0,T): exact convolution of g_{1-alpha}
/// with the piecewise-constant derivative, an explicit sum of g_{2-alpha}
/// differences.
inline SpatialField caputo_of_reconstruction(const SchemeHistory& history, double t) {
    const double a = history.problem.alpha.alpha;
    return detail::convolution_expansion(history, t, [a](double s) {
        return s <= 0.0 ? 0.0 : rl_kernel(2.0 - a, s);
    });
}

namespace detail {

inline constexpr std::array<double, 4> gauss4_nodes{
    -0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
inline constexpr std::array<double, 4> gauss4_weights{
    0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

// Composite 4-point Gauss integration over the step intervals of
// t -> weight(t) * phi^T M field(t), restricted to intervals meeting
// (t_lo, t_hi).
template <class FieldAt>
double time_quadrature(const SchemeHistory& history, const SpatialField& phi, double t_lo,
                       double t_hi, const std::function<double(double)>& weight,
                       FieldAt&& field_at) {
    const TimeGrid& g = history.problem.grid;
    double total = 0.0;
    for (int m = 0; m < g.M; ++m) {
        const double a = m * g.h;
        const double b = a + g.h;
        if (b <= t_lo || a >= t_hi) continue;
        for (int q = 0; q < 4; ++q) {
            const double t = 0.5 * (a + b) + 0.5 * g.h * gauss4_nodes[static_cast<std::size_t>(q)];
            const double w = weight(t);
            if (w == 0.0) continue;
            const SpatialField f = field_at(t);
            total += 0.5 * g.h * gauss4_weights[static_cast<std::size_t>(q)] * w *
                     history.mass.inner(phi.values, f.values);
        }
    }
    return total;
}

}  // namespace detail

/// The kernel-gap weak pairing  int_0^T int (G - G^h) eta phi dx dt,
/// with 4-point Gauss time quadrature per step interval and mass-weighted
/// spatial pairing. Requires the test margin to exceed h.
inline double weak_error_pairing(const SchemeHistory& history, const KernelApprox& approx,
                                 const TestPair& test) {
    const TimeGrid& g = history.problem.grid;
    if (!(test.eta.margin > g.h))
        throw std::invalid_argument("weak_error_pairing: test margin must exceed h");
    return detail::time_quadrature(
        history, test.phi, test.eta.margin - g.h, g.T - test.eta.margin + g.h, test.eta.eta,
        [&](double t) { return G_gap(history, approx, t); });
}

}  // namespace tfdiff
