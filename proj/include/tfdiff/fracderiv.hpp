#pragma once

// Fractional-calculus primitives: Riemann-Liouville kernels, the L1-type
// weights C_{m,k}, the discrete Caputo operator, and Mittag-Leffler
// evaluation used as the solution oracle.
//
// Gamma values come from the platform lgamma/tgamma (glibc, ~15-16
// significant digits). The Mittag-Leffler Taylor branch accumulates in
// __float128 to keep the alternating-series cancellation under control.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <quadmath.h>

namespace tfdiff {

/// Order of the Caputo derivative, restricted to the strict interval (0,1).
struct FractionalOrder {
    double alpha;

    explicit FractionalOrder(double a) : alpha(a) {
        if (!(a > 0.0) || !(a < 1.0))
            throw std::domain_error("FractionalOrder: alpha must lie strictly in (0,1), got " +
                                    std::to_string(a));
    }
};

/// Uniform time grid on [0,T] with M steps of size h = T/M.
struct TimeGrid {
    double T;
    int M;
    double h;

    TimeGrid(double final_time, int steps)
        : T(final_time), M(steps), h(final_time / steps) {
        if (!(final_time > 0.0)) throw std::domain_error("TimeGrid: T must be positive");
        if (steps < 1) throw std::domain_error("TimeGrid: M must be >= 1");
    }
};

/// Riemann-Liouville kernel g_beta(t) = t^(beta-1) / Gamma(beta).
inline double rl_kernel(double beta, double t) {
    if (!(beta > 0.0)) throw std::domain_error("rl_kernel: beta must be positive");
    if (!(t > 0.0)) throw std::domain_error("rl_kernel: t must be positive");
    return std::pow(t, beta - 1.0) / std::tgamma(beta);
}

/// psi(r) = g_{2-alpha}(r) - g_{2-alpha}(r-1), the kernel increment driving
/// the scheme weights. Positive and nonincreasing for r >= 1.
inline double psi(const FractionalOrder& alpha, double r) {
    if (!(r >= 1.0)) throw std::domain_error("psi: r must be >= 1");
    const double e = 1.0 - alpha.alpha;
    double diff;
    if (r == 1.0) {
        diff = 1.0;
    } else {
        // (r^e - (r-1)^e) via expm1 to avoid cancellation for large r
        diff = std::pow(r - 1.0, e) * std::expm1(e * std::log1p(1.0 / (r - 1.0)));
    }
    return diff / std::tgamma(2.0 - alpha.alpha);
}

/// Scheme weights for a fixed (alpha, M). The weights C_{m,k} depend on k
/// only through m-k (for k >= 1), so the table stores the differences
/// gp(r) = Gamma(2-alpha)*psi(r) = r^(1-alpha) - (r-1)^(1-alpha)
/// and reconstructs any entry in O(1).
class CoefficientTable {
public:
    CoefficientTable(const FractionalOrder& alpha, int M)
        : alpha_(alpha), M_(M) {
        if (M < 1) throw std::domain_error("CoefficientTable: M must be >= 1");
        const double g2ma = std::tgamma(2.0 - alpha.alpha);
        gp_.resize(static_cast<std::size_t>(M) + 1);
        gp_[0] = 0.0;  // unused
        for (int r = 1; r <= M; ++r)
            gp_[static_cast<std::size_t>(r)] = g2ma * psi(alpha, static_cast<double>(r));
    }

    double alpha() const { return alpha_.alpha; }
    int steps() const { return M_; }

    /// psi(r) for r = 1..M.
    double psi_value(int r) const {
        check_range(r, 1, M_, "psi_value: r");
        return gp_[static_cast<std::size_t>(r)] / std::tgamma(2.0 - alpha_.alpha);
    }

    /// C_{m,k}, 1 <= m <= M, 0 <= k <= m-1.
    double weight(int m, int k) const {
        check_range(m, 1, M_, "weight: m");
        check_range(k, 0, m - 1, "weight: k");
        if (k == 0) return gp_[static_cast<std::size_t>(m)];
        return gp_[static_cast<std::size_t>(m - k)] - gp_[static_cast<std::size_t>(m - k + 1)];
    }

    /// Row m as a dense vector [C_{m,0}, ..., C_{m,m-1}].
    std::vector<double> row(int m) const {
        check_range(m, 1, M_, "row: m");
        std::vector<double> r(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) r[static_cast<std::size_t>(k)] = weight(m, k);
        return r;
    }

private:
    static void check_range(int v, int lo, int hi, const char* what) {
        if (v < lo || v > hi)
            throw std::out_of_range(std::string(what) + " out of range: " + std::to_string(v));
    }

    FractionalOrder alpha_;
    int M_;
    std::vector<double> gp_;
};

inline CoefficientTable build_coefficients(const FractionalOrder& alpha, int M) {
    return CoefficientTable(alpha, M);
}

/// Discrete Caputo derivative at t = m*h of the sample sequence
/// u(0), u(h), ..., u(m*h):
///   (1 / (Gamma(2-alpha) h^alpha)) * (u(mh) - sum_k C_{m,k} u(kh)).
/// Exact (to round-off) when the samples come from a function that is
/// piecewise linear on the grid.
inline double discrete_caputo(const CoefficientTable& table, const TimeGrid& grid,
                              std::span<const double> samples, int m) {
    if (m < 1 || m > table.steps() || m > grid.M)
        throw std::out_of_range("discrete_caputo: m out of range");
    if (samples.size() != static_cast<std::size_t>(m) + 1)
        throw std::invalid_argument("discrete_caputo: expected m+1 samples, got " +
                                    std::to_string(samples.size()));
    double acc = 0.0;
    for (int k = 0; k < m; ++k) acc += table.weight(m, k) * samples[static_cast<std::size_t>(k)];
    const double scale = std::tgamma(2.0 - table.alpha()) * std::pow(grid.h, table.alpha());
    return (samples[static_cast<std::size_t>(m)] - acc) / scale;
}

/// Exact Caputo derivative of t^p for p >= 1:
///   d_t^alpha t^p = Gamma(p+1)/Gamma(p+1-alpha) * t^(p-alpha).
inline double caputo_reference(const FractionalOrder& alpha, double t, double p) {
    if (!(p >= 1.0)) throw std::domain_error("caputo_reference: p must be >= 1");
    if (!(t > 0.0)) throw std::domain_error("caputo_reference: t must be positive");
    return std::tgamma(p + 1.0) / std::tgamma(p + 1.0 - alpha.alpha) *
           std::pow(t, p - alpha.alpha);
}

/// Thrown when neither Mittag-Leffler branch can certify the tolerance.
struct AccuracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// Taylor series sum_{n>=0} z^n / Gamma(alpha n + 1) accumulated in quad
// precision; terms built by ratio recurrence. Throws if the series does
// not converge within the term cap.
inline double ml_taylor_quad(double alpha, double z) {
    const __float128 zq = z;
    __float128 term = 1;
    __float128 sum = 1;
    const int cap = 200000;
    for (int n = 0; n < cap; ++n) {
        const __float128 ratio =
            expq(lgammaq(static_cast<__float128>(alpha) * n + 1) -
                 lgammaq(static_cast<__float128>(alpha) * (n + 1) + 1));
        term *= zq * ratio;
        sum += term;
        if (fabsq(term) < static_cast<__float128>(1e-38) * (fabsq(sum) + static_cast<__float128>(1e-300)) && n > 4)
            return static_cast<double>(sum);
    }
    throw AccuracyError("mittag_leffler: Taylor series did not converge");
}

// Largest Taylor term magnitude for argument |z| = x, estimated at the
// stationary index n* with psi0(alpha n + 1) = ln(x)/alpha.
inline double ml_taylor_max_log_term(double alpha, double x) {
    if (x <= 1.0) return 0.0;
    const double nstar = std::max(1.0, (std::pow(x, 1.0 / alpha) - 1.0) / alpha);
    return nstar * std::log(x) - std::lgamma(alpha * nstar + 1.0);
}

// Asymptotic expansion for large negative arguments:
//   E_alpha(-x) ~ sum_{k>=1} (-1)^(k+1) x^(-k) / Gamma(1 - alpha k),
// truncated at the smallest term; 1/Gamma(1-y) evaluated by reflection.
// Returns the sum and the truncation estimate (smallest term magnitude).
inline bool ml_asymptotic(double alpha, double x, double& out, double& err_est) {
    const int cap = 4000;
    long double sum = 0.0L;
    long double min_term = HUGE_VALL;
    long double best_sum = 0.0L;
    const long double lx = std::log(static_cast<long double>(x));
    for (int k = 1; k <= cap; ++k) {
        const long double y = static_cast<long double>(alpha) * k;
        // 1/Gamma(1-y) = Gamma(y) sin(pi y) / pi
        constexpr long double pi_l = 3.141592653589793238462643383279502884L;
        const long double inv_gamma = expl(lgammal(y)) * sinl(pi_l * y) / pi_l;
        const long double term =
            (k % 2 == 1 ? 1.0L : -1.0L) * expl(-k * lx) * inv_gamma;
        const long double mag = fabsl(expl(-k * lx) * expl(lgammal(y)));
        if (mag > 4.0L * min_term && min_term < 1.0L) break;  // divergent tail reached
        sum += term;
        if (mag < min_term && mag > 0.0L) {
            min_term = mag;
            best_sum = sum;
        }
        if (expl(lgammal(y)) > 1e300L) break;
    }
    out = static_cast<double>(best_sum);
    err_est = static_cast<double>(min_term);
    return min_term < HUGE_VALL;
}

}  // namespace detail

/// Mittag-Leffler function E_alpha(z) for real z and alpha in (0,1].
/// Taylor branch (quad-precision accumulation) where the largest series
/// term is benign; asymptotic branch for large negative arguments. Throws
/// AccuracyError when neither branch certifies the tolerance.
inline double mittag_leffler(double alpha, double z) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::domain_error("mittag_leffler: alpha must lie in (0,1]");
    if (z == 0.0) return 1.0;
    if (alpha == 1.0) return std::exp(z);

    if (z > 0.0) {
        // E_alpha(z) ~ (1/alpha) exp(z^(1/alpha)); overflow check first
        if (std::log(z) / alpha > std::log(708.0))
            return HUGE_VAL;
        return detail::ml_taylor_quad(alpha, z);
    }

    const double x = -z;
    const double max_log_term = detail::ml_taylor_max_log_term(alpha, x);
    const double taylor_threshold = std::log(1e16);
    if (max_log_term < taylor_threshold)
        return detail::ml_taylor_quad(alpha, z);

    double asym = 0.0, err = HUGE_VAL;
    if (detail::ml_asymptotic(alpha, x, asym, err)) {
        const double tol = 1e-11 * std::max(std::abs(asym), x >= 50.0 ? 1.0 : 0.0);
        if (err <= std::max(tol, 1e-13)) return asym;
    }
    throw AccuracyError("mittag_leffler: cannot certify tolerance at alpha=" +
                        std::to_string(alpha) + ", z=" + std::to_string(z));
}

}  // namespace tfdiff
