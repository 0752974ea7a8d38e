#include "lvmi/samplers.hpp"

#include <cmath>
#include <limits>

#include "lvmi/special.hpp"

namespace lvmi {

namespace {

// Exact PG(1, c) sampler: alternating-series accept/reject for the
// tilted Jacobi distribution J*(1, z) with z = |c|/2 (Devroye's method as
// adapted by Polson, Scott & Windle); the returned draw is X/4.
constexpr double kPgTrunc = 0.64;

double pg_a_coef(int n, double x) {
    const double np = n + 0.5;
    if (x > kPgTrunc) return M_PI * np * std::exp(-0.5 * np * np * M_PI * M_PI * x);
    return std::pow(2.0 / (M_PI * x), 1.5) * M_PI * np * std::exp(-2.0 * np * np / x);
}

// P(proposal falls in the exponential right-tail component).
double pg_mass_texpon(double z) {
    const double t = kPgTrunc;
    const double fz = M_PI * M_PI * 0.125 + 0.5 * z * z;
    const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
    const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
    const double x0 = std::log(fz) + fz * t;
    const double xb = x0 - z + log_norm_cdf(b);
    const double xa = x0 + z + log_norm_cdf(a);
    const double qdivp = 4.0 / M_PI * (std::exp(xb) + std::exp(xa));
    return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(mu = 1/z, lambda = 1) truncated to (0, t].
double pg_rtigauss(double z, RngStream& rng) {
    const double t = kPgTrunc;
    double x = t + 1.0;
    if (z < 1.0 / t) {  // mu > t, including z = 0
        double alpha = 0.0;
        while (rng.uniform() > alpha) {
            double e1, e2;
            do {
                e1 = rng.exponential();
                e2 = rng.exponential();
            } while (e1 * e1 > 2.0 * e2 / t);
            x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            alpha = std::exp(-0.5 * z * z * x);
        }
    } else {
        const double mu = 1.0 / z;
        while (x > t) {
            const double y = [&] {
                const double n = rng.normal();
                return n * n;
            }();
            const double muy = mu * y;
            x = mu + 0.5 * mu * muy - 0.5 * mu * std::sqrt(4.0 * muy + muy * muy);
            if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
        }
    }
    return x;
}

double sample_pg1(double c, RngStream& rng) {
    const double z = 0.5 * std::abs(c);
    const double fz = M_PI * M_PI * 0.125 + 0.5 * z * z;
    const double p_tail = pg_mass_texpon(z);
    for (;;) {
        double x;
        if (rng.uniform() < p_tail) {
            x = kPgTrunc + rng.exponential() / fz;
        } else {
            x = pg_rtigauss(z, rng);
        }
        double s = pg_a_coef(0, x);
        const double y = rng.uniform() * s;
        bool accept = false;
        for (int n = 1;; ++n) {
            if (n & 1) {
                s -= pg_a_coef(n, x);
                if (y <= s) {
                    accept = true;
                    break;
                }
            } else {
                s += pg_a_coef(n, x);
                if (y > s) break;
            }
        }
        if (accept) return 0.25 * x;
    }
}

}  // namespace

double sample_pg(int b, double c, RngStream& rng) {
    if (b != 1 && b != 2) throw ValidationError("sample_pg: b must be 1 or 2");
    if (!std::isfinite(c)) throw NumericError("sample_pg: non-finite tilt");
    if (b == 1) return sample_pg1(c, rng);
    return sample_pg1(c, rng) + sample_pg1(c, rng);
}

namespace {

// One-sided right-tail sampler for the standard normal restricted to
// (a, b), a >= 0 (Robert 1995, shifted-exponential proposal).
double std_normal_tail(double a, double b, RngStream& rng) {
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
        const double x = a + rng.exponential() / lambda;
        if (x > b) continue;
        const double d = x - lambda;
        if (rng.uniform() <= std::exp(-0.5 * d * d)) return x;
    }
}

}  // namespace

double sample_truncnorm(double mu, double sigma, double lower, double upper, RngStream& rng) {
    if (!(sigma > 0.0)) throw ValidationError("sample_truncnorm: sigma must be positive");
    if (!(lower < upper)) throw ValidationError("sample_truncnorm: lower must be < upper");
    const double a = (lower - mu) / sigma;
    const double b = (upper - mu) / sigma;
    const double qa = std::isinf(a) ? 0.0 : norm_cdf(a);
    const double qb = std::isinf(b) ? 1.0 : norm_cdf(b);
    if (qb - qa > 1e-300) {
        const double u = rng.uniform();
        double p = u * (qb - qa) + qa;
        // Keep the quantile argument inside the open unit interval.
        p = std::min(std::max(p, std::numeric_limits<double>::min()), 1.0 - 1e-16);
        double w = mu + sigma * norm_quantile(p);
        // The quantile can land a rounding error outside (lower, upper].
        return std::min(std::max(w, std::nextafter(lower, upper)), upper);
    }
    // Interval mass underflowed: the interval lies deep in one tail.
    double draw;
    if (a >= 0.0) {
        draw = std_normal_tail(a, b, rng);
    } else {
        draw = -std_normal_tail(-b, -a, rng);
    }
    const double w = mu + sigma * draw;
    return std::min(std::max(w, std::nextafter(lower, upper)), upper);
}

void cholesky_in_place(Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    for (int k = 0; k < n; ++k) {
        double d = a(k, k);
        for (int j = 0; j < k; ++j) d -= a(k, j) * a(k, j);
        if (!(d > 0.0) || !std::isfinite(d))
            throw CholeskyError("cholesky: leading minor " + std::to_string(k + 1) +
                                " not positive definite", k + 1);
        const double lkk = std::sqrt(d);
        a(k, k) = lkk;
        for (int i = k + 1; i < n; ++i) {
            double s = a(i, k);
            for (int j = 0; j < k; ++j) s -= a(i, j) * a(k, j);
            a(i, k) = s / lkk;
        }
    }
    // Zero the strict upper triangle so the factor is usable directly.
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) a(i, j) = 0.0;
}

Eigen::VectorXd sample_mvn_precision(const Eigen::VectorXd& h, const Eigen::MatrixXd& P,
                                     RngStream& rng) {
    Eigen::MatrixXd chol = P;
    Eigen::VectorXd work(h.size());
    Eigen::VectorXd out(h.size());
    sample_mvn_precision_inplace(h, chol, work, out, rng);
    return out;
}

void sample_mvn_precision_inplace(const Eigen::VectorXd& h, Eigen::MatrixXd& chol,
                                  Eigen::VectorXd& work, Eigen::VectorXd& out, RngStream& rng) {
    const int n = static_cast<int>(h.size());
    cholesky_in_place(chol);
    // Mean: solve L w = h, then L^T m = w.
    for (int i = 0; i < n; ++i) {
        double s = h[i];
        for (int j = 0; j < i; ++j) s -= chol(i, j) * work[j];
        work[i] = s / chol(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = work[i];
        for (int j = i + 1; j < n; ++j) s -= chol(j, i) * out[j];
        out[i] = s / chol(i, i);
    }
    // Noise: out += L^{-T} u with u standard normal.
    for (int i = 0; i < n; ++i) work[i] = rng.normal();
    for (int i = n - 1; i >= 0; --i) {
        double s = work[i];
        for (int j = i + 1; j < n; ++j) s -= chol(j, i) * work[j];
        work[i] = s / chol(i, i);
    }
    out += work;
}

}  // namespace lvmi
