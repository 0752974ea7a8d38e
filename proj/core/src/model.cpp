#include "lvmi/model.hpp"

#include <cmath>

#include "lvmi/special.hpp"

namespace lvmi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kProbFloor = 1e-300;

// Cumulative GRM probability P(y >= k | u) = sigmoid(u - a_k), with the
// conventions a_0 = -inf, a_{M+1} = +inf.
inline double cum_prob(const Eigen::VectorXd& thr, int k, double u) {
    const int M = static_cast<int>(thr.size());
    if (k <= 0) return 1.0;
    if (k > M) return 0.0;
    return sigmoid(u - thr[k - 1]);
}

inline double check_ordinal_support(const VariableSpec& v, double y_val) {
    const double r = std::round(y_val);
    if (r != y_val || r < 0.0 || r > v.n_categories - 1)
        throw ValidationError("ordinal value " + std::to_string(y_val) +
                              " outside categories 0.." + std::to_string(v.n_categories - 1));
    return r;
}

inline int check_binary_support(double y_val) {
    if (y_val != 0.0 && y_val != 1.0)
        throw ValidationError("binary value must be 0 or 1, got " + std::to_string(y_val));
    return static_cast<int>(y_val);
}

}  // namespace

double ordinal_category_prob(const Psi& psi, int j, int category, double linpred) {
    const auto& thr = psi.thresholds[j];
    return cum_prob(thr, category, linpred) - cum_prob(thr, category + 1, linpred);
}

double measurement_logprob(const Psi& psi, int j, double y_val, const Eigen::VectorXd& eta) {
    const auto& v = psi.spec.variables[j];
    const double u = (v.kind == VarKind::Ordinal ? 0.0 : psi.alpha0[j]) +
                     psi.alpha.row(j).dot(eta);
    switch (v.kind) {
        case VarKind::Continuous: {
            const double r = (y_val - u) / psi.sigma[j];
            return -0.5 * kLog2Pi - std::log(psi.sigma[j]) - 0.5 * r * r;
        }
        case VarKind::Binary: {
            const int y = check_binary_support(y_val);
            return y ? log_sigmoid(u) : log_sigmoid(-u);
        }
        case VarKind::Ordinal: {
            const int y = static_cast<int>(check_ordinal_support(v, y_val));
            const int M = v.n_thresholds();
            if (y == 0) return log_sigmoid(psi.thresholds[j][0] - u);
            if (y == M) return log_sigmoid(u - psi.thresholds[j][M - 1]);
            const double p = ordinal_category_prob(psi, j, y, u);
            return std::log(std::max(p, kProbFloor));
        }
    }
    return 0.0;
}

double missingness_logprob(const Psi& psi, int j, int z_val, const Eigen::VectorXd& xi) {
    if (!psi.spec.models_missingness())
        throw ValidationError("missingness_logprob: model has K2 = 0");
    if (z_val != 0 && z_val != 1)
        throw ValidationError("missingness indicator must be 0 or 1");
    const double u = psi.gamma0[j] + psi.gamma.row(j).dot(xi);
    return z_val ? log_sigmoid(u) : log_sigmoid(-u);
}

double latent_prior_logpdf(const Psi& psi, const Eigen::VectorXd& eta,
                           const Eigen::VectorXd& xi, const Eigen::VectorXd& x) {
    const ModelSpec& spec = psi.spec;
    Eigen::VectorXd r_eta = eta;
    if (spec.p > 0) r_eta -= psi.beta * x;
    double lp = -0.5 * spec.K1 * kLog2Pi - 0.5 * r_eta.squaredNorm();
    if (spec.models_missingness()) {
        Eigen::VectorXd r_xi = xi - psi.kappa * eta;
        if (spec.p > 0) r_xi -= psi.zeta * x;
        lp += -0.5 * spec.K2 * kLog2Pi - 0.5 * r_xi.squaredNorm();
    }
    return lp;
}

double complete_loglik(const Psi& psi, const UnitState& unit) {
    const ModelSpec& spec = psi.spec;
    double ll = latent_prior_logpdf(psi, unit.eta, unit.xi, unit.x);
    for (int j = 0; j < spec.J(); ++j) {
        ll += measurement_logprob(psi, j, unit.y[j], unit.eta);
        if (spec.models_missingness()) ll += missingness_logprob(psi, j, unit.z[j], unit.xi);
    }
    return ll;
}

Eigen::VectorXd complete_score(const Psi& psi, const UnitState& unit, const ParamLayout& layout) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.dim());
    add_complete_score(psi, unit, layout, g);
    return g;
}

void add_complete_score(const Psi& psi, const UnitState& unit, const ParamLayout& layout,
                        Eigen::VectorXd& out) {
    const ModelSpec& spec = psi.spec;
    const Eigen::VectorXd& eta = unit.eta;
    const Eigen::VectorXd& xi = unit.xi;

    for (int j = 0; j < spec.J(); ++j) {
        const auto& v = spec.variables[j];
        const int nfree = spec.free_alpha_count(j);
        switch (v.kind) {
            case VarKind::Continuous: {
                const double sig = psi.sigma[j];
                const double r = unit.y[j] - psi.alpha0[j] - psi.alpha.row(j).dot(eta);
                const double du = r / (sig * sig);
                out[layout.intercept_index(j)] += du;
                for (int k = 0; k < nfree; ++k) out[layout.loading_index(j, k)] += du * eta[k];
                out[layout.sigma_index(j)] += -1.0 / sig + r * r / (sig * sig * sig);
                break;
            }
            case VarKind::Binary: {
                const double u = psi.alpha0[j] + psi.alpha.row(j).dot(eta);
                const double du = unit.y[j] - sigmoid(u);
                out[layout.intercept_index(j)] += du;
                for (int k = 0; k < nfree; ++k) out[layout.loading_index(j, k)] += du * eta[k];
                break;
            }
            case VarKind::Ordinal: {
                const auto& thr = psi.thresholds[j];
                const int y = static_cast<int>(check_ordinal_support(v, unit.y[j]));
                const int M = v.n_thresholds();
                const double u = psi.alpha.row(j).dot(eta);
                const double s_lo = cum_prob(thr, y, u);
                const double s_hi = cum_prob(thr, y + 1, u);
                const double p = std::max(s_lo - s_hi, kProbFloor);
                const double d_lo = (y >= 1) ? s_lo * (1.0 - s_lo) : 0.0;
                const double d_hi = (y + 1 <= M) ? s_hi * (1.0 - s_hi) : 0.0;
                const double du = (d_lo - d_hi) / p;
                if (y >= 1) out[layout.threshold_index(j, y - 1)] += -d_lo / p;
                if (y + 1 <= M) out[layout.threshold_index(j, y)] += d_hi / p;
                for (int k = 0; k < nfree; ++k) out[layout.loading_index(j, k)] += du * eta[k];
                break;
            }
        }
        if (spec.models_missingness()) {
            const double u = psi.gamma0[j] + psi.gamma.row(j).dot(xi);
            const double du = static_cast<double>(unit.z[j]) - sigmoid(u);
            out[layout.gamma0_index(j)] += du;
            for (int k = 0; k < spec.free_gamma_count(j); ++k)
                out[layout.gamma_index(j, k)] += du * xi[k];
        }
    }

    if (spec.p > 0) {
        const Eigen::VectorXd r_eta = eta - psi.beta * unit.x;
        for (int l = 0; l < spec.p; ++l)
            for (int k = 0; k < spec.K1; ++k)
                out[layout.beta_index(k, l)] += r_eta[k] * unit.x[l];
    }
    if (spec.models_missingness()) {
        Eigen::VectorXd r_xi = xi - psi.kappa * eta;
        if (spec.p > 0) r_xi -= psi.zeta * unit.x;
        for (int l = 0; l < spec.p; ++l)
            for (int k = 0; k < spec.K2; ++k)
                out[layout.zeta_index(k, l)] += r_xi[k] * unit.x[l];
        if (layout.has_kappa_block())
            for (int l = 0; l < spec.K1; ++l)
                for (int k = 0; k < spec.K2; ++k)
                    out[layout.kappa_index(k, l)] += r_xi[k] * eta[l];
    }
}

Eigen::MatrixXd complete_hessian(const Psi& psi, const UnitState& unit,
                                 const ParamLayout& layout) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(layout.dim(), layout.dim());
    add_complete_hessian(psi, unit, layout, h);
    return h;
}

namespace {

// Writes h(a,b) and h(b,a); diagonal entries written once.
inline void sym_add(Eigen::MatrixXd& h, int a, int b, double value) {
    h(a, b) += value;
    if (a != b) h(b, a) += value;
}

}  // namespace

void add_complete_hessian(const Psi& psi, const UnitState& unit, const ParamLayout& layout,
                          Eigen::MatrixXd& out) {
    const ModelSpec& spec = psi.spec;
    const Eigen::VectorXd& eta = unit.eta;
    const Eigen::VectorXd& xi = unit.xi;

    for (int j = 0; j < spec.J(); ++j) {
        const auto& v = spec.variables[j];
        const int nfree = spec.free_alpha_count(j);
        switch (v.kind) {
            case VarKind::Continuous: {
                const double sig = psi.sigma[j];
                const double s2 = sig * sig;
                const double r = unit.y[j] - psi.alpha0[j] - psi.alpha.row(j).dot(eta);
                const int i0 = layout.intercept_index(j);
                const int is = layout.sigma_index(j);
                sym_add(out, i0, i0, -1.0 / s2);
                for (int k = 0; k < nfree; ++k) {
                    const int ik = layout.loading_index(j, k);
                    sym_add(out, i0, ik, -eta[k] / s2);
                    for (int l = 0; l <= k; ++l)
                        sym_add(out, ik, layout.loading_index(j, l), -eta[k] * eta[l] / s2);
                }
                sym_add(out, i0, is, -2.0 * r / (s2 * sig));
                for (int k = 0; k < nfree; ++k)
                    sym_add(out, layout.loading_index(j, k), is, -2.0 * r * eta[k] / (s2 * sig));
                sym_add(out, is, is, 1.0 / s2 - 3.0 * r * r / (s2 * s2));
                break;
            }
            case VarKind::Binary: {
                const double u = psi.alpha0[j] + psi.alpha.row(j).dot(eta);
                const double s = sigmoid(u);
                const double w = -s * (1.0 - s);
                const int i0 = layout.intercept_index(j);
                sym_add(out, i0, i0, w);
                for (int k = 0; k < nfree; ++k) {
                    const int ik = layout.loading_index(j, k);
                    sym_add(out, i0, ik, w * eta[k]);
                    for (int l = 0; l <= k; ++l)
                        sym_add(out, ik, layout.loading_index(j, l), w * eta[k] * eta[l]);
                }
                break;
            }
            case VarKind::Ordinal: {
                const auto& thr = psi.thresholds[j];
                const int y = static_cast<int>(check_ordinal_support(v, unit.y[j]));
                const int M = v.n_thresholds();
                const double u = psi.alpha.row(j).dot(eta);
                const double s_lo = cum_prob(thr, y, u);
                const double s_hi = cum_prob(thr, y + 1, u);
                const double p = std::max(s_lo - s_hi, kProbFloor);
                const bool has_lo = y >= 1;
                const bool has_hi = y + 1 <= M;
                const double d_lo = has_lo ? s_lo * (1.0 - s_lo) : 0.0;
                const double d_hi = has_hi ? s_hi * (1.0 - s_hi) : 0.0;
                const double dd_lo = has_lo ? d_lo * (1.0 - 2.0 * s_lo) : 0.0;
                const double dd_hi = has_hi ? d_hi * (1.0 - 2.0 * s_hi) : 0.0;
                // First and second partials of p in coordinates
                // (u, a_lo = a_y, a_hi = a_{y+1}).
                const double pu = d_lo - d_hi;
                const double p_lo = -d_lo;
                const double p_hi = d_hi;
                const double puu = dd_lo - dd_hi;
                const double pu_lo = -dd_lo;
                const double pu_hi = dd_hi;
                const double p_lolo = dd_lo;
                const double p_hihi = -dd_hi;
                // d^2 log p = (d^2 p)/p - (dp dp^T)/p^2
                const double huu = puu / p - pu * pu / (p * p);
                const double hu_lo = pu_lo / p - pu * p_lo / (p * p);
                const double hu_hi = pu_hi / p - pu * p_hi / (p * p);
                const double h_lolo = p_lolo / p - p_lo * p_lo / (p * p);
                const double h_hihi = p_hihi / p - p_hi * p_hi / (p * p);
                const double h_lohi = -p_lo * p_hi / (p * p);
                const int ilo = has_lo ? layout.threshold_index(j, y - 1) : -1;
                const int ihi = has_hi ? layout.threshold_index(j, y) : -1;
                if (has_lo) sym_add(out, ilo, ilo, h_lolo);
                if (has_hi) sym_add(out, ihi, ihi, h_hihi);
                if (has_lo && has_hi) sym_add(out, ilo, ihi, h_lohi);
                for (int k = 0; k < nfree; ++k) {
                    const int ik = layout.loading_index(j, k);
                    if (has_lo) sym_add(out, ilo, ik, hu_lo * eta[k]);
                    if (has_hi) sym_add(out, ihi, ik, hu_hi * eta[k]);
                    for (int l = 0; l <= k; ++l)
                        sym_add(out, ik, layout.loading_index(j, l), huu * eta[k] * eta[l]);
                }
                break;
            }
        }
        if (spec.models_missingness()) {
            const double u = psi.gamma0[j] + psi.gamma.row(j).dot(xi);
            const double s = sigmoid(u);
            const double w = -s * (1.0 - s);
            const int i0 = layout.gamma0_index(j);
            sym_add(out, i0, i0, w);
            for (int k = 0; k < spec.free_gamma_count(j); ++k) {
                const int ik = layout.gamma_index(j, k);
                sym_add(out, i0, ik, w * xi[k]);
                for (int l = 0; l <= k; ++l)
                    sym_add(out, ik, layout.gamma_index(j, l), w * xi[k] * xi[l]);
            }
        }
    }

    if (spec.p > 0) {
        for (int l = 0; l < spec.p; ++l)
            for (int l2 = 0; l2 <= l; ++l2)
                for (int k = 0; k < spec.K1; ++k)
                    sym_add(out, layout.beta_index(k, l), layout.beta_index(k, l2),
                            -unit.x[l] * unit.x[l2]);
    }
    if (spec.models_missingness()) {
        if (spec.p > 0) {
            for (int l = 0; l < spec.p; ++l)
                for (int l2 = 0; l2 <= l; ++l2)
                    for (int k = 0; k < spec.K2; ++k)
                        sym_add(out, layout.zeta_index(k, l), layout.zeta_index(k, l2),
                                -unit.x[l] * unit.x[l2]);
        }
        if (layout.has_kappa_block()) {
            for (int l = 0; l < spec.K1; ++l)
                for (int l2 = 0; l2 <= l; ++l2)
                    for (int k = 0; k < spec.K2; ++k)
                        sym_add(out, layout.kappa_index(k, l), layout.kappa_index(k, l2),
                                -eta[l] * eta[l2]);
            for (int l = 0; l < spec.p; ++l)
                for (int l2 = 0; l2 < spec.K1; ++l2)
                    for (int k = 0; k < spec.K2; ++k)
                        sym_add(out, layout.zeta_index(k, l), layout.kappa_index(k, l2),
                                -unit.x[l] * eta[l2]);
        }
    }
}

}  // namespace lvmi
