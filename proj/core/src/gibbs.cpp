#include "lvmi/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lvmi/model.hpp"
#include "lvmi/special.hpp"

namespace lvmi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Threshold interval (a_{y}, a_{y+1}] for ordinal category y.
inline std::pair<double, double> category_interval(const Eigen::VectorXd& thr, int y) {
    const int M = static_cast<int>(thr.size());
    const double lo = (y == 0) ? -kInf : thr[y - 1];
    const double hi = (y == M) ? kInf : thr[y];
    return {lo, hi};
}

}  // namespace

AugmentedState AugmentedState::init(const Psi& psi, const UnitState& unit) {
    const ModelSpec& spec = psi.spec;
    const int J = spec.J();
    AugmentedState aug;
    aug.omega_b = Eigen::VectorXd::Constant(J, 0.5);
    aug.omega_o = Eigen::VectorXd::Constant(J, 0.5);
    aug.W = Eigen::VectorXd::Zero(J);
    if (spec.models_missingness()) aug.omega_z = Eigen::VectorXd::Constant(J, 0.5);
    for (int j = 0; j < J; ++j) {
        if (spec.variables[j].kind != VarKind::Ordinal) continue;
        const auto [lo, hi] = category_interval(psi.thresholds[j], static_cast<int>(unit.y[j]));
        if (std::isinf(lo)) {
            aug.W[j] = hi - 1.0;
        } else if (std::isinf(hi)) {
            aug.W[j] = lo + 1.0;
        } else {
            aug.W[j] = 0.5 * (lo + hi);
        }
    }
    return aug;
}

SweepPlan SweepPlan::for_spec(const ModelSpec& spec) {
    SweepPlan plan;
    plan.model_missingness = spec.models_missingness();
    return plan;
}

GibbsWorkspace::GibbsWorkspace(const ModelSpec& spec) {
    prec_eta.resize(spec.K1, spec.K1);
    shift_eta.resize(spec.K1);
    work_eta.resize(spec.K1);
    const int k2 = std::max(spec.K2, 1);
    prec_xi.resize(k2, k2);
    shift_xi.resize(k2);
    work_xi.resize(k2);
}

void draw_aux_binary(const UnitState& unit, const Psi& psi, AugmentedState& aug, RngStream& rng) {
    const ModelSpec& spec = psi.spec;
    for (int j = 0; j < spec.J(); ++j) {
        if (spec.variables[j].kind != VarKind::Binary) continue;
        const double lp = psi.alpha0[j] + psi.alpha.row(j).dot(unit.eta);
        aug.omega_b[j] = sample_pg(1, std::abs(lp), rng);
    }
}

void draw_aux_ordinal(const UnitState& unit, const Psi& psi, AugmentedState& aug, RngStream& rng) {
    const ModelSpec& spec = psi.spec;
    for (int j = 0; j < spec.J(); ++j) {
        if (spec.variables[j].kind != VarKind::Ordinal) continue;
        const double mu = psi.alpha.row(j).dot(unit.eta);
        const auto [lo, hi] = category_interval(psi.thresholds[j], static_cast<int>(unit.y[j]));
        const double sd = 1.0 / std::sqrt(aug.omega_o[j]);
        aug.W[j] = sample_truncnorm(mu, sd, lo, hi, rng);
        aug.omega_o[j] = sample_pg(2, std::abs(mu - aug.W[j]), rng);
    }
}

void draw_aux_missingness(const UnitState& unit, const Psi& psi, AugmentedState& aug,
                          RngStream& rng) {
    const ModelSpec& spec = psi.spec;
    if (!spec.models_missingness())
        throw ValidationError("draw_aux_missingness: model has K2 = 0");
    for (int j = 0; j < spec.J(); ++j) {
        const double lp = psi.gamma0[j] + psi.gamma.row(j).dot(unit.xi);
        aug.omega_z[j] = sample_pg(1, std::abs(lp), rng);
    }
}

void draw_eta(UnitState& unit, const AugmentedState& aug, const Psi& psi, RngStream& rng,
              GibbsWorkspace& ws) {
    const ModelSpec& spec = psi.spec;
    ws.prec_eta.setIdentity();
    ws.shift_eta.setZero();
    for (int j = 0; j < spec.J(); ++j) {
        const auto& v = spec.variables[j];
        double d = 0.0;  // working precision of variable j
        double m = 0.0;  // working response
        switch (v.kind) {
            case VarKind::Continuous: {
                const double s2 = psi.sigma[j] * psi.sigma[j];
                d = 1.0 / s2;
                m = (unit.y[j] - psi.alpha0[j]) / s2;
                break;
            }
            case VarKind::Binary:
                d = aug.omega_b[j];
                m = (unit.y[j] - 0.5) - aug.omega_b[j] * psi.alpha0[j];
                break;
            case VarKind::Ordinal:
                d = aug.omega_o[j];
                m = aug.omega_o[j] * aug.W[j];
                break;
        }
        const auto alpha_j = psi.alpha.row(j);
        ws.prec_eta.selfadjointView<Eigen::Lower>().rankUpdate(alpha_j.transpose(), d);
        ws.shift_eta += m * alpha_j.transpose();
    }
    ws.prec_eta.triangularView<Eigen::StrictlyUpper>() =
        ws.prec_eta.transpose().triangularView<Eigen::StrictlyUpper>();
    if (spec.models_missingness() && !spec.ignorable) {
        ws.prec_eta += psi.kappa.transpose() * psi.kappa;
        Eigen::VectorXd xi_res = unit.xi;
        if (spec.p > 0) xi_res -= psi.zeta * unit.x;
        ws.shift_eta += psi.kappa.transpose() * xi_res;
    }
    if (spec.p > 0) ws.shift_eta += psi.beta * unit.x;

    // Precision >= I by construction, so the Cholesky cannot fail.
    sample_mvn_precision_inplace(ws.shift_eta, ws.prec_eta, ws.work_eta, unit.eta, rng);
}

void draw_xi(UnitState& unit, const AugmentedState& aug, const Psi& psi, RngStream& rng,
             GibbsWorkspace& ws) {
    const ModelSpec& spec = psi.spec;
    if (!spec.models_missingness()) throw ValidationError("draw_xi: model has K2 = 0");
    ws.prec_xi.setIdentity();
    ws.shift_xi.setZero();
    for (int j = 0; j < spec.J(); ++j) {
        const auto gamma_j = psi.gamma.row(j);
        ws.prec_xi.selfadjointView<Eigen::Lower>().rankUpdate(gamma_j.transpose(),
                                                              aug.omega_z[j]);
        const double m = (static_cast<double>(unit.z[j]) - 0.5) - aug.omega_z[j] * psi.gamma0[j];
        ws.shift_xi += m * gamma_j.transpose();
    }
    ws.prec_xi.triangularView<Eigen::StrictlyUpper>() =
        ws.prec_xi.transpose().triangularView<Eigen::StrictlyUpper>();
    if (spec.p > 0) ws.shift_xi += psi.zeta * unit.x;
    ws.shift_xi.noalias() += psi.kappa * unit.eta;

    sample_mvn_precision_inplace(ws.shift_xi, ws.prec_xi, ws.work_xi, unit.xi, rng);
}

void draw_missing_y(UnitState& unit, const Psi& psi, RngStream& rng) {
    const ModelSpec& spec = psi.spec;
    for (int j = 0; j < spec.J(); ++j) {
        if (unit.z[j]) continue;
        const auto& v = spec.variables[j];
        switch (v.kind) {
            case VarKind::Continuous: {
                const double mu = psi.alpha0[j] + psi.alpha.row(j).dot(unit.eta);
                unit.y[j] = mu + psi.sigma[j] * rng.normal();
                break;
            }
            case VarKind::Binary: {
                const double pr = sigmoid(psi.alpha0[j] + psi.alpha.row(j).dot(unit.eta));
                unit.y[j] = rng.uniform() < pr ? 1.0 : 0.0;
                break;
            }
            case VarKind::Ordinal: {
                const double u = psi.alpha.row(j).dot(unit.eta);
                const double target = rng.uniform();
                double cum = 0.0;
                int cat = v.n_categories - 1;
                for (int k = 0; k < v.n_categories - 1; ++k) {
                    cum += ordinal_category_prob(psi, j, k, u);
                    if (target <= cum) {
                        cat = k;
                        break;
                    }
                }
                unit.y[j] = static_cast<double>(cat);
                break;
            }
        }
    }
}

void gibbs_sweep(UnitState& unit, AugmentedState& aug, const Psi& psi, const SweepPlan& plan,
                 RngStream& rng, GibbsWorkspace& ws) {
    draw_aux_binary(unit, psi, aug, rng);
    draw_aux_ordinal(unit, psi, aug, rng);
    if (plan.model_missingness) draw_aux_missingness(unit, psi, aug, rng);
    draw_eta(unit, aug, psi, rng, ws);
    if (plan.model_missingness) draw_xi(unit, aug, psi, rng, ws);
    draw_missing_y(unit, psi, rng);
}

void init_missing_values(Eigen::MatrixXd& y,
                         const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& z,
                         const ModelSpec& spec) {
    const int N = static_cast<int>(y.rows());
    for (int j = 0; j < spec.J(); ++j) {
        const auto& v = spec.variables[j];
        double fill = 0.0;
        switch (v.kind) {
            case VarKind::Continuous: {
                double sum = 0.0;
                int count = 0;
                for (int i = 0; i < N; ++i)
                    if (z(i, j)) {
                        sum += y(i, j);
                        ++count;
                    }
                fill = sum / count;
                break;
            }
            case VarKind::Binary: {
                int ones = 0, count = 0;
                for (int i = 0; i < N; ++i)
                    if (z(i, j)) {
                        ones += y(i, j) == 1.0;
                        ++count;
                    }
                fill = (2 * ones >= count) ? 1.0 : 0.0;
                break;
            }
            case VarKind::Ordinal: {
                std::vector<double> vals;
                for (int i = 0; i < N; ++i)
                    if (z(i, j)) vals.push_back(y(i, j));
                std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
                fill = vals[vals.size() / 2];
                break;
            }
        }
        for (int i = 0; i < N; ++i)
            if (!z(i, j)) y(i, j) = fill;
    }
}

}  // namespace lvmi
