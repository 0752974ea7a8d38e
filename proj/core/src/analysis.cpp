#include "lvmi/analysis.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "lvmi/special.hpp"

namespace lvmi {

namespace {

void check_weights(const Eigen::VectorXd& w, int n) {
    if (static_cast<int>(w.size()) != n)
        throw ValidationError("analysis: weight vector length does not match unit count");
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(w[i]) || w[i] <= 0.0)
            throw ValidationError("analysis: weights must be strictly positive and finite");
}

}  // namespace

Eigen::VectorXd default_theta_init(const ImputationOutput& imp, const Eigen::VectorXd& weights,
                                   const EstimatingFunction& ef) {
    if (ef.init) return ef.init(imp, weights);
    return Eigen::VectorXd::Zero(ef.q);
}

Eigen::VectorXd solve_pooled(const ImputationOutput& imp, const Eigen::VectorXd& weights,
                             const EstimatingFunction& ef, const Eigen::VectorXd& theta_init,
                             int* iterations) {
    const int N = imp.n_units();
    const int M = imp.n_imputations();
    check_weights(weights, N);
    if (ef.validate_data) ef.validate_data(imp);

    const double w_sum = weights.sum();
    Eigen::VectorXd theta = theta_init;
    Eigen::VectorXd u(ef.q), residual(ef.q);
    Eigen::MatrixXd jac(ef.q, ef.q), jac_sum(ef.q, ef.q);

    const int max_iter = 100;
    for (int iter = 1; iter <= max_iter; ++iter) {
        residual.setZero();
        jac_sum.setZero();
        for (int m = 0; m < M; ++m) {
            const Eigen::MatrixXd& ym = imp.datasets[m];
            for (int i = 0; i < N; ++i) {
                ef.evaluate(ym.row(i), imp.x.row(i), theta, u);
                residual += weights[i] * u;
                ef.jacobian(ym.row(i), imp.x.row(i), theta, jac);
                jac_sum += weights[i] * jac;
            }
        }
        residual /= static_cast<double>(M);
        jac_sum /= static_cast<double>(M);

        if (residual.norm() < 1e-10 * w_sum) {
            if (iterations) *iterations = iter - 1;
            return theta;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac_sum);
        if (!lu.isInvertible())
            throw NumericError("solve_pooled(" + ef.name + "): singular Jacobian");
        theta -= lu.solve(residual);
        if (!theta.allFinite())
            throw NumericError("solve_pooled(" + ef.name + "): non-finite Newton iterate");
    }
    // One more residual evaluation for the error message.
    residual.setZero();
    for (int m = 0; m < M; ++m)
        for (int i = 0; i < N; ++i) {
            ef.evaluate(imp.datasets[m].row(i), imp.x.row(i), theta, u);
            residual += weights[i] * u;
        }
    residual /= static_cast<double>(M);
    throw NumericError("solve_pooled(" + ef.name + "): Newton did not converge in " +
                       std::to_string(max_iter) + " iterations; residual norm " +
                       std::to_string(residual.norm()));
}

AnalysisResult sandwich_variance(const ImputationOutput& imp, const Eigen::VectorXd& weights,
                                 const EstimatingFunction& ef, const Eigen::VectorXd& theta_hat,
                                 double level) {
    const int N = imp.n_units();
    const int M = imp.n_imputations();
    const int q = ef.q;
    const int dim = imp.param_dim();
    check_weights(weights, N);
    if (!(level > 0.0 && level < 1.0))
        throw ValidationError("sandwich_variance: confidence level must lie in (0, 1)");

    const double w_sum = weights.sum();
    const double w2_sum = weights.squaredNorm();
    const double w_eff = w_sum * w_sum / w2_sum;

    // Pass over (m, i): across-imputation averages of U and dU/dtheta',
    // plus kappa_hat from the persisted scores.
    Eigen::MatrixXd ubar = Eigen::MatrixXd::Zero(N, q);
    Eigen::MatrixXd tau_acc = Eigen::MatrixXd::Zero(q, q);
    Eigen::MatrixXd kappa_hat = Eigen::MatrixXd::Zero(q, dim);
    Eigen::VectorXd u(q);
    Eigen::MatrixXd jac(q, q);
    for (int m = 0; m < M; ++m) {
        const Eigen::MatrixXd& ym = imp.datasets[m];
        const Eigen::MatrixXd& sm = imp.scores_m[m];
        for (int i = 0; i < N; ++i) {
            ef.evaluate(ym.row(i), imp.x.row(i), theta_hat, u);
            ubar.row(i) += u.transpose();
            ef.jacobian(ym.row(i), imp.x.row(i), theta_hat, jac);
            tau_acc += weights[i] * jac;
            kappa_hat += u * (sm.row(i) - imp.s_bar_obs.row(i));
        }
    }
    ubar /= static_cast<double>(M);
    Eigen::MatrixXd tau_hat = -tau_acc / (static_cast<double>(M) * w_sum);
    kappa_hat /= static_cast<double>(M) * static_cast<double>(N);

    // Influence of the imputation-model fit: D_i = I_obs^{-1} s_bar_i,
    // with a pseudo-inverse fallback when I_obs is numerically singular.
    VarianceComponents comps;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(imp.i_obs);
    const Eigen::VectorXd& evals = es.eigenvalues();
    const double emax = evals.cwiseAbs().maxCoeff();
    const double emin = evals.cwiseAbs().minCoeff();
    Eigen::MatrixXd d_i(N, dim);
    if (emin <= emax / 1e12) {
        comps.pinv_used = true;
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(dim);
        for (int k = 0; k < dim; ++k)
            if (std::abs(evals[k]) > emax / 1e12) inv[k] = 1.0 / evals[k];
        const Eigen::MatrixXd pinv =
            es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
        d_i = imp.s_bar_obs * pinv.transpose();
    } else {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(imp.i_obs);
        d_i = ldlt.solve(imp.s_bar_obs.transpose()).transpose();
    }

    Eigen::MatrixXd lambda_hat = (d_i.transpose() * d_i) / static_cast<double>(N);

    // Weighted inner matrix from the influence representation
    // psi_i = Ubar_i + kappa_hat D_i.
    Eigen::MatrixXd omega_c = Eigen::MatrixXd::Zero(q, q);
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd psi_i(q);
    for (int i = 0; i < N; ++i) {
        const double w2 = weights[i] * weights[i];
        const Eigen::VectorXd ub = ubar.row(i).transpose();
        omega_c += w2 * ub * ub.transpose();
        psi_i = ub + kappa_hat * d_i.row(i).transpose();
        omega += w2 * psi_i * psi_i.transpose();
    }
    omega_c /= w2_sum;
    omega /= w2_sum;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(tau_hat);
    if (!lu.isInvertible())
        throw NumericError("sandwich_variance(" + ef.name + "): singular tau");
    const Eigen::MatrixXd tau_inv = lu.inverse();
    Eigen::MatrixXd sigma = tau_inv * omega * tau_inv.transpose();
    sigma = 0.5 * (sigma + sigma.transpose());

    AnalysisResult result;
    result.theta_hat = theta_hat;
    result.level = level;
    result.se.resize(q);
    result.ci_lower.resize(q);
    result.ci_upper.resize(q);
    const double zq = norm_quantile(0.5 + 0.5 * level);
    for (int j = 0; j < q; ++j) {
        result.se[j] = std::sqrt(std::max(sigma(j, j), 0.0) / w_eff);
        result.ci_lower[j] = theta_hat[j] - zq * result.se[j];
        result.ci_upper[j] = theta_hat[j] + zq * result.se[j];
    }
    comps.tau_hat = std::move(tau_hat);
    comps.omega_c_hat = std::move(omega_c);
    comps.omega_hat = std::move(omega);
    comps.kappa_hat = std::move(kappa_hat);
    comps.lambda_hat = std::move(lambda_hat);
    comps.d_i = std::move(d_i);
    comps.sigma_hat = std::move(sigma);
    comps.w_eff = w_eff;
    result.components = std::move(comps);
    return result;
}

AnalysisResult analyze(const ImputationOutput& imp, const Eigen::VectorXd& weights,
                       const EstimatingFunction& ef, double level) {
    int iters = 0;
    const Eigen::VectorXd theta0 = default_theta_init(imp, weights, ef);
    const Eigen::VectorXd theta = solve_pooled(imp, weights, ef, theta0, &iters);
    AnalysisResult result = sandwich_variance(imp, weights, ef, theta, level);
    result.newton_iterations = iters;
    return result;
}

EstimatingFunction builtin_mean(const std::vector<int>& targets) {
    EstimatingFunction ef;
    ef.q = static_cast<int>(targets.size());
    ef.solve_hint = EstimatingFunction::Solve::ClosedForm;
    ef.name = "mean";
    for (int j : targets) ef.param_names.push_back("mean.y" + std::to_string(j + 1));
    ef.evaluate = [targets](const auto& y, const auto&, const Eigen::VectorXd& th,
                            Eigen::VectorXd& u) {
        for (int j = 0; j < static_cast<int>(targets.size()); ++j) u[j] = y[targets[j]] - th[j];
    };
    ef.jacobian = [q = ef.q](const auto&, const auto&, const Eigen::VectorXd&,
                             Eigen::MatrixXd& jac) { jac = -Eigen::MatrixXd::Identity(q, q); };
    ef.init = [targets](const ImputationOutput& imp, const Eigen::VectorXd& w) {
        Eigen::VectorXd th = Eigen::VectorXd::Zero(targets.size());
        double wsum = 0.0;
        for (const auto& ym : imp.datasets)
            for (int i = 0; i < imp.n_units(); ++i) {
                for (int j = 0; j < static_cast<int>(targets.size()); ++j)
                    th[j] += w[i] * ym(i, targets[j]);
                wsum += w[i];
            }
        return Eigen::VectorXd((th / wsum).eval());
    };
    return ef;
}

EstimatingFunction builtin_mean_transform(
    int q, std::function<void(const Eigen::Ref<const Eigen::VectorXd>&, Eigen::VectorXd&)> r,
    const std::vector<std::string>& names) {
    EstimatingFunction ef;
    ef.q = q;
    ef.solve_hint = EstimatingFunction::Solve::ClosedForm;
    ef.name = "mean_transform";
    ef.param_names = names;
    ef.evaluate = [r](const auto& y, const auto&, const Eigen::VectorXd& th, Eigen::VectorXd& u) {
        r(y, u);
        u -= th;
    };
    ef.jacobian = [q](const auto&, const auto&, const Eigen::VectorXd&, Eigen::MatrixXd& jac) {
        jac = -Eigen::MatrixXd::Identity(q, q);
    };
    return ef;
}

EstimatingFunction builtin_conditional_mean(const ModelSpec& spec, int given, double value) {
    if (given < 0 || given >= spec.J())
        throw ValidationError("conditional mean: conditioning index out of range");
    if (spec.variables[given].kind != VarKind::Binary)
        throw ValidationError("conditional mean: conditioning variable must be binary");
    if (value != 0.0 && value != 1.0)
        throw ValidationError("conditional mean: conditioning value must be 0 or 1");

    std::vector<int> targets;
    for (int j = 0; j < spec.J(); ++j)
        if (j != given) targets.push_back(j);

    EstimatingFunction ef;
    ef.q = static_cast<int>(targets.size());
    ef.solve_hint = EstimatingFunction::Solve::ClosedForm;
    ef.name = "conditional_mean";
    for (int j : targets)
        ef.param_names.push_back("condmean.y" + std::to_string(j + 1) + "|y" +
                                 std::to_string(given + 1) + "=" + std::to_string(static_cast<int>(value)));
    ef.evaluate = [targets, given, value](const auto& y, const auto&, const Eigen::VectorXd& th,
                                          Eigen::VectorXd& u) {
        const double ind = (y[given] == value) ? 1.0 : 0.0;
        for (int j = 0; j < static_cast<int>(targets.size()); ++j)
            u[j] = ind * (y[targets[j]] - th[j]);
    };
    ef.jacobian = [targets, given, value](const auto& y, const auto&, const Eigen::VectorXd&,
                                          Eigen::MatrixXd& jac) {
        const double ind = (y[given] == value) ? 1.0 : 0.0;
        jac = -ind * Eigen::MatrixXd::Identity(targets.size(), targets.size());
    };
    ef.validate_data = [given, value](const ImputationOutput& imp) {
        for (int m = 0; m < imp.n_imputations(); ++m) {
            int count = 0;
            for (int i = 0; i < imp.n_units(); ++i)
                count += imp.datasets[m](i, given) == value;
            if (count == 0)
                throw ValidationError(
                    "conditional mean: imputed dataset " + std::to_string(m + 1) +
                    " has no unit with y" + std::to_string(given + 1) + " = " +
                    std::to_string(static_cast<int>(value)) + "; the estimand is undefined there");
        }
    };
    ef.init = [targets, given, value](const ImputationOutput& imp, const Eigen::VectorXd& w) {
        Eigen::VectorXd num = Eigen::VectorXd::Zero(targets.size());
        double den = 0.0;
        for (const auto& ym : imp.datasets)
            for (int i = 0; i < imp.n_units(); ++i) {
                if (ym(i, given) != value) continue;
                for (int j = 0; j < static_cast<int>(targets.size()); ++j)
                    num[j] += w[i] * ym(i, targets[j]);
                den += w[i];
            }
        return Eigen::VectorXd((num / den).eval());
    };
    return ef;
}

EstimatingFunction builtin_correlation(int j1, int j2) {
    EstimatingFunction ef;
    ef.q = 5;
    ef.solve_hint = EstimatingFunction::Solve::Newton;
    ef.name = "correlation";
    ef.param_names = {"mu1", "mu2", "var1", "var2", "rho"};
    ef.evaluate = [j1, j2](const auto& y, const auto&, const Eigen::VectorXd& th,
                           Eigen::VectorXd& u) {
        const double d1 = y[j1] - th[0];
        const double d2 = y[j2] - th[1];
        u[0] = d1;
        u[1] = d2;
        u[2] = d1 * d1 - th[2];
        u[3] = d2 * d2 - th[3];
        u[4] = d1 * d2 - th[4] * std::sqrt(th[2] * th[3]);
    };
    ef.jacobian = [j1, j2](const auto& y, const auto&, const Eigen::VectorXd& th,
                           Eigen::MatrixXd& jac) {
        const double d1 = y[j1] - th[0];
        const double d2 = y[j2] - th[1];
        const double s1 = std::sqrt(th[2]);
        const double s2 = std::sqrt(th[3]);
        jac.setZero();
        jac(0, 0) = -1.0;
        jac(1, 1) = -1.0;
        jac(2, 0) = -2.0 * d1;
        jac(2, 2) = -1.0;
        jac(3, 1) = -2.0 * d2;
        jac(3, 3) = -1.0;
        jac(4, 0) = -d2;
        jac(4, 1) = -d1;
        jac(4, 2) = -0.5 * th[4] * s2 / s1;
        jac(4, 3) = -0.5 * th[4] * s1 / s2;
        jac(4, 4) = -s1 * s2;
    };
    ef.init = [j1, j2](const ImputationOutput& imp, const Eigen::VectorXd& w) {
        double wsum = 0.0, m1 = 0.0, m2 = 0.0;
        for (const auto& ym : imp.datasets)
            for (int i = 0; i < imp.n_units(); ++i) {
                m1 += w[i] * ym(i, j1);
                m2 += w[i] * ym(i, j2);
                wsum += w[i];
            }
        m1 /= wsum;
        m2 /= wsum;
        double v1 = 0.0, v2 = 0.0, cov = 0.0;
        for (const auto& ym : imp.datasets)
            for (int i = 0; i < imp.n_units(); ++i) {
                const double d1 = ym(i, j1) - m1;
                const double d2 = ym(i, j2) - m2;
                v1 += w[i] * d1 * d1;
                v2 += w[i] * d2 * d2;
                cov += w[i] * d1 * d2;
            }
        v1 /= wsum;
        v2 /= wsum;
        cov /= wsum;
        Eigen::VectorXd th(5);
        th << m1, m2, v1, v2, cov / std::sqrt(v1 * v2);
        return th;
    };
    return ef;
}

EstimatingFunction builtin_linear_regression(int response, const std::vector<Regressor>& regs) {
    EstimatingFunction ef;
    const int q = static_cast<int>(regs.size()) + 1;
    ef.q = q;
    ef.solve_hint = EstimatingFunction::Solve::ClosedForm;
    ef.name = "linear_regression";
    ef.param_names.push_back("ols.intercept");
    for (const auto& r : regs)
        ef.param_names.push_back(std::string("ols.") +
                                 (r.source == Regressor::Source::Y ? "y" : "x") +
                                 std::to_string(r.index + 1));
    auto design = [regs, q](const Eigen::Ref<const Eigen::VectorXd>& y,
                            const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd& X) {
        X.resize(q);
        X[0] = 1.0;
        for (int r = 0; r < q - 1; ++r)
            X[r + 1] = regs[r].source == Regressor::Source::Y ? y[regs[r].index]
                                                              : x[regs[r].index];
    };
    ef.evaluate = [response, design](const auto& y, const auto& x, const Eigen::VectorXd& th,
                                     Eigen::VectorXd& u) {
        Eigen::VectorXd X;
        design(y, x, X);
        u = (y[response] - th.dot(X)) * X;
    };
    ef.jacobian = [design](const auto& y, const auto& x, const Eigen::VectorXd&,
                           Eigen::MatrixXd& jac) {
        Eigen::VectorXd X;
        design(y, x, X);
        jac = -X * X.transpose();
    };
    return ef;
}

}  // namespace lvmi
