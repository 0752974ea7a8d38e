#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lvmi/analysis.hpp"
#include "lvmi/impute.hpp"
#include "support/testutil.hpp"

using namespace lvmi;

namespace {

// Hand-built imputation output: M completed datasets with given scores.
// i_obs defaults to the identity so influence algebra stays well-posed.
ImputationOutput make_output(const std::vector<Eigen::MatrixXd>& datasets,
                             const Eigen::MatrixXd& x, int dim) {
    ImputationOutput imp;
    imp.datasets = datasets;
    const int n = static_cast<int>(datasets[0].rows());
    imp.x = x;
    imp.weights = Eigen::VectorXd::Ones(n);
    imp.s_bar_obs = Eigen::MatrixXd::Zero(n, dim);
    imp.i_obs = Eigen::MatrixXd::Identity(dim, dim);
    for (std::size_t m = 0; m < datasets.size(); ++m)
        imp.scores_m.push_back(Eigen::MatrixXd::Zero(n, dim));
    return imp;
}

// Scores with per-imputation noise for exercising the kappa/Lambda terms.
void fill_scores(ImputationOutput& imp, std::uint64_t seed) {
    RngStream rng(seed, Phase::Test, 0);
    const int n = imp.n_units();
    const int dim = imp.param_dim();
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) imp.s_bar_obs(i, d) = rng.normal();
    for (auto& s : imp.scores_m) {
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < dim; ++d) s(i, d) = imp.s_bar_obs(i, d) + 0.3 * rng.normal();
    }
    Eigen::MatrixXd a(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) a(r, c) = rng.normal();
    imp.i_obs = a * a.transpose() + 2.0 * Eigen::MatrixXd::Identity(dim, dim);
}

}  // namespace

TEST_CASE("pooled mean point estimates") {
    Eigen::MatrixXd y(2, 1);
    y << 1.0, 3.0;
    ImputationOutput imp = make_output({y}, Eigen::MatrixXd(2, 0), 2);

    const auto ef = builtin_mean({0});
    Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
    CHECK(solve_pooled(imp, w, ef, Eigen::VectorXd::Zero(1))[0] == doctest::Approx(2.0).epsilon(1e-14));

    w << 1.0, 3.0;
    CHECK(solve_pooled(imp, w, ef, Eigen::VectorXd::Zero(1))[0] == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("pooled equals stacked for means and regression") {
    RngStream rng(41, Phase::Test, 0);
    const int n = 40, M = 3;
    std::vector<Eigen::MatrixXd> datasets;
    for (int m = 0; m < M; ++m) {
        Eigen::MatrixXd y(n, 3);
        for (int i = 0; i < n; ++i) {
            y(i, 0) = rng.normal();
            y(i, 1) = 0.5 + 0.8 * y(i, 0) + 0.3 * rng.normal();
            y(i, 2) = rng.uniform() < 0.5 ? 0.0 : 1.0;
        }
        datasets.push_back(y);
    }
    ImputationOutput imp = make_output(datasets, Eigen::MatrixXd(n, 0), 2);
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 + rng.uniform();

    // Means: pooled solution equals the weighted mean over the N*M stack.
    {
        const auto ef = builtin_mean({0, 1});
        const Eigen::VectorXd theta = solve_pooled(imp, w, ef, Eigen::VectorXd::Zero(2));
        for (int j = 0; j < 2; ++j) {
            double num = 0.0, den = 0.0;
            for (int m = 0; m < M; ++m)
                for (int i = 0; i < n; ++i) {
                    num += w[i] * datasets[m](i, j);
                    den += w[i];
                }
            CHECK(theta[j] == doctest::Approx(num / den).epsilon(1e-12));
        }
    }
    // Regression: equals weighted least squares on the stacked rows.
    {
        const auto ef = builtin_linear_regression(1, {{Regressor::Source::Y, 0}});
        const Eigen::VectorXd theta = solve_pooled(imp, w, ef, Eigen::VectorXd::Zero(2));
        Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(2, 2);
        Eigen::VectorXd xty = Eigen::VectorXd::Zero(2);
        for (int m = 0; m < M; ++m)
            for (int i = 0; i < n; ++i) {
                Eigen::VectorXd X(2);
                X << 1.0, datasets[m](i, 0);
                xtx += w[i] * X * X.transpose();
                xty += w[i] * datasets[m](i, 1) * X;
            }
        const Eigen::VectorXd wls = xtx.ldlt().solve(xty);
        CHECK((theta - wls).cwiseAbs().maxCoeff() < 1e-10);
    }
    // Correlation: matches the stacked weighted sample correlation within
    // Newton tolerance, and the moment system has ~zero residual at the
    // closed-form moments.
    {
        const auto ef = builtin_correlation(0, 1);
        int iters = 0;
        const Eigen::VectorXd init = ef.init(imp, w);
        const Eigen::VectorXd theta = solve_pooled(imp, w, ef, init, &iters);
        CHECK((theta - init).cwiseAbs().maxCoeff() < 1e-9);

        Eigen::VectorXd u(5), total = Eigen::VectorXd::Zero(5);
        for (int m = 0; m < M; ++m)
            for (int i = 0; i < n; ++i) {
                ef.evaluate(datasets[m].row(i), imp.x.row(i), init, u);
                total += w[i] * u;
            }
        CHECK(total.norm() / (M * w.sum()) < 1e-10);
    }
}

TEST_CASE("built-in jacobians match finite differences") {
    RngStream rng(43, Phase::Test, 0);
    Eigen::VectorXd y(3), x(1);
    y << 0.7, -0.4, 1.0;
    x << 0.5;
    const std::vector<EstimatingFunction> efs = {
        builtin_mean({0, 1, 2}),
        builtin_correlation(0, 1),
        builtin_linear_regression(1, {{Regressor::Source::Y, 0}, {Regressor::Source::X, 0}}),
    };
    for (const auto& ef : efs) {
        Eigen::VectorXd theta(ef.q);
        for (int k = 0; k < ef.q; ++k) theta[k] = rng.uniform(0.2, 0.9);
        Eigen::MatrixXd jac(ef.q, ef.q);
        ef.jacobian(y, x, theta, jac);
        const Eigen::MatrixXd fd = test::fd_jacobian(
            [&](const Eigen::VectorXd& th) {
                Eigen::VectorXd u(ef.q);
                ef.evaluate(y, x, th, u);
                return u;
            },
            theta);
        CHECK(test::max_rel_err(jac, fd, 1e-4) < 1e-6);
    }
    // Conditional mean (binary conditioning variable present in y).
    ModelSpec spec;
    spec.variables = {{0, VarKind::Continuous, 0}, {1, VarKind::Continuous, 0},
                      {2, VarKind::Binary, 0}};
    spec.K1 = 1;
    const auto cm = builtin_conditional_mean(spec, 2, 1.0);
    Eigen::VectorXd theta(2);
    theta << 0.3, 0.4;
    Eigen::MatrixXd jac(2, 2);
    cm.jacobian(y, x, theta, jac);
    const Eigen::MatrixXd fd = test::fd_jacobian(
        [&](const Eigen::VectorXd& th) {
            Eigen::VectorXd u(2);
            cm.evaluate(y, x, th, u);
            return u;
        },
        theta);
    CHECK(test::max_rel_err(jac, fd, 1e-4) < 1e-6);
}

TEST_CASE("no-missing mean: sandwich reduces to the classical form") {
    RngStream rng(47, Phase::Test, 0);
    const int n = 60;
    Eigen::MatrixXd y(n, 1);
    for (int i = 0; i < n; ++i) y(i, 0) = 1.5 + rng.normal();
    ImputationOutput imp = make_output({y}, Eigen::MatrixXd(n, 0), 3);
    // scores_m[0] == s_bar_obs makes kappa exactly zero (complete data, M=1).
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 + rng.uniform();

    const auto ef = builtin_mean({0});
    const AnalysisResult res = analyze(imp, w, ef);
    CHECK(res.components.kappa_hat.cwiseAbs().maxCoeff() == 0.0);

    const double theta = res.theta_hat[0];
    double num = 0.0;
    for (int i = 0; i < n; ++i) num += w[i] * w[i] * (y(i, 0) - theta) * (y(i, 0) - theta);
    const double classical = std::sqrt(num) / w.sum();
    CHECK(std::abs(res.se[0] - classical) < 1e-10);

    // CI brackets the estimate; se = sqrt(diag Sigma / W_N).
    CHECK(res.ci_lower[0] < theta);
    CHECK(res.ci_upper[0] > theta);
    CHECK(res.se[0] ==
          doctest::Approx(std::sqrt(res.components.sigma_hat(0, 0) / res.components.w_eff))
              .epsilon(1e-12));
}

TEST_CASE("unit-weight reduction to the unweighted plug-in, term by term") {
    RngStream rng(53, Phase::Test, 0);
    const int n = 50, M = 4, dim = 3;
    std::vector<Eigen::MatrixXd> datasets;
    for (int m = 0; m < M; ++m) {
        Eigen::MatrixXd y(n, 2);
        for (int i = 0; i < n; ++i) {
            y(i, 0) = rng.normal();
            y(i, 1) = 0.3 * y(i, 0) + rng.normal();
        }
        datasets.push_back(y);
    }
    ImputationOutput imp = make_output(datasets, Eigen::MatrixXd(n, 0), dim);
    fill_scores(imp, 99);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);

    const auto ef = builtin_mean({0, 1});
    const AnalysisResult res = analyze(imp, w, ef);
    const auto& c = res.components;
    CHECK(c.w_eff == doctest::Approx(static_cast<double>(n)).epsilon(1e-14));

    // Recompute Ubar_i at theta_hat and assemble Eq.-style terms directly.
    Eigen::MatrixXd ubar = Eigen::MatrixXd::Zero(n, 2);
    Eigen::VectorXd u(2);
    for (int m = 0; m < M; ++m)
        for (int i = 0; i < n; ++i) {
            ef.evaluate(datasets[m].row(i), imp.x.row(i), res.theta_hat, u);
            ubar.row(i) += u.transpose();
        }
    ubar /= static_cast<double>(M);

    Eigen::MatrixXd omega_c = Eigen::MatrixXd::Zero(2, 2);
    for (int i = 0; i < n; ++i)
        omega_c += ubar.row(i).transpose() * ubar.row(i);
    omega_c /= static_cast<double>(n);
    CHECK(test::max_rel_err(c.omega_c_hat, omega_c, 1e-12) < 1e-12);

    Eigen::MatrixXd kappa = Eigen::MatrixXd::Zero(2, dim);
    for (int m = 0; m < M; ++m)
        for (int i = 0; i < n; ++i) {
            ef.evaluate(datasets[m].row(i), imp.x.row(i), res.theta_hat, u);
            kappa += u * (imp.scores_m[m].row(i) - imp.s_bar_obs.row(i));
        }
    kappa /= static_cast<double>(M * n);
    CHECK(test::max_rel_err(c.kappa_hat, kappa, 1e-12) < 1e-12);

    // D_i = I_obs^{-1} s_bar_i and Lambda = mean D D'.
    const Eigen::MatrixXd d_expected =
        imp.i_obs.ldlt().solve(imp.s_bar_obs.transpose()).transpose();
    CHECK(test::max_rel_err(c.d_i, d_expected, 1e-10) < 1e-9);

    // Omega = Omega_c + kappa Lambda kappa' + symmetrized cross term.
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd kd = kappa * d_expected.row(i).transpose();
        cross += kd * ubar.row(i) + (kd * ubar.row(i)).transpose();
    }
    cross /= static_cast<double>(n);
    const Eigen::MatrixXd omega_expected =
        omega_c + kappa * c.lambda_hat * kappa.transpose() + cross;
    CHECK(test::max_rel_err(c.omega_hat, omega_expected, 1e-12) < 1e-12);

    // Sigma = tau^-1 Omega tau^-T; for means tau = I.
    CHECK(test::max_rel_err(c.tau_hat, Eigen::MatrixXd::Identity(2, 2), 1e-14) < 1e-12);
    CHECK(test::max_rel_err(c.sigma_hat, omega_expected, 1e-11) < 1e-10);
}

TEST_CASE("weighted invariance under constant rescaling") {
    RngStream rng(59, Phase::Test, 0);
    const int n = 30, M = 2;
    std::vector<Eigen::MatrixXd> datasets;
    for (int m = 0; m < M; ++m) {
        Eigen::MatrixXd y(n, 2);
        for (int i = 0; i < n; ++i) {
            y(i, 0) = rng.normal();
            y(i, 1) = rng.normal();
        }
        datasets.push_back(y);
    }
    ImputationOutput imp = make_output(datasets, Eigen::MatrixXd(n, 0), 2);
    fill_scores(imp, 61);

    const auto ef = builtin_mean({0, 1});
    const AnalysisResult a = analyze(imp, Eigen::VectorXd::Ones(n), ef);
    const AnalysisResult b = analyze(imp, Eigen::VectorXd::Constant(n, 7.5), ef);
    CHECK((a.theta_hat - b.theta_hat).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.se - b.se).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.ci_lower - b.ci_lower).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("correlation and indicator-mean built-ins") {
    // Perfectly linear data: rho = 1.
    const int n = 25;
    Eigen::MatrixXd y(n, 2);
    for (int i = 0; i < n; ++i) {
        y(i, 0) = 0.1 * i - 1.0;
        y(i, 1) = 2.0 * y(i, 0);
    }
    ImputationOutput imp = make_output({y}, Eigen::MatrixXd(n, 0), 2);
    const auto ef = builtin_correlation(0, 1);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd theta = solve_pooled(imp, w, ef, ef.init(imp, w));
    CHECK(theta[4] == doctest::Approx(1.0).epsilon(1e-10));

    // Indicator mean: proportion of y <= 0.
    int count = 0;
    for (int i = 0; i < n; ++i) count += y(i, 0) <= 0.0;
    const auto prop = builtin_mean_transform(
        1, [](const Eigen::Ref<const Eigen::VectorXd>& row,
              Eigen::VectorXd& u) { u[0] = row[0] <= 0.0 ? 1.0 : 0.0; },
        {"prop"});
    const Eigen::VectorXd p = solve_pooled(imp, w, prop, Eigen::VectorXd::Zero(1));
    CHECK(p[0] == doctest::Approx(static_cast<double>(count) / n).epsilon(1e-12));
}

TEST_CASE("conditional mean guards") {
    ModelSpec spec;
    spec.variables = {{0, VarKind::Continuous, 0}, {1, VarKind::Binary, 0}};
    spec.K1 = 1;
    CHECK_THROWS_AS(builtin_conditional_mean(spec, 0, 1.0), ValidationError);  // non-binary
    CHECK_THROWS_AS(builtin_conditional_mean(spec, 1, 2.0), ValidationError);  // bad value

    // Degenerate cell: no unit with the conditioning value in dataset 1.
    Eigen::MatrixXd y(3, 2);
    y << 0.5, 0.0, 1.5, 0.0, -0.5, 0.0;
    ImputationOutput imp = make_output({y}, Eigen::MatrixXd(3, 0), 2);
    const auto ef = builtin_conditional_mean(spec, 1, 1.0);
    CHECK_THROWS_WITH_AS(
        solve_pooled(imp, Eigen::VectorXd::Ones(3), ef, Eigen::VectorXd::Zero(1)),
        doctest::Contains("no unit with"), ValidationError);
}

TEST_CASE("newton failure paths") {
    Eigen::MatrixXd y(2, 1);
    y << 1.0, 2.0;
    ImputationOutput imp = make_output({y}, Eigen::MatrixXd(2, 0), 1);
    // A singular-Jacobian estimating function.
    EstimatingFunction ef;
    ef.q = 1;
    ef.name = "degenerate";
    ef.evaluate = [](const auto&, const auto&, const Eigen::VectorXd&, Eigen::VectorXd& u) {
        u[0] = 1.0;  // no root
    };
    ef.jacobian = [](const auto&, const auto&, const Eigen::VectorXd&, Eigen::MatrixXd& jac) {
        jac(0, 0) = 0.0;
    };
    CHECK_THROWS_AS(solve_pooled(imp, Eigen::VectorXd::Ones(2), ef, Eigen::VectorXd::Zero(1)),
                    NumericError);

    // Weight validation.
    const auto mean_ef = builtin_mean({0});
    Eigen::VectorXd w(2);
    w << 1.0, -1.0;
    CHECK_THROWS_AS(solve_pooled(imp, w, mean_ef, Eigen::VectorXd::Zero(1)), ValidationError);
}
