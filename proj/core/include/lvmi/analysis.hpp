#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "lvmi/impute.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

// A weighted estimating-equation analysis model: U(y, x, theta) in R^q with
// its Jacobian dU/dtheta'. Built-ins cover means, conditional means,
// correlation, and linear regression; anything else plugs in the same way.
struct EstimatingFunction {
    int q = 0;
    enum class Solve { ClosedForm, Newton };
    Solve solve_hint = Solve::Newton;
    std::string name;
    std::vector<std::string> param_names;

    std::function<void(const Eigen::Ref<const Eigen::VectorXd>& y,
                       const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::VectorXd& theta, Eigen::VectorXd& u)>
        evaluate;
    std::function<void(const Eigen::Ref<const Eigen::VectorXd>& y,
                       const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::VectorXd& theta, Eigen::MatrixXd& jac)>
        jacobian;
    // Optional data-driven Newton start (stacked moments).
    std::function<Eigen::VectorXd(const ImputationOutput&, const Eigen::VectorXd&)> init;
    // Optional pre-solve check (e.g. conditional means with an empty
    // conditioning cell in some imputed dataset).
    std::function<void(const ImputationOutput&)> validate_data;
};

struct VarianceComponents {
    Eigen::MatrixXd tau_hat;      // q x q
    Eigen::MatrixXd omega_c_hat;  // q x q
    Eigen::MatrixXd omega_hat;    // q x q
    Eigen::MatrixXd kappa_hat;    // q x dim(Psi)
    Eigen::MatrixXd lambda_hat;   // dim x dim
    Eigen::MatrixXd d_i;          // N x dim influence vectors
    Eigen::MatrixXd sigma_hat;    // q x q
    double w_eff = 0.0;           // (sum w)^2 / (sum w^2)
    bool pinv_used = false;       // I_obs inverted by pseudo-inverse
};

struct AnalysisResult {
    Eigen::VectorXd theta_hat;
    Eigen::VectorXd se;
    Eigen::VectorXd ci_lower;
    Eigen::VectorXd ci_upper;
    double level = 0.95;
    int newton_iterations = 0;
    VarianceComponents components;
};

// Solves sum_i w_i Ubar_i(theta) = 0 with Ubar_i the across-imputation
// average, by Newton iteration to ||residual|| < 1e-10 * sum(w).
Eigen::VectorXd solve_pooled(const ImputationOutput& imp, const Eigen::VectorXd& weights,
                             const EstimatingFunction& ef, const Eigen::VectorXd& theta_init,
                             int* iterations = nullptr);

// Weighted sandwich variance with imputation-model propagation:
//   tau   = -(sum w)^-1 sum_i w_i dUbar_i/dtheta',
//   psi_i = Ubar_i + kappa_hat D_i,
//   Omega = (sum w^2)^-1 sum_i w_i^2 psi_i psi_i',
//   Sigma = tau^-1 Omega tau^-T,  var(theta) = Sigma / W_N,
// where kappa_hat and Lambda_hat use the persisted per-imputation scores
// and D_i = I_obs^{-1} s_bar_i. Reduces to the unweighted plug-in when all
// w_i are equal.
AnalysisResult sandwich_variance(const ImputationOutput& imp, const Eigen::VectorXd& weights,
                                 const EstimatingFunction& ef, const Eigen::VectorXd& theta_hat,
                                 double level = 0.95);

// Convenience: solve, then the variance.
AnalysisResult analyze(const ImputationOutput& imp, const Eigen::VectorXd& weights,
                       const EstimatingFunction& ef, double level = 0.95);

// theta_j = E r_j(y); identity transform gives marginal means of the listed
// variables.
EstimatingFunction builtin_mean(const std::vector<int>& targets);
// General transform r(y) with stated output dimension.
EstimatingFunction builtin_mean_transform(
    int q, std::function<void(const Eigen::Ref<const Eigen::VectorXd>&, Eigen::VectorXd&)> r,
    const std::vector<std::string>& names);
// theta_j = E[y_j | y_given = value] for all j != given; the conditioning
// variable must be binary.
EstimatingFunction builtin_conditional_mean(const ModelSpec& spec, int given, double value);
// theta = (mu1, mu2, s1^2, s2^2, rho) moment system for corr(y_j1, y_j2).
EstimatingFunction builtin_correlation(int j1, int j2);

struct Regressor {
    enum class Source { Y, X } source = Source::Y;
    int index = 0;
};
// Least-squares coefficients of y_response on (1, regressors...).
EstimatingFunction builtin_linear_regression(int response, const std::vector<Regressor>& regs);

// Data-driven starting point for Newton (stacked moments).
Eigen::VectorXd default_theta_init(const ImputationOutput& imp, const Eigen::VectorXd& weights,
                                   const EstimatingFunction& ef);

}  // namespace lvmi
