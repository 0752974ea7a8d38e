#pragma once

#include <Eigen/Core>

#include "lvmi/psi.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

// log g_j(y | eta; Psi) for variable j. Throws ValidationError on
// out-of-support y (e.g. ordinal category >= n_categories).
double measurement_logprob(const Psi& psi, int j, double y_val, const Eigen::VectorXd& eta);

// log h_j(z | xi; Psi) under the logistic link. Requires K2 >= 1.
double missingness_logprob(const Psi& psi, int j, int z_val, const Eigen::VectorXd& xi);

// log pi(eta, xi | x; Psi) = log N(eta; beta x, I) + log N(xi; zeta x + kappa eta, I).
// The xi factor is dropped when K2 = 0.
double latent_prior_logpdf(const Psi& psi, const Eigen::VectorXd& eta,
                           const Eigen::VectorXd& xi, const Eigen::VectorXd& x);

// Complete-data log-likelihood of one unit: sum of measurement terms,
// missingness terms (K2 >= 1 only), and the latent prior.
double complete_loglik(const Psi& psi, const UnitState& unit);

// Analytic gradient of complete_loglik over the free parameters in the
// canonical natural-scale layout. add_* variants accumulate (+=).
Eigen::VectorXd complete_score(const Psi& psi, const UnitState& unit, const ParamLayout& layout);
void add_complete_score(const Psi& psi, const UnitState& unit, const ParamLayout& layout,
                        Eigen::VectorXd& out);

// Analytic Hessian, symmetric by construction.
Eigen::MatrixXd complete_hessian(const Psi& psi, const UnitState& unit, const ParamLayout& layout);
void add_complete_hessian(const Psi& psi, const UnitState& unit, const ParamLayout& layout,
                          Eigen::MatrixXd& out);

// GRM category probability P(y = k | eta) for ordinal variable j.
double ordinal_category_prob(const Psi& psi, int j, int category, double linpred);

}  // namespace lvmi
