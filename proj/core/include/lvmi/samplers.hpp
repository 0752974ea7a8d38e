#pragma once

#include <Eigen/Core>

#include "lvmi/rng.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

// Exact Polya-Gamma draw, b in {1, 2}. PG(b, c) = PG(b, -c); callers pass
// the absolute linear predictor. PG(2, c) is the sum of two independent
// PG(1, c) draws.
double sample_pg(int b, double c, RngStream& rng);

// N(mu, sigma^2) restricted to (lower, upper], by the inverse-CDF formula
// with a guarded normal quantile. When the interval mass underflows below
// 1e-300 the draw falls back to a one-sided exponential tail sampler.
double sample_truncnorm(double mu, double sigma, double lower, double upper, RngStream& rng);

// In-place lower Cholesky; throws CholeskyError carrying the 1-based index
// of the offending leading minor.
void cholesky_in_place(Eigen::MatrixXd& a);

// Draw from N(P^{-1} h, P^{-1}) given natural parameters (h, P).
Eigen::VectorXd sample_mvn_precision(const Eigen::VectorXd& h, const Eigen::MatrixXd& P,
                                     RngStream& rng);

// Allocation-free variant for hot loops: chol/work are scratch, out receives
// the draw. chol is overwritten with P's Cholesky factor.
void sample_mvn_precision_inplace(const Eigen::VectorXd& h, Eigen::MatrixXd& chol,
                                  Eigen::VectorXd& work, Eigen::VectorXd& out, RngStream& rng);

}  // namespace lvmi
