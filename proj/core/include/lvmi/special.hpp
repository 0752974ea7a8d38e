#pragma once

// Scalar special functions used throughout the library: stable logistic
// helpers, normal CDF/quantile, and the regularized incomplete gamma
// (for chi-square tail probabilities).

namespace lvmi {

// 1 / (1 + exp(-x)), stable for large |x|.
double sigmoid(double x);

// log(1 + exp(x)), stable for large |x|.
double log1pexp(double x);

// log sigmoid(x) = -log1pexp(-x).
double log_sigmoid(double x);

// Standard normal CDF via erfc.
double norm_cdf(double x);

// log of the standard normal CDF, stable in the lower tail.
double log_norm_cdf(double x);

// Standard normal quantile (Wichura's PPND16 / AS 241). p in (0, 1).
double norm_quantile(double p);

// Regularized lower/upper incomplete gamma P(a, x), Q(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution with df degrees of freedom.
double chi2_sf(double x, double df);

}  // namespace lvmi
