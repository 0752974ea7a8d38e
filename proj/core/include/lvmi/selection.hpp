#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lvmi/fit.hpp"
#include "lvmi/psi.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

struct BicRow {
    int K1 = 0;
    int K2 = 0;
    double loglik_hat = 0.0;
    double loglik_se = 0.0;  // Monte Carlo standard error
    int n_params = 0;
    double bic = 0.0;
    bool failed = false;
    std::string error;
};

// Self-normalized importance estimate of sum_i log f(y_obs, z | x; psi)
// with the latent prior as proposal; missing responses integrate out
// exactly. Returns (value, delta-method SE). S >= 1000.
std::pair<double, double> estimate_observed_loglik(const Dataset& data, const Psi& psi,
                                                   int n_samples, std::uint64_t seed,
                                                   int workers = 0);

struct SelectionResult {
    std::vector<BicRow> rows;  // sorted by BIC ascending (failed cells last)
    int argmin_index = -1;     // index into rows
};

// Fits each (K1, K2) cell with an independent seed, computes BIC with the
// IS log-likelihood, and returns the table plus the minimizer. Ties break
// toward smaller K1 + K2, then smaller K1. Per-cell failures are recorded
// in-row and excluded from the argmin.
SelectionResult select_dimensions(const Dataset& data, const ModelSpec& base,
                                  const std::vector<std::pair<int, int>>& grid,
                                  const SAConfig& sa_cfg, int n_samples);

struct LrtResult {
    double stat = 0.0;
    int df = 0;
    double p_value = 1.0;
    double loglik_full = 0.0;   // non-ignorable fit
    double loglik_null = 0.0;   // kappa = 0 fit
    double se_combined = 0.0;
    bool negative_stat_warning = false;
};

// Likelihood-ratio test of kappa = 0 at the given latent dimensions. Both
// model log-likelihoods use common random numbers (same seed and S).
LrtResult lr_test_ignorability(const Dataset& data, const ModelSpec& base,
                               const SAConfig& sa_cfg, int n_samples);

}  // namespace lvmi
