#pragma once

#include <Eigen/Core>
#include <vector>

#include "lvmi/psi.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

struct ImputeConfig {
    int iters = 3000;   // T
    int burnin = 1000;  // T0
    int thin = 100;     // k; M = (T - T0) / k
    std::uint64_t seed = 0;
    int workers = 0;

    int n_imputations() const { return (iters - burnin) / thin; }
    void validate() const;
};

struct ImputationOutput {
    // M completed datasets plus the latent draws retained alongside them.
    std::vector<Eigen::MatrixXd> datasets;  // M of N x J
    std::vector<Eigen::MatrixXd> eta_m;     // M of N x K1
    std::vector<Eigen::MatrixXd> xi_m;      // M of N x K2
    // Complete-data scores at the retained iterations, and the per-unit
    // chain averages approximating the observed-data scores.
    std::vector<Eigen::MatrixXd> scores_m;  // M of N x dim
    Eigen::MatrixXd s_bar_obs;              // N x dim
    Eigen::MatrixXd i_obs;                  // dim x dim, symmetric
    Psi psi_hat;
    Eigen::MatrixXd x;       // N x p covariates, shared across datasets
    Eigen::VectorXd weights; // unit weights carried from the input data
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask;  // N x J
    ImputeConfig config;

    int n_units() const { return static_cast<int>(s_bar_obs.rows()); }
    int n_imputations() const { return static_cast<int>(datasets.size()); }
    int param_dim() const { return static_cast<int>(s_bar_obs.cols()); }
};

// Louis plug-in for the observed information:
//   I_obs = (1/N) sum_i { s_bar_i s_bar_i' - mean_t[H_i + S_i S_i'] },
// given the per-unit score averages and the pre-summed (over units)
// chain averages of H + S S'. Symmetrized via (M + M')/2.
Eigen::MatrixXd louis_information(const Eigen::MatrixXd& s_bar_obs,
                                  const Eigen::MatrixXd& sum_mean_h_plus_ss);

// Algorithm-2 imputation: per-unit chains at fixed psi_hat, retaining every
// thin-th completion after burn-in together with its complete-data score,
// and accumulating the score/Hessian averages behind s_bar_obs and i_obs.
ImputationOutput impute(const Dataset& data, const Psi& psi_hat, const ImputeConfig& cfg);

}  // namespace lvmi
