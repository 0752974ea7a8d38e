#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "lvmi/fit.hpp"
#include "lvmi/impute.hpp"
#include "lvmi/psi.hpp"
#include "lvmi/rng.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

// Latent-model data generation for Studies I and II: J_C continuous and
// J_B binary variables, K1 = 4 substantive factors, K2 = 1 missingness
// factor, no covariates.
struct StudyIConfig {
    int n = 5000;
    int j_cont = 10;
    int j_bin = 10;
    int k1 = 4;
    int k2 = 1;
    bool ignorable_truth = true;
    std::uint64_t param_seed = 1;
    std::uint64_t data_seed = 2;

    ModelSpec model_spec() const;
};

// Intercepts ~ N(0,1); loadings ~ U(0.5, 1.5); sigma_j = 0.5; gamma0 ~
// N(-3, 0.5^2); gamma loadings ~ U(0.2, 1.2); kappa ~ U(1, 2) when the
// truth is non-ignorable. The generating model is unconstrained; zero
// constraints apply only to estimated models.
Psi gen_params_study_I(const StudyIConfig& cfg, RngStream& rng);

struct TruthRecord {
    Eigen::VectorXd marginal_means;          // per variable
    Eigen::VectorXd cond_mean_given0;        // E[y_j | y_last = 0], j != last
    Eigen::VectorXd cond_mean_given1;
    int cond_var = -1;                       // conditioning variable index
};

struct GeneratedData {
    Dataset data;
    TruthRecord truth;
};

// Truth table for a latent-model generating distribution: continuous means
// analytic (= alpha0), binary/ordinal and conditional means by Monte Carlo
// at a fixed seed (single-threaded, reproducible).
TruthRecord compute_truth_latent(const Psi& psi_true, std::uint64_t truth_seed, int mc_draws);

// Dataset draw without the truth computation.
Dataset draw_dataset_latent(const Psi& psi_true, int n, std::uint64_t data_seed);

// Draws latents from the prior, responses from the measurement models, and
// missingness from the logistic model; masks y where z = 0. Truth record by
// 1e6-draw Monte Carlo keyed to truth_seed.
GeneratedData gen_data_latent(const Psi& psi_true, int n, std::uint64_t data_seed,
                              std::uint64_t truth_seed);

// Study III: 5 continuous variables from a sparse Gaussian graphical model,
// 5 binary variables from a sparse Ising model P(y) ∝ exp(y' S y / 2) on
// {0,1}^5 (zero external field), independent blocks. Missingness of
// variables 1..9 depends on the fully observed variable 10.
struct StudyIIIConfig {
    Eigen::MatrixXd precision_gaussian;  // 5x5, SPD
    Eigen::MatrixXd ising_coupling;      // 5x5, symmetric, zero diagonal
    int n = 5000;
    double p_miss_given1 = 0.1;  // P(z = 0 | y10 = 1)
    double p_miss_given0 = 0.4;  // P(z = 0 | y10 = 0)

    static StudyIIIConfig defaults();
    void validate() const;

    ModelSpec model_spec(int k1, bool ignorable) const;
};

// Exact 32-state enumeration of the Ising distribution; probabilities in
// state order (bit j of the state index = variable j).
Eigen::VectorXd ising_state_probs(const Eigen::MatrixXd& coupling);

GeneratedData gen_data_study_III(const StudyIIIConfig& cfg, int n, std::uint64_t data_seed);

enum class Study { I1, I2, II1, II2, III_K1, III_K4 };

Study study_from_string(const std::string& name);
std::string to_string(Study study);

struct ScaleConfig {
    int n = 2000;
    int replicates = 20;
    int fit_iters = 1500;
    int fit_burnin = 500;
    int imp_iters = 1500;
    int imp_burnin = 500;
    int imp_thin = 100;  // M = 10 at desk scale

    static ScaleConfig desk();
    static ScaleConfig paper();  // N=5000, R=100, T=3000/T0=1000, M=20
};

struct EstimandSummary {
    std::string name;
    double truth = 0.0;
    double mean_estimate = 0.0;
    double empirical_sd = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;  // fraction of replicates whose 95% CI covers truth
    int n_replicates = 0;
};

struct RawRecord {
    int replicate = 0;
    std::string estimand;
    double truth = 0.0;
    double estimate = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool covered = false;
};

struct ReplicationSummary {
    Study study;
    std::vector<EstimandSummary> estimands;
    std::vector<RawRecord> raw;
    double pooled_coverage = 0.0;
    int failed_replicates = 0;
    std::vector<std::string> failures;
};

// End-to-end replication driver: generate -> fit (with the study's assumed
// ignorability) -> impute -> analyze marginal means (optionally conditional
// means as extra estimands) -> aggregate bias/SE/coverage.
ReplicationSummary run_replication(Study study, const ScaleConfig& scale, std::uint64_t seed,
                                   int workers, bool conditional_means = false);

void write_raw_csv(const ReplicationSummary& summary, std::ostream& os);
void write_summary_csv(const ReplicationSummary& summary, std::ostream& os);

}  // namespace lvmi
