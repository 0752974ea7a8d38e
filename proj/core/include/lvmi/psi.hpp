#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "lvmi/types.hpp"

namespace lvmi {

// All imputation-model parameters. Storage is dense per variable with
// constrained loadings held at zero; the free-parameter view is provided
// by ParamLayout.
struct Psi {
    ModelSpec spec;

    Eigen::VectorXd alpha0;                     // J; continuous/binary intercepts
    std::vector<Eigen::VectorXd> thresholds;    // J; ordinal slots carry M_j increasing cut points
    Eigen::MatrixXd alpha;                      // J x K1 loadings
    Eigen::VectorXd sigma;                      // J; continuous residual SDs (1.0 elsewhere)
    Eigen::VectorXd gamma0;                     // J missingness intercepts (K2 >= 1), else empty
    Eigen::MatrixXd gamma;                      // J x K2 missingness loadings
    Eigen::MatrixXd beta;                       // K1 x p
    Eigen::MatrixXd zeta;                       // K2 x p
    Eigen::MatrixXd kappa;                      // K2 x K1

    static Psi zeros(const ModelSpec& spec);

    // Throws ValidationError on broken invariants (sigma > 0, threshold
    // ordering, constraint mask, kappa zero under ignorability).
    void validate() const;
};

// Zeroes constrained loadings (and kappa under ignorability) and re-applies
// positivity/ordering through the unconstrained parameterization round-trip.
Psi apply_constraints(Psi psi);

// Canonical flattening of the free parameters:
//   per-variable measurement block, in variable order
//     (intercept | thresholds, free loadings, sigma if continuous),
//   then per-variable missingness block (gamma0, free gammas) when K2 >= 1,
//   then vec(beta), vec(zeta), vec(kappa) column-major,
// with constrained entries omitted and kappa omitted when ignorable.
//
// Two vectorizations share this slot order: the natural scale (sigma and
// thresholds as-is) and the unconstrained scale used by the stochastic
// optimizer (log sigma; thresholds as first cut plus log-differences).
class ParamLayout {
public:
    explicit ParamLayout(const ModelSpec& spec);

    int dim() const { return dim_; }
    const std::vector<std::string>& names() const { return names_; }
    // Human-readable block label per slot (variable name or prior block).
    const std::vector<std::string>& blocks() const { return blocks_; }

    int intercept_index(int j) const { return meas_offset_[j]; }
    int threshold_index(int j, int t) const { return meas_offset_[j] + t; }
    int loading_index(int j, int k) const;  // free k only
    int sigma_index(int j) const;
    int gamma0_index(int j) const { return miss_offset_[j]; }
    int gamma_index(int j, int k) const { return miss_offset_[j] + 1 + k; }
    int beta_index(int k, int l) const { return beta_offset_ + l * spec_.K1 + k; }
    int zeta_index(int k, int l) const { return zeta_offset_ + l * spec_.K2 + k; }
    int kappa_index(int k, int l) const { return kappa_offset_ + l * spec_.K2 + k; }
    bool has_kappa_block() const { return kappa_offset_ >= 0; }

    Eigen::VectorXd pack_natural(const Psi& psi) const;
    Psi unpack_natural(const Eigen::VectorXd& v) const;

    Eigen::VectorXd pack_unconstrained(const Psi& psi) const;
    Psi unpack_unconstrained(const Eigen::VectorXd& v) const;

    // Chain rule mapping a natural-scale gradient to the unconstrained
    // coordinates, evaluated at psi.
    Eigen::VectorXd grad_to_unconstrained(const Eigen::VectorXd& natural_grad,
                                          const Psi& at) const;

    const ModelSpec& spec() const { return spec_; }

private:
    ModelSpec spec_;
    int dim_ = 0;
    std::vector<int> meas_offset_;
    std::vector<int> miss_offset_;
    int beta_offset_ = -1;
    int zeta_offset_ = -1;
    int kappa_offset_ = -1;
    std::vector<std::string> names_;
    std::vector<std::string> blocks_;
};

// Free-parameter count by the counting formula; equals ParamLayout::dim().
int count_free_params(const ModelSpec& spec);

}  // namespace lvmi
