#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lvmi {

// Error taxonomy shared across the library: validation errors cover
// malformed specs/data, numeric errors cover runtime numerical failures.
class ValidationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class CholeskyError : public NumericError {
public:
    CholeskyError(const std::string& msg, int minor_index)
        : NumericError(msg), minor_index_(minor_index) {}
    int minor_index() const { return minor_index_; }

private:
    int minor_index_;
};

enum class VarKind { Continuous, Binary, Ordinal };

std::string to_string(VarKind kind);
VarKind var_kind_from_string(const std::string& s);

struct VariableSpec {
    int index = 0;
    VarKind kind = VarKind::Continuous;
    // Ordinal only: number of categories M_j + 1 (codes 0..M_j), >= 3.
    int n_categories = 0;

    int n_thresholds() const { return n_categories - 1; }
};

struct ModelSpec {
    std::vector<VariableSpec> variables;
    int K1 = 1;   // dim of eta
    int K2 = 0;   // dim of xi; 0 disables the missingness model entirely
    int p = 0;    // covariate dim
    bool ignorable = true;  // kappa fixed at zero when true

    int J() const { return static_cast<int>(variables.size()); }
    bool models_missingness() const { return K2 >= 1; }

    // Zero constraints on loadings: alpha_{jk} = 0 and gamma_{jk} = 0 for
    // factor k > variable j (both 1-based), so variable j carries
    // min(j, K) free loadings.
    int free_alpha_count(int j) const { return std::min(j + 1, K1); }
    int free_gamma_count(int j) const { return K2 >= 1 ? std::min(j + 1, K2) : 0; }

    void validate() const;  // throws ValidationError
};

// Per-unit working state for the Gibbs machinery. y holds the current
// completion: observed entries are fixed, missing slots carry imputations.
struct UnitState {
    Eigen::VectorXd y;
    std::vector<std::uint8_t> z;  // 1 = observed
    Eigen::VectorXd x;
    Eigen::VectorXd eta;
    Eigen::VectorXd xi;
    double weight = 1.0;
};

struct Dataset {
    // NaN marks missing responses; the mask is authoritative.
    Eigen::MatrixXd y;                                        // N x J
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> z;  // N x J
    Eigen::MatrixXd x;                                        // N x p
    Eigen::VectorXd w;                                        // N

    int n() const { return static_cast<int>(y.rows()); }

    // Checks supports against the spec, missingness-mask consistency,
    // weights, and rejects variables with zero observed variance.
    void validate(const ModelSpec& spec) const;

    UnitState unit(int i, const ModelSpec& spec) const;
};

}  // namespace lvmi
