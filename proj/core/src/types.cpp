#include "lvmi/types.hpp"

#include <cmath>
#include <set>

namespace lvmi {

std::string to_string(VarKind kind) {
    switch (kind) {
        case VarKind::Continuous: return "continuous";
        case VarKind::Binary: return "binary";
        case VarKind::Ordinal: return "ordinal";
    }
    return "unknown";
}

VarKind var_kind_from_string(const std::string& s) {
    if (s == "continuous") return VarKind::Continuous;
    if (s == "binary") return VarKind::Binary;
    if (s == "ordinal") return VarKind::Ordinal;
    throw ValidationError("unknown variable kind '" + s + "' (expected continuous|binary|ordinal)");
}

void ModelSpec::validate() const {
    if (variables.empty()) throw ValidationError("model spec: need at least one variable");
    if (K1 < 1) throw ValidationError("model spec: K1 must be >= 1");
    if (K2 < 0) throw ValidationError("model spec: K2 must be >= 0");
    if (p < 0) throw ValidationError("model spec: p must be >= 0");
    if (K2 == 0 && !ignorable)
        throw ValidationError("model spec: K2 = 0 requires ignorable = true");
    std::set<int> seen;
    for (const auto& v : variables) {
        if (v.index < 0 || v.index >= J())
            throw ValidationError("variable index " + std::to_string(v.index) + " out of range");
        if (!seen.insert(v.index).second)
            throw ValidationError("duplicate variable index " + std::to_string(v.index));
        if (v.kind == VarKind::Ordinal && v.n_categories < 3)
            throw ValidationError("ordinal variable " + std::to_string(v.index) +
                                  ": need >= 3 categories (use binary kind for 2)");
        if (v.kind != VarKind::Ordinal && v.n_categories != 0)
            throw ValidationError("variable " + std::to_string(v.index) +
                                  ": n_categories only valid for ordinal kind");
    }
    // Indices must be the identity permutation in storage order; callers
    // construct variables in column order.
    for (int j = 0; j < J(); ++j) {
        if (variables[j].index != j)
            throw ValidationError("variables must be listed in index order");
    }
}

void Dataset::validate(const ModelSpec& spec) const {
    spec.validate();
    const int N = n();
    const int J = spec.J();
    if (y.cols() != J) throw ValidationError("dataset: y has " + std::to_string(y.cols()) +
                                             " columns, spec declares " + std::to_string(J));
    if (z.rows() != N || z.cols() != J) throw ValidationError("dataset: mask shape mismatch");
    if (x.rows() != N || x.cols() != spec.p) throw ValidationError("dataset: covariate shape mismatch");
    if (w.size() != N) throw ValidationError("dataset: weight length mismatch");
    if (N < 1) throw ValidationError("dataset: empty");

    for (int i = 0; i < N; ++i) {
        if (!std::isfinite(w[i]) || w[i] <= 0.0)
            throw ValidationError("dataset: weight for unit " + std::to_string(i) +
                                  " must be positive and finite (weights must be complete)");
        for (int l = 0; l < spec.p; ++l) {
            if (!std::isfinite(x(i, l)))
                throw ValidationError("dataset: covariate (" + std::to_string(i) + "," +
                                      std::to_string(l) + ") not finite (covariates must be complete)");
        }
    }

    for (int j = 0; j < J; ++j) {
        const auto& v = spec.variables[j];
        int observed = 0;
        double first = 0.0;
        bool constant = true;
        for (int i = 0; i < N; ++i) {
            const bool obs = z(i, j) != 0;
            const double val = y(i, j);
            if (!obs) {
                if (!std::isnan(val))
                    throw ValidationError("dataset: cell (" + std::to_string(i) + "," +
                                          std::to_string(j) + ") masked missing but carries a value");
                continue;
            }
            if (!std::isfinite(val))
                throw ValidationError("dataset: observed cell (" + std::to_string(i) + "," +
                                      std::to_string(j) + ") not finite");
            switch (v.kind) {
                case VarKind::Continuous:
                    break;
                case VarKind::Binary:
                    if (val != 0.0 && val != 1.0)
                        throw ValidationError("dataset: binary variable " + std::to_string(j) +
                                              " has value " + std::to_string(val) + " at row " +
                                              std::to_string(i));
                    break;
                case VarKind::Ordinal: {
                    const double r = std::round(val);
                    if (r != val || r < 0.0 || r > v.n_categories - 1)
                        throw ValidationError("dataset: ordinal variable " + std::to_string(j) +
                                              " has out-of-support value " + std::to_string(val) +
                                              " at row " + std::to_string(i));
                    break;
                }
            }
            if (observed == 0) {
                first = val;
            } else if (val != first) {
                constant = false;
            }
            ++observed;
        }
        if (observed == 0)
            throw ValidationError("dataset: variable " + std::to_string(j) + " has no observed values");
        if (constant)
            throw ValidationError("dataset: variable " + std::to_string(j) +
                                  " has zero observed variance; its loadings are unidentifiable — "
                                  "drop or recode it");
    }
}

UnitState Dataset::unit(int i, const ModelSpec& spec) const {
    UnitState u;
    u.y = y.row(i).transpose();
    u.z.resize(spec.J());
    for (int j = 0; j < spec.J(); ++j) u.z[j] = z(i, j);
    u.x = x.row(i).transpose();
    u.eta = Eigen::VectorXd::Zero(spec.K1);
    u.xi = Eigen::VectorXd::Zero(spec.K2);
    u.weight = w[i];
    return u;
}

}  // namespace lvmi
