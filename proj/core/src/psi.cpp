#include "lvmi/psi.hpp"

#include <cmath>

namespace lvmi {

Psi Psi::zeros(const ModelSpec& spec) {
    spec.validate();
    Psi psi;
    psi.spec = spec;
    const int J = spec.J();
    psi.alpha0 = Eigen::VectorXd::Zero(J);
    psi.thresholds.resize(J);
    for (int j = 0; j < J; ++j) {
        const auto& v = spec.variables[j];
        if (v.kind == VarKind::Ordinal) {
            // Unit-spaced defaults keep the ordering invariant satisfied.
            psi.thresholds[j].resize(v.n_thresholds());
            for (int t = 0; t < v.n_thresholds(); ++t)
                psi.thresholds[j][t] = t - 0.5 * (v.n_thresholds() - 1);
        }
    }
    psi.alpha = Eigen::MatrixXd::Zero(J, spec.K1);
    psi.sigma = Eigen::VectorXd::Ones(J);
    if (spec.models_missingness()) {
        psi.gamma0 = Eigen::VectorXd::Zero(J);
        psi.gamma = Eigen::MatrixXd::Zero(J, spec.K2);
    }
    psi.beta = Eigen::MatrixXd::Zero(spec.K1, spec.p);
    psi.zeta = Eigen::MatrixXd::Zero(spec.K2, spec.p);
    psi.kappa = Eigen::MatrixXd::Zero(spec.K2, spec.K1);
    return psi;
}

void Psi::validate() const {
    spec.validate();
    const int J = spec.J();
    if (alpha0.size() != J || alpha.rows() != J || alpha.cols() != spec.K1 ||
        sigma.size() != J || static_cast<int>(thresholds.size()) != J)
        throw ValidationError("psi: measurement parameter shapes do not match spec");
    if (spec.models_missingness() &&
        (gamma0.size() != J || gamma.rows() != J || gamma.cols() != spec.K2))
        throw ValidationError("psi: missingness parameter shapes do not match spec");
    if (beta.rows() != spec.K1 || beta.cols() != spec.p || zeta.rows() != spec.K2 ||
        zeta.cols() != spec.p || kappa.rows() != spec.K2 || kappa.cols() != spec.K1)
        throw ValidationError("psi: prior coefficient shapes do not match spec");

    for (int j = 0; j < J; ++j) {
        const auto& v = spec.variables[j];
        if (v.kind == VarKind::Continuous && !(sigma[j] > 0.0))
            throw ValidationError("psi: sigma for variable " + std::to_string(j) +
                                  " must be positive");
        if (v.kind == VarKind::Ordinal) {
            if (thresholds[j].size() != v.n_thresholds())
                throw ValidationError("psi: threshold count mismatch at variable " +
                                      std::to_string(j));
            for (int t = 1; t < thresholds[j].size(); ++t)
                if (!(thresholds[j][t] > thresholds[j][t - 1]))
                    throw ValidationError("psi: thresholds for variable " + std::to_string(j) +
                                          " not strictly increasing");
        }
        for (int k = spec.free_alpha_count(j); k < spec.K1; ++k)
            if (alpha(j, k) != 0.0)
                throw ValidationError("psi: constrained loading alpha(" + std::to_string(j) + "," +
                                      std::to_string(k) + ") nonzero");
        if (spec.models_missingness()) {
            for (int k = spec.free_gamma_count(j); k < spec.K2; ++k)
                if (gamma(j, k) != 0.0)
                    throw ValidationError("psi: constrained loading gamma(" + std::to_string(j) +
                                          "," + std::to_string(k) + ") nonzero");
        }
    }
    if (spec.ignorable && kappa.size() > 0 && kappa.cwiseAbs().maxCoeff() != 0.0)
        throw ValidationError("psi: kappa must be zero under an ignorable spec");
}

Psi apply_constraints(Psi psi) {
    const ModelSpec& spec = psi.spec;
    const int J = spec.J();
    for (int j = 0; j < J; ++j) {
        for (int k = spec.free_alpha_count(j); k < spec.K1; ++k) psi.alpha(j, k) = 0.0;
        if (spec.models_missingness())
            for (int k = spec.free_gamma_count(j); k < spec.K2; ++k) psi.gamma(j, k) = 0.0;
    }
    if (spec.ignorable) psi.kappa.setZero();
    // Round-trip through the unconstrained coordinates repairs sigma
    // positivity and threshold ordering where representable.
    ParamLayout layout(spec);
    return layout.unpack_unconstrained(layout.pack_unconstrained(psi));
}

namespace {

std::string var_label(int j) { return "y" + std::to_string(j + 1); }

}  // namespace

ParamLayout::ParamLayout(const ModelSpec& spec) : spec_(spec) {
    spec_.validate();
    const int J = spec_.J();
    meas_offset_.assign(J, 0);
    miss_offset_.assign(J, -1);
    int off = 0;
    for (int j = 0; j < J; ++j) {
        const auto& v = spec_.variables[j];
        meas_offset_[j] = off;
        const std::string lbl = var_label(j);
        switch (v.kind) {
            case VarKind::Continuous:
                names_.push_back(lbl + ".alpha0");
                break;
            case VarKind::Binary:
                names_.push_back(lbl + ".alpha0");
                break;
            case VarKind::Ordinal:
                for (int t = 0; t < v.n_thresholds(); ++t)
                    names_.push_back(lbl + ".thr" + std::to_string(t + 1));
                break;
        }
        for (int k = 0; k < spec_.free_alpha_count(j); ++k)
            names_.push_back(lbl + ".alpha" + std::to_string(k + 1));
        if (v.kind == VarKind::Continuous) names_.push_back(lbl + ".sigma");
        while (static_cast<int>(blocks_.size()) < static_cast<int>(names_.size()))
            blocks_.push_back(lbl);
        off = static_cast<int>(names_.size());
    }
    if (spec_.models_missingness()) {
        for (int j = 0; j < J; ++j) {
            miss_offset_[j] = static_cast<int>(names_.size());
            const std::string lbl = "z" + std::to_string(j + 1);
            names_.push_back(lbl + ".gamma0");
            for (int k = 0; k < spec_.free_gamma_count(j); ++k)
                names_.push_back(lbl + ".gamma" + std::to_string(k + 1));
            while (static_cast<int>(blocks_.size()) < static_cast<int>(names_.size()))
                blocks_.push_back(lbl);
        }
    }
    beta_offset_ = static_cast<int>(names_.size());
    for (int l = 0; l < spec_.p; ++l)
        for (int k = 0; k < spec_.K1; ++k) {
            names_.push_back("beta." + std::to_string(k + 1) + "." + std::to_string(l + 1));
            blocks_.push_back("beta");
        }
    zeta_offset_ = static_cast<int>(names_.size());
    if (spec_.models_missingness()) {
        for (int l = 0; l < spec_.p; ++l)
            for (int k = 0; k < spec_.K2; ++k) {
                names_.push_back("zeta." + std::to_string(k + 1) + "." + std::to_string(l + 1));
                blocks_.push_back("zeta");
            }
    }
    if (spec_.models_missingness() && !spec_.ignorable) {
        kappa_offset_ = static_cast<int>(names_.size());
        for (int l = 0; l < spec_.K1; ++l)
            for (int k = 0; k < spec_.K2; ++k) {
                names_.push_back("kappa." + std::to_string(k + 1) + "." + std::to_string(l + 1));
                blocks_.push_back("kappa");
            }
    }
    dim_ = static_cast<int>(names_.size());
}

int ParamLayout::loading_index(int j, int k) const {
    const auto& v = spec_.variables[j];
    const int head = (v.kind == VarKind::Ordinal) ? v.n_thresholds() : 1;
    return meas_offset_[j] + head + k;
}

int ParamLayout::sigma_index(int j) const {
    return meas_offset_[j] + 1 + spec_.free_alpha_count(j);
}

Eigen::VectorXd ParamLayout::pack_natural(const Psi& psi) const {
    Eigen::VectorXd v(dim_);
    const int J = spec_.J();
    for (int j = 0; j < J; ++j) {
        const auto& var = spec_.variables[j];
        if (var.kind == VarKind::Ordinal) {
            for (int t = 0; t < var.n_thresholds(); ++t)
                v[threshold_index(j, t)] = psi.thresholds[j][t];
        } else {
            v[intercept_index(j)] = psi.alpha0[j];
        }
        for (int k = 0; k < spec_.free_alpha_count(j); ++k)
            v[loading_index(j, k)] = psi.alpha(j, k);
        if (var.kind == VarKind::Continuous) v[sigma_index(j)] = psi.sigma[j];
        if (spec_.models_missingness()) {
            v[gamma0_index(j)] = psi.gamma0[j];
            for (int k = 0; k < spec_.free_gamma_count(j); ++k)
                v[gamma_index(j, k)] = psi.gamma(j, k);
        }
    }
    for (int l = 0; l < spec_.p; ++l)
        for (int k = 0; k < spec_.K1; ++k) v[beta_index(k, l)] = psi.beta(k, l);
    if (spec_.models_missingness())
        for (int l = 0; l < spec_.p; ++l)
            for (int k = 0; k < spec_.K2; ++k) v[zeta_index(k, l)] = psi.zeta(k, l);
    if (has_kappa_block())
        for (int l = 0; l < spec_.K1; ++l)
            for (int k = 0; k < spec_.K2; ++k) v[kappa_index(k, l)] = psi.kappa(k, l);
    return v;
}

Psi ParamLayout::unpack_natural(const Eigen::VectorXd& v) const {
    if (v.size() != dim_) throw ValidationError("unpack_natural: dimension mismatch");
    Psi psi = Psi::zeros(spec_);
    const int J = spec_.J();
    for (int j = 0; j < J; ++j) {
        const auto& var = spec_.variables[j];
        if (var.kind == VarKind::Ordinal) {
            for (int t = 0; t < var.n_thresholds(); ++t)
                psi.thresholds[j][t] = v[threshold_index(j, t)];
        } else {
            psi.alpha0[j] = v[intercept_index(j)];
        }
        for (int k = 0; k < spec_.free_alpha_count(j); ++k)
            psi.alpha(j, k) = v[loading_index(j, k)];
        if (var.kind == VarKind::Continuous) psi.sigma[j] = v[sigma_index(j)];
        if (spec_.models_missingness()) {
            psi.gamma0[j] = v[gamma0_index(j)];
            for (int k = 0; k < spec_.free_gamma_count(j); ++k)
                psi.gamma(j, k) = v[gamma_index(j, k)];
        }
    }
    for (int l = 0; l < spec_.p; ++l)
        for (int k = 0; k < spec_.K1; ++k) psi.beta(k, l) = v[beta_index(k, l)];
    if (spec_.models_missingness())
        for (int l = 0; l < spec_.p; ++l)
            for (int k = 0; k < spec_.K2; ++k) psi.zeta(k, l) = v[zeta_index(k, l)];
    if (has_kappa_block())
        for (int l = 0; l < spec_.K1; ++l)
            for (int k = 0; k < spec_.K2; ++k) psi.kappa(k, l) = v[kappa_index(k, l)];
    return psi;
}

Eigen::VectorXd ParamLayout::pack_unconstrained(const Psi& psi) const {
    Eigen::VectorXd v = pack_natural(psi);
    for (int j = 0; j < spec_.J(); ++j) {
        const auto& var = spec_.variables[j];
        if (var.kind == VarKind::Continuous) {
            v[sigma_index(j)] = std::log(psi.sigma[j]);
        } else if (var.kind == VarKind::Ordinal) {
            // (first threshold, log-differences); additive updates preserve order.
            for (int t = var.n_thresholds() - 1; t >= 1; --t)
                v[threshold_index(j, t)] =
                    std::log(psi.thresholds[j][t] - psi.thresholds[j][t - 1]);
        }
    }
    return v;
}

Psi ParamLayout::unpack_unconstrained(const Eigen::VectorXd& v) const {
    if (v.size() != dim_) throw ValidationError("unpack_unconstrained: dimension mismatch");
    Eigen::VectorXd nat = v;
    for (int j = 0; j < spec_.J(); ++j) {
        const auto& var = spec_.variables[j];
        if (var.kind == VarKind::Continuous) {
            nat[sigma_index(j)] = std::exp(v[sigma_index(j)]);
        } else if (var.kind == VarKind::Ordinal) {
            for (int t = 1; t < var.n_thresholds(); ++t)
                nat[threshold_index(j, t)] =
                    nat[threshold_index(j, t - 1)] + std::exp(v[threshold_index(j, t)]);
        }
    }
    return unpack_natural(nat);
}

Eigen::VectorXd ParamLayout::grad_to_unconstrained(const Eigen::VectorXd& natural_grad,
                                                   const Psi& at) const {
    if (natural_grad.size() != dim_)
        throw ValidationError("grad_to_unconstrained: dimension mismatch");
    Eigen::VectorXd g = natural_grad;
    for (int j = 0; j < spec_.J(); ++j) {
        const auto& var = spec_.variables[j];
        if (var.kind == VarKind::Continuous) {
            g[sigma_index(j)] *= at.sigma[j];  // d sigma / d log sigma
        } else if (var.kind == VarKind::Ordinal) {
            const int M = var.n_thresholds();
            // a_t = c_1 + sum_{s<=t} exp(d_s): dl/dc_1 = sum_t dl/da_t,
            // dl/dd_t = exp(d_t) * sum_{s>=t} dl/da_s.
            double tail = 0.0;
            for (int t = M - 1; t >= 1; --t) {
                tail += natural_grad[threshold_index(j, t)];
                g[threshold_index(j, t)] =
                    tail * (at.thresholds[j][t] - at.thresholds[j][t - 1]);
            }
            g[threshold_index(j, 0)] = tail + natural_grad[threshold_index(j, 0)];
        }
    }
    return g;
}

int count_free_params(const ModelSpec& spec) {
    spec.validate();
    int count = 0;
    for (int j = 0; j < spec.J(); ++j) {
        const auto& v = spec.variables[j];
        switch (v.kind) {
            case VarKind::Continuous: count += 2 + spec.free_alpha_count(j); break;
            case VarKind::Binary: count += 1 + spec.free_alpha_count(j); break;
            case VarKind::Ordinal: count += v.n_thresholds() + spec.free_alpha_count(j); break;
        }
    }
    if (spec.models_missingness()) {
        for (int j = 0; j < spec.J(); ++j) count += 1 + spec.free_gamma_count(j);
        count += spec.K2 * spec.p;
        if (!spec.ignorable) count += spec.K1 * spec.K2;
    }
    count += spec.K1 * spec.p;
    return count;
}

}  // namespace lvmi
