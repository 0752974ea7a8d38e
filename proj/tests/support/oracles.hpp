#pragma once

// Independent Monte Carlo oracles used to check the implementation paths:
// the truncated-series Polya-Gamma sampler, and importance-sampling
// estimates of observed-data scores and expectations built directly from
// the model densities with the latent prior as proposal. These stay
// independent of the Gibbs/score machinery they validate (they share only
// the elementary log-density functions).

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "lvmi/model.hpp"
#include "lvmi/psi.hpp"
#include "lvmi/rng.hpp"
#include "lvmi/types.hpp"

namespace lvmi::test {

// PG(b, c) via the weighted-gamma series truncated at `terms`.
inline double pg_series_draw(int b, double c, RngStream& rng, int terms = 200) {
    const double c2 = c * c / (4.0 * M_PI * M_PI);
    double sum = 0.0;
    for (int k = 1; k <= terms; ++k) {
        double g = rng.exponential();
        if (b == 2) g += rng.exponential();
        const double km = k - 0.5;
        sum += g / (km * km + c2);
    }
    return sum / (2.0 * M_PI * M_PI);
}

// Reparameterized prior draw shared by the IS oracles: eta = beta x + e1,
// xi = zeta x + kappa eta + e2, smooth in psi for fixed standard normals.
inline void draw_prior_latents(const Psi& psi, const Eigen::VectorXd& x, RngStream& rng,
                               Eigen::VectorXd& eta, Eigen::VectorXd& xi) {
    const ModelSpec& spec = psi.spec;
    eta.resize(spec.K1);
    for (int k = 0; k < spec.K1; ++k) eta[k] = rng.normal();
    if (spec.p > 0) eta += psi.beta * x;
    xi.resize(spec.K2);
    if (spec.models_missingness()) {
        for (int k = 0; k < spec.K2; ++k) xi[k] = rng.normal();
        xi += psi.kappa * eta;
        if (spec.p > 0) xi += psi.zeta * x;
    }
}

inline double log_is_weight(const Psi& psi, const UnitState& unit, const Eigen::VectorXd& eta,
                            const Eigen::VectorXd& xi) {
    double lw = 0.0;
    for (int j = 0; j < psi.spec.J(); ++j) {
        if (unit.z[j]) lw += measurement_logprob(psi, j, unit.y[j], eta);
        if (psi.spec.models_missingness())
            lw += missingness_logprob(psi, j, unit.z[j], xi);
    }
    return lw;
}

struct IsVector {
    Eigen::VectorXd mean;
    Eigen::VectorXd se;
};

// Self-normalized IS estimate of E[S_i | y_obs, z, x; psi]: weights from the
// observed factors, missing responses redrawn from the measurement models.
inline IsVector is_observed_score(const Psi& psi, const UnitState& unit_obs,
                                  const ParamLayout& layout, int S, std::uint64_t seed,
                                  std::uint64_t stream) {
    RngStream rng(seed, stream);
    const ModelSpec& spec = psi.spec;
    std::vector<double> logw(S);
    Eigen::MatrixXd scores(S, layout.dim());
    Eigen::VectorXd eta, xi;
    UnitState unit = unit_obs;
    double max_lw = -1e300;
    for (int s = 0; s < S; ++s) {
        draw_prior_latents(psi, unit.x, rng, eta, xi);
        unit.eta = eta;
        unit.xi = xi;
        // Missing responses integrate against their measurement models.
        for (int j = 0; j < spec.J(); ++j) {
            if (unit.z[j]) continue;
            switch (spec.variables[j].kind) {
                case VarKind::Continuous:
                    unit.y[j] = psi.alpha0[j] + psi.alpha.row(j).dot(eta) +
                                psi.sigma[j] * rng.normal();
                    break;
                case VarKind::Binary: {
                    const double pr = 1.0 / (1.0 + std::exp(-(psi.alpha0[j] +
                                                              psi.alpha.row(j).dot(eta))));
                    unit.y[j] = rng.uniform() < pr ? 1.0 : 0.0;
                    break;
                }
                case VarKind::Ordinal: {
                    const double u = psi.alpha.row(j).dot(eta);
                    const double target = rng.uniform();
                    double cum = 0.0;
                    int cat = spec.variables[j].n_categories - 1;
                    for (int k = 0; k < spec.variables[j].n_categories - 1; ++k) {
                        cum += ordinal_category_prob(psi, j, k, u);
                        if (target <= cum) {
                            cat = k;
                            break;
                        }
                    }
                    unit.y[j] = cat;
                    break;
                }
            }
        }
        logw[s] = log_is_weight(psi, unit, eta, xi);
        max_lw = std::max(max_lw, logw[s]);
        scores.row(s) = complete_score(psi, unit, layout).transpose();
    }
    Eigen::VectorXd w(S);
    double wsum = 0.0;
    for (int s = 0; s < S; ++s) {
        w[s] = std::exp(logw[s] - max_lw);
        wsum += w[s];
    }
    w /= wsum;
    IsVector out;
    out.mean = scores.transpose() * w;
    out.se = Eigen::VectorXd::Zero(layout.dim());
    for (int s = 0; s < S; ++s) {
        const Eigen::VectorXd d = scores.row(s).transpose() - out.mean;
        out.se += (w[s] * w[s]) * d.cwiseProduct(d);
    }
    out.se = out.se.cwiseSqrt();
    return out;
}

// Self-normalized IS estimate of E[f(eta, xi) | y_obs, z, x; psi] for a
// scalar functional (used for the chain-stationarity oracle).
struct IsScalar {
    double mean = 0.0;
    double se = 0.0;
};

template <typename F>
inline IsScalar is_posterior_mean(const Psi& psi, const UnitState& unit_obs, int S,
                                  std::uint64_t seed, std::uint64_t stream, F&& f) {
    RngStream rng(seed, stream);
    std::vector<double> logw(S), vals(S);
    Eigen::VectorXd eta, xi;
    double max_lw = -1e300;
    for (int s = 0; s < S; ++s) {
        draw_prior_latents(psi, unit_obs.x, rng, eta, xi);
        logw[s] = log_is_weight(psi, unit_obs, eta, xi);
        vals[s] = f(eta, xi);
        max_lw = std::max(max_lw, logw[s]);
    }
    double wsum = 0.0;
    std::vector<double> w(S);
    for (int s = 0; s < S; ++s) {
        w[s] = std::exp(logw[s] - max_lw);
        wsum += w[s];
    }
    IsScalar out;
    for (int s = 0; s < S; ++s) out.mean += w[s] / wsum * vals[s];
    double var = 0.0;
    for (int s = 0; s < S; ++s) {
        const double wn = w[s] / wsum;
        var += wn * wn * (vals[s] - out.mean) * (vals[s] - out.mean);
    }
    out.se = std::sqrt(var);
    return out;
}

// Batch-means standard error for a correlated chain.
inline double batch_means_se(const std::vector<double>& chain, int n_batches = 50) {
    const int n = static_cast<int>(chain.size());
    const int len = n / n_batches;
    std::vector<double> bm;
    for (int b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (int i = b * len; i < (b + 1) * len; ++i) s += chain[i];
        bm.push_back(s / len);
    }
    double mean = 0.0;
    for (double v : bm) mean += v;
    mean /= bm.size();
    double var = 0.0;
    for (double v : bm) var += (v - mean) * (v - mean);
    var /= (bm.size() - 1.0);
    return std::sqrt(var / bm.size());
}

}  // namespace lvmi::test
