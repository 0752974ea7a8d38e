#include "lvmi/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lvmi/model.hpp"
#include "lvmi/parallel.hpp"
#include "lvmi/special.hpp"

namespace lvmi {

namespace {

// Per-unit log of the self-normalized importance mean and the relative MC
// variance of the weights, using the latent prior as proposal. Latents are
// drawn by reparameterizing fixed standard normals so the estimate is a
// smooth function of psi under common random numbers.
struct UnitIsResult {
    double log_mean = 0.0;
    double var_of_log = 0.0;
};

UnitIsResult unit_is_loglik(const Dataset& data, int i, const Psi& psi, int S,
                            std::uint64_t seed) {
    const ModelSpec& spec = psi.spec;
    RngStream rng(seed, Phase::IsLoglik, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd x = data.x.row(i).transpose();
    Eigen::VectorXd eta_mean = Eigen::VectorXd::Zero(spec.K1);
    if (spec.p > 0) eta_mean = psi.beta * x;

    std::vector<double> logw(S);
    double max_lw = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd eta(spec.K1), xi(spec.K2);
    for (int s = 0; s < S; ++s) {
        for (int k = 0; k < spec.K1; ++k) eta[k] = eta_mean[k] + rng.normal();
        if (spec.models_missingness()) {
            xi = psi.kappa * eta;
            if (spec.p > 0) xi += psi.zeta * x;
            for (int k = 0; k < spec.K2; ++k) xi[k] += rng.normal();
        }
        double lw = 0.0;
        for (int j = 0; j < spec.J(); ++j) {
            if (data.z(i, j)) lw += measurement_logprob(psi, j, data.y(i, j), eta);
            if (spec.models_missingness())
                lw += missingness_logprob(psi, j, data.z(i, j), xi);
        }
        logw[s] = lw;
        max_lw = std::max(max_lw, lw);
    }
    if (!std::isfinite(max_lw))
        throw NumericError("estimate_observed_loglik: all importance weights underflowed for unit " +
                           std::to_string(i));
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < S; ++s) {
        const double v = std::exp(logw[s] - max_lw);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / S;
    const double var = std::max(sum_sq / S - mean * mean, 0.0);
    UnitIsResult out;
    out.log_mean = max_lw + std::log(mean);
    // Delta method: var(log wbar) ~ var(w) / (S * wbar^2).
    out.var_of_log = var / (static_cast<double>(S) * mean * mean);
    return out;
}

}  // namespace

std::pair<double, double> estimate_observed_loglik(const Dataset& data, const Psi& psi,
                                                   int n_samples, std::uint64_t seed,
                                                   int workers) {
    if (n_samples < 1000)
        throw ValidationError("estimate_observed_loglik: need at least 1000 samples");
    psi.validate();
    const int N = data.n();
    const int n_chunks = chunk_count(N);
    std::vector<double> chunk_sum(n_chunks, 0.0), chunk_var(n_chunks, 0.0);
    parallel_chunks(N, workers, [&](int /*worker*/, int chunk, int begin, int end) {
        double total = 0.0, var = 0.0;
        for (int i = begin; i < end; ++i) {
            const UnitIsResult r = unit_is_loglik(data, i, psi, n_samples, seed);
            total += r.log_mean;
            var += r.var_of_log;
        }
        chunk_sum[chunk] = total;
        chunk_var[chunk] = var;
    });
    double total = 0.0, var = 0.0;
    for (int c = 0; c < n_chunks; ++c) {
        total += chunk_sum[c];
        var += chunk_var[c];
    }
    return {total, std::sqrt(var)};
}

SelectionResult select_dimensions(const Dataset& data, const ModelSpec& base,
                                  const std::vector<std::pair<int, int>>& grid,
                                  const SAConfig& sa_cfg, int n_samples) {
    if (grid.empty()) throw ValidationError("select_dimensions: empty grid");
    const double log_n = std::log(static_cast<double>(data.n()));

    SelectionResult result;
    for (const auto& [k1, k2] : grid) {
        ModelSpec spec = base;
        spec.K1 = k1;
        spec.K2 = k2;
        spec.ignorable = (k2 == 0) ? true : base.ignorable;
        BicRow row;
        row.K1 = k1;
        row.K2 = k2;
        try {
            spec.validate();
            row.n_params = count_free_params(spec);
            SAConfig cell_cfg = sa_cfg;
            cell_cfg.seed = mix_seed(sa_cfg.seed, stream_id(Phase::Test,
                                                            (static_cast<std::uint64_t>(k1) << 16) | k2));
            const FitResult fitres = fit(data, spec, cell_cfg);
            const auto [ll, se] =
                estimate_observed_loglik(data, fitres.psi_hat, n_samples, cell_cfg.seed,
                                         sa_cfg.workers);
            row.loglik_hat = ll;
            row.loglik_se = se;
            row.bic = -2.0 * ll + log_n * row.n_params;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        result.rows.push_back(row);
    }
    std::stable_sort(result.rows.begin(), result.rows.end(), [](const BicRow& a, const BicRow& b) {
        if (a.failed != b.failed) return !a.failed;
        if (a.failed) return false;
        if (a.bic != b.bic) return a.bic < b.bic;
        if (a.K1 + a.K2 != b.K1 + b.K2) return a.K1 + a.K2 < b.K1 + b.K2;
        return a.K1 < b.K1;
    });
    result.argmin_index = (!result.rows.empty() && !result.rows.front().failed) ? 0 : -1;
    return result;
}

LrtResult lr_test_ignorability(const Dataset& data, const ModelSpec& base,
                               const SAConfig& sa_cfg, int n_samples) {
    if (base.K2 < 1) throw ValidationError("lr_test_ignorability: requires K2 >= 1");

    ModelSpec full = base;
    full.ignorable = false;
    ModelSpec null = base;
    null.ignorable = true;

    const FitResult fit_full = fit(data, full, sa_cfg);
    const FitResult fit_null = fit(data, null, sa_cfg);

    // Common random numbers: same IS seed and sample count for both models.
    const auto [ll1, se1] =
        estimate_observed_loglik(data, fit_full.psi_hat, n_samples, sa_cfg.seed, sa_cfg.workers);
    const auto [ll0, se0] =
        estimate_observed_loglik(data, fit_null.psi_hat, n_samples, sa_cfg.seed, sa_cfg.workers);

    LrtResult out;
    out.stat = 2.0 * (ll1 - ll0);
    out.df = base.K1 * base.K2;
    out.loglik_full = ll1;
    out.loglik_null = ll0;
    out.se_combined = std::sqrt(se1 * se1 + se0 * se0);
    out.negative_stat_warning = out.stat < -3.0 * 2.0 * out.se_combined;
    out.p_value = chi2_sf(std::max(out.stat, 0.0), static_cast<double>(out.df));
    return out;
}

}  // namespace lvmi
