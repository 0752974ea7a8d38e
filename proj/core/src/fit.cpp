#include "lvmi/fit.hpp"

#include <cmath>
#include <vector>

#include "lvmi/gibbs.hpp"
#include "lvmi/model.hpp"
#include "lvmi/parallel.hpp"
#include "lvmi/special.hpp"

namespace lvmi {

void SAConfig::validate() const {
    if (!(burnin > 0 && burnin < iters))
        throw ValidationError("sa config: require 0 < burnin < iters");
    if (!(step_exponent > 0.5 && step_exponent <= 1.0))
        throw ValidationError("sa config: step exponent must lie in (0.5, 1]");
    if (!(step_scale > 0.0)) throw ValidationError("sa config: step scale must be positive");
}

double step_size(int t, const SAConfig& cfg) {
    if (t < 1) throw ValidationError("step_size: t must be >= 1");
    return cfg.step_scale * std::pow(static_cast<double>(t), -cfg.step_exponent);
}

namespace {

double clamp_logit(double p, double bound) {
    const double eps = 1e-6;
    const double v = std::log(std::min(std::max(p, eps), 1.0 - eps) /
                              (1.0 - std::min(std::max(p, eps), 1.0 - eps)));
    return std::min(std::max(v, -bound), bound);
}

}  // namespace

Psi init_psi(const Dataset& data, const ModelSpec& spec, RngStream& rng) {
    Psi psi = Psi::zeros(spec);
    const int N = data.n();
    for (int j = 0; j < spec.J(); ++j) {
        const auto& v = spec.variables[j];
        std::vector<double> obs;
        obs.reserve(N);
        for (int i = 0; i < N; ++i)
            if (data.z(i, j)) obs.push_back(data.y(i, j));
        const double n_obs = static_cast<double>(obs.size());
        switch (v.kind) {
            case VarKind::Continuous: {
                double mean = 0.0;
                for (double t : obs) mean += t;
                mean /= n_obs;
                double var = 0.0;
                for (double t : obs) var += (t - mean) * (t - mean);
                var /= std::max(n_obs - 1.0, 1.0);
                psi.alpha0[j] = mean;
                psi.sigma[j] = std::sqrt(std::max(var, 1e-8));
                break;
            }
            case VarKind::Binary: {
                double ones = 0.0;
                for (double t : obs) ones += t;
                psi.alpha0[j] = clamp_logit(ones / n_obs, 3.0);
                break;
            }
            case VarKind::Ordinal: {
                // a_k = logit P(y < k) from observed cumulative frequencies,
                // nudged apart where categories are thin.
                const int M = v.n_thresholds();
                std::vector<double> counts(v.n_categories, 0.0);
                for (double t : obs) counts[static_cast<int>(t)] += 1.0;
                double below = 0.0;
                double prev = -1e9;
                for (int k = 1; k <= M; ++k) {
                    below += counts[k - 1];
                    double a = clamp_logit(below / n_obs, 5.0);
                    if (a < prev + 0.05) a = prev + 0.05;
                    psi.thresholds[j][k - 1] = a;
                    prev = a;
                }
                break;
            }
        }
        for (int k = 0; k < spec.free_alpha_count(j); ++k)
            psi.alpha(j, k) = rng.uniform(-0.5, 0.5);
        if (spec.models_missingness()) {
            double observed = 0.0;
            for (int i = 0; i < N; ++i) observed += data.z(i, j) != 0;
            psi.gamma0[j] = clamp_logit(observed / N, 5.0);
            for (int k = 0; k < spec.free_gamma_count(j); ++k)
                psi.gamma(j, k) = rng.uniform(-0.1, 0.1);
        }
    }
    for (int l = 0; l < spec.p; ++l)
        for (int k = 0; k < spec.K1; ++k) psi.beta(k, l) = rng.uniform(-0.1, 0.1);
    if (spec.models_missingness()) {
        for (int l = 0; l < spec.p; ++l)
            for (int k = 0; k < spec.K2; ++k) psi.zeta(k, l) = rng.uniform(-0.1, 0.1);
        if (!spec.ignorable)
            for (int l = 0; l < spec.K1; ++l)
                for (int k = 0; k < spec.K2; ++k) psi.kappa(k, l) = rng.uniform(-0.1, 0.1);
    }
    return apply_constraints(psi);
}

FitResult fit(const Dataset& data, const ModelSpec& spec, const SAConfig& cfg) {
    cfg.validate();
    data.validate(spec);
    const ParamLayout layout(spec);
    const int dim = layout.dim();
    const int N = data.n();
    const SweepPlan plan = SweepPlan::for_spec(spec);

    RngStream init_rng(cfg.seed, Phase::FitInit, 0);
    Psi psi = init_psi(data, spec, init_rng);
    Eigen::VectorXd theta = layout.pack_unconstrained(psi);  // optimizer coordinates

    // Unit states with initialized missing values; per-unit streams persist
    // across iterations so worker scheduling cannot change the draws.
    Eigen::MatrixXd y0 = data.y;
    init_missing_values(y0, data.z, spec);
    std::vector<UnitState> units(N);
    std::vector<AugmentedState> augs(N);
    std::vector<RngStream> streams(N);
    for (int i = 0; i < N; ++i) {
        units[i] = data.unit(i, spec);
        units[i].y = y0.row(i).transpose();
        augs[i] = AugmentedState::init(psi, units[i]);
        streams[i] = RngStream(cfg.seed, Phase::FitSweep, static_cast<std::uint64_t>(i));
    }

    const int n_chunks = chunk_count(N);
    Eigen::MatrixXd chunk_grads(dim, n_chunks);

    const double clip_norm = cfg.clip_multiple * std::sqrt(static_cast<double>(dim));
    int clip_activations = 0;
    int last_clip_iteration = 0;

    Eigen::MatrixXd trace;
    if (cfg.record_trace) trace.resize(cfg.iters, dim);
    Eigen::MatrixXd window;  // natural-scale snapshots for diagnostics
    const int window_len = std::min(500, cfg.iters);
    window.resize(window_len, dim);

    Eigen::VectorXd theta_sum = Eigen::VectorXd::Zero(dim);

    std::vector<GibbsWorkspace> workspaces;
    const int workers = resolve_workers(cfg.workers);
    for (int w = 0; w < std::max(workers, 1); ++w) workspaces.emplace_back(spec);

    for (int t = 1; t <= cfg.iters; ++t) {
        const Psi psi_snapshot = psi;
        parallel_chunks(N, workers, [&](int worker, int chunk, int begin, int end) {
            GibbsWorkspace& ws = workspaces[worker];
            Eigen::VectorXd local = Eigen::VectorXd::Zero(dim);
            for (int i = begin; i < end; ++i) {
                gibbs_sweep(units[i], augs[i], psi_snapshot, plan, streams[i], ws);
                add_complete_score(psi_snapshot, units[i], layout, local);
            }
            chunk_grads.col(chunk) = local;
        });
        Eigen::VectorXd grad_nat = Eigen::VectorXd::Zero(dim);
        for (int c = 0; c < n_chunks; ++c) grad_nat += chunk_grads.col(c);

        if (!grad_nat.allFinite()) {
            for (int d = 0; d < dim; ++d) {
                if (!std::isfinite(grad_nat[d]))
                    throw NumericError("fit: non-finite gradient at iteration " +
                                       std::to_string(t) + " in parameter block '" +
                                       layout.blocks()[d] + "' (" + layout.names()[d] + ")");
            }
        }

        Eigen::VectorXd update =
            step_size(t, cfg) * layout.grad_to_unconstrained(grad_nat, psi);
        const double norm = update.norm();
        bool clipped = false;
        if (norm > clip_norm) {
            update *= clip_norm / norm;
            clipped = true;
        }
        for (int d = 0; d < dim; ++d) {
            if (std::abs(update[d]) > cfg.coord_cap) {
                update[d] = update[d] > 0 ? cfg.coord_cap : -cfg.coord_cap;
                clipped = true;
            }
        }
        clip_activations += clipped;
        if (clipped) last_clip_iteration = t;
        theta += update;
        psi = layout.unpack_unconstrained(theta);

        if (t > cfg.burnin) theta_sum += theta;
        if (cfg.record_trace) trace.row(t - 1) = layout.pack_natural(psi).transpose();
        if (t > cfg.iters - window_len)
            window.row(t - (cfg.iters - window_len) - 1) = layout.pack_natural(psi).transpose();
    }

    FitResult result;
    const double denom = static_cast<double>(cfg.iters - cfg.burnin);
    result.psi_hat = apply_constraints(layout.unpack_unconstrained(theta_sum / denom));
    result.clip_activations = clip_activations;
    result.last_clip_iteration = last_clip_iteration;
    if (cfg.record_trace) result.trace = std::move(trace);

    // Per-block trace means over the final window, with half-window drift
    // as a cheap stationarity check.
    const int half = window_len / 2;
    std::vector<std::string> block_order;
    for (const auto& b : layout.blocks())
        if (block_order.empty() || block_order.back() != b) block_order.push_back(b);
    for (const auto& block : block_order) {
        BlockDiagnostic diag;
        diag.block = block;
        double sum = 0.0, sum1 = 0.0, sum2 = 0.0;
        int count = 0;
        for (int d = 0; d < dim; ++d) {
            if (layout.blocks()[d] != block) continue;
            sum += window.col(d).mean();
            sum1 += window.col(d).head(half).mean();
            sum2 += window.col(d).tail(window_len - half).mean();
            ++count;
        }
        diag.trace_mean = sum / count;
        diag.half_window_drift = std::abs(sum2 - sum1) / count;
        result.diagnostics.push_back(diag);
    }
    return result;
}

}  // namespace lvmi
