#include "lvmi/impute.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "lvmi/gibbs.hpp"
#include "lvmi/model.hpp"
#include "lvmi/parallel.hpp"

namespace lvmi {

void ImputeConfig::validate() const {
    if (!(burnin > 0 && burnin < iters))
        throw ValidationError("impute config: require 0 < burnin < iters");
    if (thin < 1) throw ValidationError("impute config: thin must be >= 1");
    if ((iters - burnin) % thin != 0)
        throw ValidationError("impute config: iters - burnin must be divisible by thin");
    if (n_imputations() < 2)
        throw ValidationError("impute config: need at least 2 imputations, got " +
                              std::to_string(n_imputations()));
}

Eigen::MatrixXd louis_information(const Eigen::MatrixXd& s_bar_obs,
                                  const Eigen::MatrixXd& sum_mean_h_plus_ss) {
    const int n = static_cast<int>(s_bar_obs.rows());
    Eigen::MatrixXd acc = -sum_mean_h_plus_ss;
    acc.selfadjointView<Eigen::Lower>().rankUpdate(s_bar_obs.transpose(), 1.0);
    acc.triangularView<Eigen::StrictlyUpper>() =
        acc.transpose().triangularView<Eigen::StrictlyUpper>();
    acc /= static_cast<double>(n);
    return 0.5 * (acc + acc.transpose());
}

ImputationOutput impute(const Dataset& data, const Psi& psi_hat, const ImputeConfig& cfg) {
    cfg.validate();
    psi_hat.validate();
    const ModelSpec& spec = psi_hat.spec;
    data.validate(spec);

    const ParamLayout layout(spec);
    const int dim = layout.dim();
    const int N = data.n();
    const int M = cfg.n_imputations();
    const int kept = cfg.iters - cfg.burnin;
    const SweepPlan plan = SweepPlan::for_spec(spec);

    ImputationOutput out;
    out.psi_hat = psi_hat;
    out.config = cfg;
    out.x = data.x;
    out.weights = data.w;
    out.mask = data.z;
    out.datasets.assign(M, Eigen::MatrixXd::Zero(N, spec.J()));
    out.eta_m.assign(M, Eigen::MatrixXd::Zero(N, spec.K1));
    out.xi_m.assign(M, Eigen::MatrixXd::Zero(N, spec.K2));
    out.scores_m.assign(M, Eigen::MatrixXd::Zero(N, dim));
    out.s_bar_obs = Eigen::MatrixXd::Zero(N, dim);

    Eigen::MatrixXd y0 = data.y;
    init_missing_values(y0, data.z, spec);

    const int n_chunks = chunk_count(N);
    std::vector<Eigen::MatrixXd> chunk_louis(n_chunks);

    parallel_chunks(N, cfg.workers, [&](int /*worker*/, int chunk, int begin, int end) {
        GibbsWorkspace ws(spec);
        Eigen::VectorXd score(dim);
        Eigen::MatrixXd louis_acc = Eigen::MatrixXd::Zero(dim, dim);  // sum_t (H + S S')
        Eigen::MatrixXd chunk_acc = Eigen::MatrixXd::Zero(dim, dim);
        for (int i = begin; i < end; ++i) {
            UnitState unit = data.unit(i, spec);
            unit.y = y0.row(i).transpose();
            AugmentedState aug = AugmentedState::init(psi_hat, unit);
            RngStream rng(cfg.seed, Phase::ImputeSweep, static_cast<std::uint64_t>(i));
            louis_acc.setZero();
            Eigen::VectorXd s_sum = Eigen::VectorXd::Zero(dim);
            int t = 1;
            try {
                for (; t <= cfg.iters; ++t) {
                    gibbs_sweep(unit, aug, psi_hat, plan, rng, ws);
                    if (t <= cfg.burnin) continue;
                    score.setZero();
                    add_complete_score(psi_hat, unit, layout, score);
                    s_sum += score;
                    louis_acc.selfadjointView<Eigen::Lower>().rankUpdate(score, 1.0);
                    add_complete_hessian(psi_hat, unit, layout, louis_acc);
                    const int since_burnin = t - cfg.burnin;
                    if (since_burnin % cfg.thin == 0) {
                        const int m = since_burnin / cfg.thin - 1;
                        out.datasets[m].row(i) = unit.y.transpose();
                        out.eta_m[m].row(i) = unit.eta.transpose();
                        out.xi_m[m].row(i) = unit.xi.transpose();
                        out.scores_m[m].row(i) = score.transpose();
                    }
                }
            } catch (const NumericError& e) {
                throw NumericError("impute: unit " + std::to_string(i) + ", iteration " +
                                   std::to_string(t) + ": " + e.what());
            }
            out.s_bar_obs.row(i) = s_sum.transpose() / static_cast<double>(kept);
            chunk_acc += louis_acc / static_cast<double>(kept);
        }
        chunk_louis[chunk] = std::move(chunk_acc);
    });

    // Deterministic ordered reduction over chunks, then the Louis plug-in.
    Eigen::MatrixXd sum_mean = Eigen::MatrixXd::Zero(dim, dim);
    for (int c = 0; c < n_chunks; ++c) sum_mean += chunk_louis[c];
    sum_mean.triangularView<Eigen::StrictlyUpper>() =
        sum_mean.transpose().triangularView<Eigen::StrictlyUpper>();
    out.i_obs = louis_information(out.s_bar_obs, sum_mean);

    if (!out.i_obs.allFinite())
        throw NumericError("impute: non-finite observed-information accumulation");
    return out;
}

}  // namespace lvmi
