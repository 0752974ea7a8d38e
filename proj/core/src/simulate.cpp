#include "lvmi/simulate.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "lvmi/analysis.hpp"
#include "lvmi/io.hpp"
#include "lvmi/model.hpp"
#include "lvmi/samplers.hpp"
#include "lvmi/special.hpp"

namespace lvmi {

ModelSpec StudyIConfig::model_spec() const {
    ModelSpec spec;
    for (int j = 0; j < j_cont; ++j)
        spec.variables.push_back({j, VarKind::Continuous, 0});
    for (int j = 0; j < j_bin; ++j)
        spec.variables.push_back({j_cont + j, VarKind::Binary, 0});
    spec.K1 = k1;
    spec.K2 = k2;
    spec.p = 0;
    spec.ignorable = ignorable_truth;
    return spec;
}

Psi gen_params_study_I(const StudyIConfig& cfg, RngStream& rng) {
    const ModelSpec spec = cfg.model_spec();
    Psi psi = Psi::zeros(spec);
    // The generating model is unconstrained: every loading is drawn. The
    // zero constraints matter only for the estimated model.
    for (int j = 0; j < spec.J(); ++j) {
        psi.alpha0[j] = rng.normal();
        for (int k = 0; k < spec.K1; ++k) psi.alpha(j, k) = rng.uniform(0.5, 1.5);
        if (spec.variables[j].kind == VarKind::Continuous) psi.sigma[j] = 0.5;
    }
    // The quoted recipe (gamma0 ~ N(-3, 0.5^2), loadings U(0.2, 1.2))
    // parameterizes the missingness probability P(z = 0): that is the only
    // reading consistent with the stated ~7% missing rate. Our h_j models
    // P(z = 1), so the drawn coefficients are stored negated.
    for (int j = 0; j < spec.J(); ++j) {
        psi.gamma0[j] = -(-3.0 + 0.5 * rng.normal());
        for (int k = 0; k < spec.K2; ++k) psi.gamma(j, k) = -rng.uniform(0.2, 1.2);
    }
    if (!cfg.ignorable_truth) {
        for (int k = 0; k < spec.K2; ++k)
            for (int l = 0; l < spec.K1; ++l) psi.kappa(k, l) = rng.uniform(1.0, 2.0);
    }
    return psi;
}

namespace {

// E[y_j | eta] under the measurement model.
double conditional_mean_given_eta(const Psi& psi, int j, const Eigen::VectorXd& eta) {
    const auto& v = psi.spec.variables[j];
    switch (v.kind) {
        case VarKind::Continuous:
            return psi.alpha0[j] + psi.alpha.row(j).dot(eta);
        case VarKind::Binary:
            return sigmoid(psi.alpha0[j] + psi.alpha.row(j).dot(eta));
        case VarKind::Ordinal: {
            const double u = psi.alpha.row(j).dot(eta);
            double m = 0.0;
            for (int k = 1; k < v.n_categories; ++k)
                m += k * ordinal_category_prob(psi, j, k, u);
            return m;
        }
    }
    return 0.0;
}

}  // namespace

TruthRecord compute_truth_latent(const Psi& psi_true, std::uint64_t truth_seed, int mc_draws) {
    const ModelSpec& spec = psi_true.spec;
    if (spec.p != 0)
        throw ValidationError("simulation truth: covariates are not part of the harness");
    const int J = spec.J();
    const int last = J - 1;
    const bool cond_ok = spec.variables[last].kind == VarKind::Binary;

    TruthRecord truth;
    truth.marginal_means = Eigen::VectorXd::Zero(J);
    truth.cond_mean_given0 = Eigen::VectorXd::Zero(J - 1);
    truth.cond_mean_given1 = Eigen::VectorXd::Zero(J - 1);
    truth.cond_var = cond_ok ? last : -1;

    // Continuous means are analytic (E eta = 0); everything else by MC over
    // the eta prior at a fixed seed.
    RngStream rng(truth_seed, Phase::Truth, 0);
    Eigen::VectorXd eta(spec.K1);
    Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(J);
    Eigen::VectorXd cond0_acc = Eigen::VectorXd::Zero(J - 1);
    Eigen::VectorXd cond1_acc = Eigen::VectorXd::Zero(J - 1);
    double p0_acc = 0.0, p1_acc = 0.0;
    for (int s = 0; s < mc_draws; ++s) {
        for (int k = 0; k < spec.K1; ++k) eta[k] = rng.normal();
        double p_last1 = 0.0;
        if (cond_ok)
            p_last1 = sigmoid(psi_true.alpha0[last] + psi_true.alpha.row(last).dot(eta));
        for (int j = 0; j < J; ++j) {
            const double m = conditional_mean_given_eta(psi_true, j, eta);
            mean_acc[j] += m;
            if (cond_ok && j < last) {
                cond0_acc[j] += m * (1.0 - p_last1);
                cond1_acc[j] += m * p_last1;
            }
        }
        p0_acc += 1.0 - p_last1;
        p1_acc += p_last1;
    }
    for (int j = 0; j < J; ++j) {
        const auto& v = spec.variables[j];
        truth.marginal_means[j] =
            (v.kind == VarKind::Continuous) ? psi_true.alpha0[j] : mean_acc[j] / mc_draws;
    }
    if (cond_ok) {
        truth.cond_mean_given0 = cond0_acc / p0_acc;
        truth.cond_mean_given1 = cond1_acc / p1_acc;
    }
    return truth;
}

Dataset draw_dataset_latent(const Psi& psi_true, int n, std::uint64_t data_seed) {
    const ModelSpec& spec = psi_true.spec;
    if (spec.p != 0)
        throw ValidationError("simulation generator: covariates are not part of the harness");
    const int J = spec.J();
    Dataset data;
    data.y.resize(n, J);
    data.z.resize(n, J);
    data.x.resize(n, 0);
    data.w = Eigen::VectorXd::Ones(n);

    Eigen::VectorXd eta(spec.K1), xi(spec.K2);
    for (int i = 0; i < n; ++i) {
        RngStream rng(data_seed, Phase::DataGenData, static_cast<std::uint64_t>(i));
        for (int k = 0; k < spec.K1; ++k) eta[k] = rng.normal();
        if (spec.models_missingness()) {
            xi = psi_true.kappa * eta;
            for (int k = 0; k < spec.K2; ++k) xi[k] += rng.normal();
        }
        for (int j = 0; j < J; ++j) {
            const auto& v = spec.variables[j];
            double value = 0.0;
            switch (v.kind) {
                case VarKind::Continuous:
                    value = psi_true.alpha0[j] + psi_true.alpha.row(j).dot(eta) +
                            psi_true.sigma[j] * rng.normal();
                    break;
                case VarKind::Binary:
                    value = rng.uniform() <
                                    sigmoid(psi_true.alpha0[j] + psi_true.alpha.row(j).dot(eta))
                                ? 1.0
                                : 0.0;
                    break;
                case VarKind::Ordinal: {
                    const double u = psi_true.alpha.row(j).dot(eta);
                    const double target = rng.uniform();
                    double cum = 0.0;
                    int cat = v.n_categories - 1;
                    for (int k = 0; k < v.n_categories - 1; ++k) {
                        cum += ordinal_category_prob(psi_true, j, k, u);
                        if (target <= cum) {
                            cat = k;
                            break;
                        }
                    }
                    value = cat;
                    break;
                }
            }
            bool observed = true;
            if (spec.models_missingness()) {
                const double pr = sigmoid(psi_true.gamma0[j] + psi_true.gamma.row(j).dot(xi));
                observed = rng.uniform() < pr;
            }
            data.z(i, j) = observed ? 1 : 0;
            data.y(i, j) = observed ? value : std::nan("");
        }
    }
    return data;
}

GeneratedData gen_data_latent(const Psi& psi_true, int n, std::uint64_t data_seed,
                              std::uint64_t truth_seed) {
    return {draw_dataset_latent(psi_true, n, data_seed),
            compute_truth_latent(psi_true, truth_seed, 1000000)};
}

StudyIIIConfig StudyIIIConfig::defaults() {
    StudyIIIConfig cfg;
    cfg.precision_gaussian.resize(5, 5);
    cfg.precision_gaussian << 2.92, 0.00, 0.00, -0.46, 2.36,
                              0.00, 0.79, -0.69, 0.00, 0.00,
                              0.00, -0.69, 2.01, -1.22, 0.00,
                              -0.46, 0.00, -1.22, 1.78, 0.00,
                              2.36, 0.00, 0.00, 0.00, 2.46;
    // Transcribed row-wise; enforce exact symmetry.
    cfg.precision_gaussian = 0.5 * (cfg.precision_gaussian +
                                    cfg.precision_gaussian.transpose()).eval();
    cfg.ising_coupling.resize(5, 5);
    cfg.ising_coupling << 0.00, 0.51, -0.76, 0.61, -0.47,
                          0.51, 0.00, 0.00, 0.00, 0.72,
                          -0.76, 0.00, 0.00, 0.00, 0.97,
                          0.61, 0.00, 0.00, 0.00, 0.00,
                          -0.47, 0.72, 0.97, 0.00, 0.00;
    return cfg;
}

void StudyIIIConfig::validate() const {
    if (precision_gaussian.rows() != 5 || precision_gaussian.cols() != 5 ||
        ising_coupling.rows() != 5 || ising_coupling.cols() != 5)
        throw ValidationError("study III: matrices must be 5x5");
    if ((precision_gaussian - precision_gaussian.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("study III: Gaussian precision must be symmetric");
    Eigen::MatrixXd chol = precision_gaussian;
    cholesky_in_place(chol);  // throws CholeskyError when not SPD
    if ((ising_coupling - ising_coupling.transpose()).cwiseAbs().maxCoeff() > 0.0)
        throw ValidationError("study III: Ising coupling must be symmetric");
    if (ising_coupling.diagonal().cwiseAbs().maxCoeff() > 0.0)
        throw ValidationError("study III: Ising coupling must have zero diagonal");
}

ModelSpec StudyIIIConfig::model_spec(int k1, bool ignorable) const {
    ModelSpec spec;
    for (int j = 0; j < 5; ++j) spec.variables.push_back({j, VarKind::Continuous, 0});
    for (int j = 5; j < 10; ++j) spec.variables.push_back({j, VarKind::Binary, 0});
    spec.K1 = k1;
    spec.K2 = 1;
    spec.p = 0;
    spec.ignorable = ignorable;
    return spec;
}

Eigen::VectorXd ising_state_probs(const Eigen::MatrixXd& coupling) {
    Eigen::VectorXd probs(32);
    double total = 0.0;
    for (int s = 0; s < 32; ++s) {
        double energy = 0.0;
        for (int a = 0; a < 5; ++a) {
            if (!((s >> a) & 1)) continue;
            for (int b = a + 1; b < 5; ++b)
                if ((s >> b) & 1) energy += coupling(a, b);
        }
        probs[s] = std::exp(energy);
        total += probs[s];
    }
    return probs / total;
}

GeneratedData gen_data_study_III(const StudyIIIConfig& cfg, int n, std::uint64_t data_seed) {
    cfg.validate();
    const Eigen::VectorXd ising_probs = ising_state_probs(cfg.ising_coupling);
    Eigen::MatrixXd chol = cfg.precision_gaussian;
    cholesky_in_place(chol);

    Dataset data;
    data.y.resize(n, 10);
    data.z.resize(n, 10);
    data.x.resize(n, 0);
    data.w = Eigen::VectorXd::Ones(n);

    Eigen::VectorXd u(5), g(5);
    for (int i = 0; i < n; ++i) {
        RngStream rng(data_seed, Phase::DataGenData, static_cast<std::uint64_t>(i));
        // Gaussian block: solve L' g = u so g ~ N(0, Omega^{-1}).
        for (int k = 0; k < 5; ++k) u[k] = rng.normal();
        for (int k = 4; k >= 0; --k) {
            double s = u[k];
            for (int m = k + 1; m < 5; ++m) s -= chol(m, k) * g[m];
            g[k] = s / chol(k, k);
        }
        // Ising block by exact enumeration.
        const double target = rng.uniform();
        double cum = 0.0;
        int state = 31;
        for (int s = 0; s < 32; ++s) {
            cum += ising_probs[s];
            if (target <= cum) {
                state = s;
                break;
            }
        }
        const double y10 = (state >> 4) & 1;
        for (int j = 0; j < 10; ++j) {
            const double value = (j < 5) ? g[j] : static_cast<double>((state >> (j - 5)) & 1);
            bool observed = true;
            if (j < 9) {
                const double p_miss = (y10 == 1.0) ? cfg.p_miss_given1 : cfg.p_miss_given0;
                observed = rng.uniform() >= p_miss;
            }
            data.z(i, j) = observed ? 1 : 0;
            data.y(i, j) = observed ? value : std::nan("");
        }
    }

    GeneratedData out;
    out.data = std::move(data);
    out.truth.marginal_means = Eigen::VectorXd::Zero(10);
    out.truth.cond_mean_given0 = Eigen::VectorXd::Zero(9);
    out.truth.cond_mean_given1 = Eigen::VectorXd::Zero(9);
    out.truth.cond_var = 9;
    double p1 = 0.0;
    for (int s = 0; s < 32; ++s)
        if ((s >> 4) & 1) p1 += ising_probs[s];
    for (int j = 5; j < 10; ++j) {
        double mean = 0.0, mean0 = 0.0, mean1 = 0.0;
        for (int s = 0; s < 32; ++s) {
            const double yj = (s >> (j - 5)) & 1;
            mean += ising_probs[s] * yj;
            if ((s >> 4) & 1)
                mean1 += ising_probs[s] * yj;
            else
                mean0 += ising_probs[s] * yj;
        }
        out.truth.marginal_means[j] = mean;
        if (j < 9) {
            out.truth.cond_mean_given0[j] = mean0 / (1.0 - p1);
            out.truth.cond_mean_given1[j] = mean1 / p1;
        }
    }
    // Continuous block is independent of the binary block, so conditional
    // means of the continuous variables are zero as well.
    return out;
}

Study study_from_string(const std::string& name) {
    if (name == "I-1") return Study::I1;
    if (name == "I-2") return Study::I2;
    if (name == "II-1") return Study::II1;
    if (name == "II-2") return Study::II2;
    if (name == "III-K1") return Study::III_K1;
    if (name == "III-K4") return Study::III_K4;
    throw ValidationError("unknown study '" + name +
                          "' (expected I-1, I-2, II-1, II-2, III-K1, III-K4)");
}

std::string to_string(Study study) {
    switch (study) {
        case Study::I1: return "I-1";
        case Study::I2: return "I-2";
        case Study::II1: return "II-1";
        case Study::II2: return "II-2";
        case Study::III_K1: return "III-K1";
        case Study::III_K4: return "III-K4";
    }
    return "?";
}

ScaleConfig ScaleConfig::desk() { return ScaleConfig{}; }

ScaleConfig ScaleConfig::paper() {
    ScaleConfig cfg;
    cfg.n = 5000;
    cfg.replicates = 100;
    cfg.fit_iters = 3000;
    cfg.fit_burnin = 1000;
    cfg.imp_iters = 3000;
    cfg.imp_burnin = 1000;
    cfg.imp_thin = 100;  // M = 20
    return cfg;
}

ReplicationSummary run_replication(Study study, const ScaleConfig& scale, std::uint64_t seed,
                                   int workers, bool conditional_means) {
    ReplicationSummary summary;
    summary.study = study;

    const bool is_study_iii = (study == Study::III_K1 || study == Study::III_K4);

    // Truth and generating parameters are fixed across replicates.
    Psi psi_true;  // studies I/II only
    TruthRecord truth;
    ModelSpec assumed;
    StudyIIIConfig cfg3;
    if (is_study_iii) {
        cfg3 = StudyIIIConfig::defaults();
        cfg3.n = scale.n;
        assumed = cfg3.model_spec(study == Study::III_K4 ? 4 : 1, /*ignorable=*/false);
        truth = gen_data_study_III(cfg3, 1, mix_seed(seed, 0x7)).truth;
    } else {
        StudyIConfig cfg;
        cfg.n = scale.n;
        cfg.ignorable_truth = (study == Study::I1 || study == Study::I2);
        cfg.param_seed = mix_seed(seed, 0x9001u);
        RngStream param_rng(cfg.param_seed, Phase::DataGenParams, 0);
        psi_true = gen_params_study_I(cfg, param_rng);
        truth = compute_truth_latent(psi_true, mix_seed(seed, 0x9002u), 1000000);
        ModelSpec spec = cfg.model_spec();
        spec.ignorable = (study == Study::I1 || study == Study::II1);
        assumed = spec;
    }

    const int J = assumed.J();
    std::vector<std::string> estimand_names;
    std::vector<double> estimand_truths;
    for (int j = 0; j < J; ++j) {
        estimand_names.push_back("mean.y" + std::to_string(j + 1));
        estimand_truths.push_back(truth.marginal_means[j]);
    }
    if (conditional_means) {
        for (int v = 0; v <= 1; ++v)
            for (int j = 0, slot = 0; j < J; ++j) {
                if (j == truth.cond_var) continue;
                estimand_names.push_back("condmean.y" + std::to_string(j + 1) + "|y" +
                                         std::to_string(truth.cond_var + 1) + "=" +
                                         std::to_string(v));
                estimand_truths.push_back(v == 0 ? truth.cond_mean_given0[slot]
                                                 : truth.cond_mean_given1[slot]);
                ++slot;
            }
    }
    const int n_estimands = static_cast<int>(estimand_names.size());

    Eigen::MatrixXd estimates(scale.replicates, n_estimands);
    Eigen::MatrixXd ses(scale.replicates, n_estimands);
    std::vector<bool> replicate_ok(scale.replicates, false);

    for (int r = 0; r < scale.replicates; ++r) {
        try {
            const std::uint64_t rep_seed = mix_seed(seed, 0x5e0000u + r);
            Dataset data = is_study_iii
                               ? gen_data_study_III(cfg3, scale.n, rep_seed).data
                               : draw_dataset_latent(psi_true, scale.n, rep_seed);

            SAConfig sa;
            sa.iters = scale.fit_iters;
            sa.burnin = scale.fit_burnin;
            sa.seed = mix_seed(rep_seed, 1);
            sa.workers = workers;
            const FitResult fitres = fit(data, assumed, sa);

            ImputeConfig ic;
            ic.iters = scale.imp_iters;
            ic.burnin = scale.imp_burnin;
            ic.thin = scale.imp_thin;
            ic.seed = mix_seed(rep_seed, 2);
            ic.workers = workers;
            const ImputationOutput imp = impute(data, fitres.psi_hat, ic);

            std::vector<int> all(J);
            for (int j = 0; j < J; ++j) all[j] = j;
            int col = 0;
            const AnalysisResult means = analyze(imp, data.w, builtin_mean(all));
            for (int j = 0; j < J; ++j, ++col) {
                estimates(r, col) = means.theta_hat[j];
                ses(r, col) = means.se[j];
            }
            if (conditional_means) {
                for (int v = 0; v <= 1; ++v) {
                    const AnalysisResult cm =
                        analyze(imp, data.w,
                                builtin_conditional_mean(assumed, truth.cond_var, v));
                    for (int j = 0; j < J - 1; ++j, ++col) {
                        estimates(r, col) = cm.theta_hat[j];
                        ses(r, col) = cm.se[j];
                    }
                }
            }
            replicate_ok[r] = true;
        } catch (const std::exception& e) {
            ++summary.failed_replicates;
            summary.failures.push_back("replicate " + std::to_string(r + 1) + ": " + e.what());
        }
    }

    const double z95 = norm_quantile(0.975);
    long covered_total = 0, cell_total = 0;
    for (int e = 0; e < n_estimands; ++e) {
        EstimandSummary es;
        es.name = estimand_names[e];
        es.truth = estimand_truths[e];
        double sum = 0.0, sum_se = 0.0;
        int n_ok = 0, n_cov = 0;
        for (int r = 0; r < scale.replicates; ++r) {
            if (!replicate_ok[r]) continue;
            const double est = estimates(r, e);
            const double se = ses(r, e);
            const double lo = est - z95 * se;
            const double hi = est + z95 * se;
            const bool cov = lo <= es.truth && es.truth <= hi;
            RawRecord raw;
            raw.replicate = r + 1;
            raw.estimand = es.name;
            raw.truth = es.truth;
            raw.estimate = est;
            raw.se = se;
            raw.ci_lo = lo;
            raw.ci_hi = hi;
            raw.covered = cov;
            summary.raw.push_back(raw);
            sum += est;
            sum_se += se;
            n_ok += 1;
            n_cov += cov;
        }
        es.n_replicates = n_ok;
        if (n_ok > 0) {
            es.mean_estimate = sum / n_ok;
            es.mean_se = sum_se / n_ok;
            double ss = 0.0;
            for (int r = 0; r < scale.replicates; ++r) {
                if (!replicate_ok[r]) continue;
                const double d = estimates(r, e) - es.mean_estimate;
                ss += d * d;
            }
            es.empirical_sd = n_ok > 1 ? std::sqrt(ss / (n_ok - 1)) : 0.0;
            es.coverage = static_cast<double>(n_cov) / n_ok;
        }
        covered_total += n_cov;
        cell_total += n_ok;
        summary.estimands.push_back(es);
    }
    summary.pooled_coverage =
        cell_total > 0 ? static_cast<double>(covered_total) / cell_total : 0.0;
    return summary;
}

void write_raw_csv(const ReplicationSummary& summary, std::ostream& os) {
    os << "replicate,estimand,truth,estimate,se,ci_lo,ci_hi,covered\n";
    for (const auto& r : summary.raw) {
        os << r.replicate << ',' << r.estimand << ',' << fmt_g17(r.truth) << ','
           << fmt_g17(r.estimate) << ',' << fmt_g17(r.se) << ',' << fmt_g17(r.ci_lo) << ','
           << fmt_g17(r.ci_hi) << ',' << (r.covered ? 1 : 0) << '\n';
    }
}

void write_summary_csv(const ReplicationSummary& summary, std::ostream& os) {
    os << "estimand,truth,mean_estimate,empirical_sd,mean_se,coverage,n_replicates\n";
    for (const auto& e : summary.estimands) {
        os << e.name << ',' << fmt_g17(e.truth) << ',' << fmt_g17(e.mean_estimate) << ','
           << fmt_g17(e.empirical_sd) << ',' << fmt_g17(e.mean_se) << ','
           << fmt_g17(e.coverage) << ',' << e.n_replicates << '\n';
    }
}

}  // namespace lvmi
