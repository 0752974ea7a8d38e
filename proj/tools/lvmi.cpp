// Command-line driver: fit, impute, analyze, select-dim, simulate.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lvmi/analysis.hpp"
#include "lvmi/fit.hpp"
#include "lvmi/impute.hpp"
#include "lvmi/io.hpp"
#include "lvmi/parallel.hpp"
#include "lvmi/selection.hpp"
#include "lvmi/simulate.hpp"

namespace fs = std::filesystem;
using namespace lvmi;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonFlags {
    std::uint64_t seed = 0;
    int workers = 0;
};

std::vector<std::pair<std::string, std::string>> base_manifest(const CommonFlags& common) {
    return {{"seed", std::to_string(common.seed)},
            {"workers", std::to_string(resolve_workers(common.workers))}};
}

// Minimal glob: one '*' wildcard in the filename component.
std::vector<std::string> expand_glob(const std::string& pattern) {
    const fs::path p(pattern);
    const std::string name = p.filename().string();
    const auto star = name.find('*');
    if (star == std::string::npos) return {pattern};
    const std::string prefix = name.substr(0, star);
    const std::string suffix = name.substr(star + 1);
    const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) throw IoError("glob: no such directory " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string f = entry.path().filename().string();
        if (f.size() < prefix.size() + suffix.size()) continue;
        if (f.rfind(prefix, 0) != 0) continue;
        if (f.substr(f.size() - suffix.size()) != suffix) continue;
        out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw IoError("glob: nothing matches " + pattern);
    return out;
}

int variable_index(const DataSpec& spec, const std::string& token) {
    for (std::size_t j = 0; j < spec.variable_names.size(); ++j)
        if (spec.variable_names[j] == token) return static_cast<int>(j);
    try {
        const int idx = std::stoi(token);
        if (idx >= 1 && idx <= spec.model.J()) return idx - 1;
    } catch (const std::exception&) {
    }
    throw ValidationError("unknown variable '" + token + "' (use a name from the spec or a 1-based index)");
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

int cmd_fit(const std::string& data_path, const std::string& spec_path,
            const std::string& out_path, const std::string& trace_path, SAConfig sa) {
    const DataSpec spec = read_data_spec(spec_path);
    const Dataset data = read_dataset_csv(data_path, spec);
    sa.record_trace = !trace_path.empty();
    const FitResult res = fit(data, spec.model, sa);
    write_psi_json(out_path, res.psi_hat);
    if (!trace_path.empty()) {
        const ParamLayout layout(spec.model);
        std::ofstream out(trace_path);
        if (!out) throw IoError("cannot write " + trace_path);
        for (int d = 0; d < layout.dim(); ++d) out << (d ? "," : "") << layout.names()[d];
        out << '\n';
        for (int t = 0; t < res.trace->rows(); ++t) {
            for (int d = 0; d < layout.dim(); ++d)
                out << (d ? "," : "") << fmt_g17((*res.trace)(t, d));
            out << '\n';
        }
    }
    std::vector<std::pair<std::string, std::string>> manifest = {
        {"data", data_path},
        {"spec", spec_path},
        {"iters", std::to_string(sa.iters)},
        {"burnin", std::to_string(sa.burnin)},
        {"step_scale", fmt_g17(sa.step_scale)},
        {"step_exponent", fmt_g17(sa.step_exponent)},
        {"seed", std::to_string(sa.seed)},
        {"workers", std::to_string(resolve_workers(sa.workers))},
        {"clip_activations", std::to_string(res.clip_activations)},
        {"last_clip_iteration", std::to_string(res.last_clip_iteration)},
    };
    write_manifest(out_path + ".manifest.json", "fit", manifest);
    std::cerr << "fit: wrote " << out_path << " (" << ParamLayout(spec.model).dim()
              << " free parameters)\n";
    for (const auto& diag : res.diagnostics)
        if (diag.half_window_drift > 0.05)
            std::cerr << "fit: trace drift in block " << diag.block << ": "
                      << diag.half_window_drift << " (consider more iterations)\n";
    return 0;
}

int cmd_impute(const std::string& data_path, const std::string& spec_path,
               const std::string& psi_path, const std::string& out_dir, ImputeConfig cfg) {
    const DataSpec spec = read_data_spec(spec_path);
    const Dataset data = read_dataset_csv(data_path, spec);
    const Psi psi = read_psi_json(psi_path);
    fs::create_directories(out_dir);
    const ImputationOutput imp = impute(data, psi, cfg);
    for (int m = 0; m < imp.n_imputations(); ++m) {
        write_completed_csv(out_dir + "/imputed_" + std::to_string(m + 1) + ".csv", spec,
                            imp.datasets[m], imp.x, imp.weights);
    }
    write_mask_csv(out_dir + "/mask.csv", spec, imp.mask);
    write_aux_json(out_dir + "/aux.json", imp);
    write_manifest(out_dir + "/manifest.json", "impute",
                   {{"data", data_path},
                    {"spec", spec_path},
                    {"psi", psi_path},
                    {"iters", std::to_string(cfg.iters)},
                    {"burnin", std::to_string(cfg.burnin)},
                    {"thin", std::to_string(cfg.thin)},
                    {"imputations", std::to_string(imp.n_imputations())},
                    {"seed", std::to_string(cfg.seed)},
                    {"workers", std::to_string(resolve_workers(cfg.workers))}});
    std::cerr << "impute: wrote " << imp.n_imputations() << " datasets to " << out_dir << "\n";
    return 0;
}

int cmd_analyze(const std::string& imputed_glob, const std::string& spec_path,
                const std::string& aux_path, const std::string& model,
                const std::string& targets_csv, const std::string& given, double value,
                const std::string& response, const std::string& regressors_csv,
                const std::string& weights_col, double level, const std::string& out_path,
                const std::string& table_path) {
    const DataSpec spec = read_data_spec(spec_path);
    ImputationOutput imp = read_aux_json(aux_path);

    const std::vector<std::string> files = expand_glob(imputed_glob);
    imp.datasets.clear();
    Eigen::VectorXd weights;
    for (const auto& f : files) {
        Eigen::MatrixXd y, x;
        Eigen::VectorXd w;
        read_completed_csv(f, spec, y, x, w);
        imp.datasets.push_back(y);
        imp.x = x;
        weights = w;
    }
    if (static_cast<int>(imp.datasets.size()) != imp.n_imputations())
        throw ValidationError("analyze: " + std::to_string(imp.datasets.size()) +
                              " imputed files but aux.json records " +
                              std::to_string(imp.n_imputations()));
    if (!weights_col.empty() && weights_col != spec.weight_column)
        throw ValidationError("analyze: weight column '" + weights_col +
                              "' is not the spec's weight column");
    if (weights_col.empty()) weights = Eigen::VectorXd::Ones(imp.datasets[0].rows());

    EstimatingFunction ef;
    if (model == "mean") {
        std::vector<int> targets;
        if (targets_csv.empty()) {
            for (int j = 0; j < spec.model.J(); ++j) targets.push_back(j);
        } else {
            for (const auto& tok : split_list(targets_csv))
                targets.push_back(variable_index(spec, tok));
        }
        ef = builtin_mean(targets);
    } else if (model == "condmean") {
        if (given.empty()) throw ValidationError("analyze: condmean requires --given");
        ef = builtin_conditional_mean(spec.model, variable_index(spec, given), value);
    } else if (model == "corr") {
        const auto toks = split_list(targets_csv);
        if (toks.size() != 2) throw ValidationError("analyze: corr requires --targets j1,j2");
        ef = builtin_correlation(variable_index(spec, toks[0]), variable_index(spec, toks[1]));
    } else if (model == "ols") {
        if (response.empty()) throw ValidationError("analyze: ols requires --response");
        std::vector<Regressor> regs;
        for (const auto& tok : split_list(regressors_csv)) {
            if (tok.rfind("x:", 0) == 0) {
                const int idx = std::stoi(tok.substr(2));
                if (idx < 1 || idx > spec.model.p)
                    throw ValidationError("analyze: covariate index out of range: " + tok);
                regs.push_back({Regressor::Source::X, idx - 1});
            } else {
                regs.push_back({Regressor::Source::Y, variable_index(spec, tok)});
            }
        }
        ef = builtin_linear_regression(variable_index(spec, response), regs);
    } else {
        throw ValidationError("analyze: unknown model '" + model +
                              "' (expected mean|condmean|corr|ols)");
    }

    const AnalysisResult result = analyze(imp, weights, ef, level);
    write_analysis_json(out_path, result, ef);
    if (!table_path.empty()) write_analysis_table_csv(table_path, result, ef);
    write_manifest(out_path + ".manifest.json", "analyze",
                   {{"imputed", imputed_glob},
                    {"aux", aux_path},
                    {"model", model},
                    {"level", fmt_g17(level)},
                    {"weights", weights_col.empty() ? "unit" : weights_col}});
    std::cerr << "analyze: " << ef.name << " with " << imp.n_imputations()
              << " imputations -> " << out_path << "\n";
    return 0;
}

int cmd_select_dim(const std::string& data_path, const std::string& spec_path,
                   const std::string& grid_csv, int is_samples, SAConfig sa,
                   const std::string& out_path) {
    const DataSpec spec = read_data_spec(spec_path);
    const Dataset data = read_dataset_csv(data_path, spec);
    std::vector<std::pair<int, int>> grid;
    for (const auto& cell : split_list(grid_csv)) {
        const auto x = cell.find('x');
        if (x == std::string::npos)
            throw ValidationError("select-dim: grid cells look like K1xK2, got '" + cell + "'");
        grid.emplace_back(std::stoi(cell.substr(0, x)), std::stoi(cell.substr(x + 1)));
    }
    const SelectionResult res = select_dimensions(data, spec.model, grid, sa, is_samples);
    write_bic_csv(out_path, res);
    write_manifest(out_path + ".manifest.json", "select-dim",
                   {{"data", data_path},
                    {"grid", grid_csv},
                    {"is_samples", std::to_string(is_samples)},
                    {"seed", std::to_string(sa.seed)}});
    if (res.argmin_index >= 0) {
        const auto& best = res.rows[res.argmin_index];
        std::cerr << "select-dim: minimum BIC at (K1,K2) = (" << best.K1 << "," << best.K2
                  << ")\n";
    }
    return 0;
}

int cmd_simulate(const std::string& study_name, int replicates, const std::string& scale_name,
                 int n_override, bool conditional_means, const CommonFlags& common,
                 const std::string& out_dir) {
    ScaleConfig scale = scale_name == "paper" ? ScaleConfig::paper() : ScaleConfig::desk();
    if (replicates > 0) scale.replicates = replicates;
    if (n_override > 0) scale.n = n_override;
    const Study study = study_from_string(study_name);
    const ReplicationSummary summary =
        run_replication(study, scale, common.seed, common.workers, conditional_means);
    fs::create_directories(out_dir);
    {
        std::ofstream raw(out_dir + "/raw.csv");
        if (!raw) throw IoError("cannot write " + out_dir + "/raw.csv");
        write_raw_csv(summary, raw);
    }
    {
        std::ofstream sum(out_dir + "/summary.csv");
        if (!sum) throw IoError("cannot write " + out_dir + "/summary.csv");
        write_summary_csv(summary, sum);
    }
    auto manifest = base_manifest(common);
    manifest.push_back({"study", study_name});
    manifest.push_back({"scale", scale_name});
    manifest.push_back({"n", std::to_string(scale.n)});
    manifest.push_back({"replicates", std::to_string(scale.replicates)});
    manifest.push_back({"conditional_means", conditional_means ? "true" : "false"});
    manifest.push_back({"failed_replicates", std::to_string(summary.failed_replicates)});
    write_manifest(out_dir + "/manifest.json", "simulate", manifest);
    std::cerr << "simulate " << study_name << ": pooled 95% coverage "
              << summary.pooled_coverage << " over " << summary.estimands.size()
              << " estimands";
    if (summary.failed_replicates > 0)
        std::cerr << " (" << summary.failed_replicates << " replicates failed)";
    std::cerr << "\n";
    for (const auto& msg : summary.failures) std::cerr << "  " << msg << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-variable multiple imputation for mixed-type data"};
    app.require_subcommand(1);

    CommonFlags common;

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "stochastic-approximation ML fit of the imputation model");
    std::string data_path, spec_path, out_path = "psi.json", trace_path;
    SAConfig sa;
    fit_cmd->add_option("--data", data_path, "input CSV")->required();
    fit_cmd->add_option("--spec", spec_path, "model spec JSON")->required();
    fit_cmd->add_option("--out", out_path, "output psi JSON");
    fit_cmd->add_option("--trace", trace_path, "optional per-iteration trace CSV");
    fit_cmd->add_option("--iters", sa.iters, "SA iterations T");
    fit_cmd->add_option("--burnin", sa.burnin, "burn-in T0");
    fit_cmd->add_option("--step-scale", sa.step_scale, "step scale A in rho_t = A t^-c");
    fit_cmd->add_option("--step-exponent", sa.step_exponent, "step exponent c");
    fit_cmd->add_option("--seed", sa.seed, "RNG seed");
    fit_cmd->add_option("--workers", sa.workers, "worker threads (0 = auto)");

    // impute
    auto* imp_cmd = app.add_subcommand("impute", "MCMC multiple imputation at fixed psi");
    std::string psi_path, out_dir = "imputed";
    ImputeConfig ic;
    imp_cmd->add_option("--data", data_path, "input CSV")->required();
    imp_cmd->add_option("--spec", spec_path, "model spec JSON")->required();
    imp_cmd->add_option("--psi", psi_path, "fitted psi JSON")->required();
    imp_cmd->add_option("--out-dir", out_dir, "output directory");
    imp_cmd->add_option("--iters", ic.iters, "MCMC iterations T");
    imp_cmd->add_option("--burnin", ic.burnin, "burn-in T0");
    imp_cmd->add_option("--thin", ic.thin, "thinning interval k");
    imp_cmd->add_option("--seed", ic.seed, "RNG seed");
    imp_cmd->add_option("--workers", ic.workers, "worker threads (0 = auto)");

    // analyze
    auto* ana_cmd = app.add_subcommand("analyze", "pooled estimating-equation analysis");
    std::string imputed_glob, aux_path, model, targets_csv, given, response, regressors_csv,
        weights_col, result_path = "result.json", table_path;
    double value = 0.0, level = 0.95;
    ana_cmd->add_option("--imputed", imputed_glob, "imputed CSV glob (one '*')")->required();
    ana_cmd->add_option("--spec", spec_path, "model spec JSON")->required();
    ana_cmd->add_option("--aux", aux_path, "aux.json from impute")->required();
    ana_cmd->add_option("--model", model, "mean|condmean|corr|ols")->required();
    ana_cmd->add_option("--targets", targets_csv, "variable list (mean/corr)");
    ana_cmd->add_option("--given", given, "conditioning variable (condmean)");
    ana_cmd->add_option("--value", value, "conditioning value (condmean)");
    ana_cmd->add_option("--response", response, "response variable (ols)");
    ana_cmd->add_option("--regressors", regressors_csv, "regressors: names or x:k (ols)");
    ana_cmd->add_option("--weights", weights_col, "weight column name");
    ana_cmd->add_option("--level", level, "confidence level");
    ana_cmd->add_option("--out", result_path, "result JSON");
    ana_cmd->add_option("--table", table_path, "optional table CSV");

    // select-dim
    auto* sel_cmd = app.add_subcommand("select-dim", "BIC over a (K1,K2) grid");
    std::string grid_csv, bic_path = "bic.csv";
    int is_samples = 5000;
    sel_cmd->add_option("--data", data_path, "input CSV")->required();
    sel_cmd->add_option("--spec", spec_path, "model spec JSON")->required();
    sel_cmd->add_option("--grid", grid_csv, "cells K1xK2, comma separated")->required();
    sel_cmd->add_option("--out", bic_path, "BIC table CSV");
    sel_cmd->add_option("--is-samples", is_samples, "IS draws per unit");
    sel_cmd->add_option("--iters", sa.iters, "SA iterations per cell");
    sel_cmd->add_option("--burnin", sa.burnin, "burn-in per cell");
    sel_cmd->add_option("--seed", sa.seed, "RNG seed");
    sel_cmd->add_option("--workers", sa.workers, "worker threads");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "replication studies (I-1..III-K4)");
    std::string study_name, scale_name = "desk", sim_dir = "simulation";
    int replicates = 0, n_override = 0;
    bool conditional_means = false;
    sim_cmd->add_option("--study", study_name, "I-1|I-2|II-1|II-2|III-K1|III-K4")->required();
    sim_cmd->add_option("--replicates", replicates, "replicate count (default per scale)");
    sim_cmd->add_option("--scale", scale_name, "desk|paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    sim_cmd->add_option("--n", n_override, "override units per replicate");
    sim_cmd->add_flag("--conditional-means", conditional_means,
                      "also analyze conditional means given the last binary variable");
    sim_cmd->add_option("--seed", common.seed, "RNG seed");
    sim_cmd->add_option("--workers", common.workers, "worker threads");
    sim_cmd->add_option("--out-dir", sim_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (fit_cmd->parsed())
            return cmd_fit(data_path, spec_path, out_path, trace_path, sa);
        if (imp_cmd->parsed())
            return cmd_impute(data_path, spec_path, psi_path, out_dir, ic);
        if (ana_cmd->parsed())
            return cmd_analyze(imputed_glob, spec_path, aux_path, model, targets_csv, given,
                               value, response, regressors_csv, weights_col, level, result_path,
                               table_path);
        if (sel_cmd->parsed())
            return cmd_select_dim(data_path, spec_path, grid_csv, is_samples, sa, bic_path);
        if (sim_cmd->parsed())
            return cmd_simulate(study_name, replicates, scale_name, n_override,
                                conditional_means, common, sim_dir);
    } catch (const IoError& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return kExitIo;
    } catch (const ValidationError& e) {
        std::cerr << "error (validation): " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericError& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
