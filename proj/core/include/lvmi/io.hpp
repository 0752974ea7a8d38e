#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "lvmi/analysis.hpp"
#include "lvmi/impute.hpp"
#include "lvmi/psi.hpp"
#include "lvmi/selection.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Round-trip decimal formatting (17 significant digits) used for all
// numeric CSV output.
std::string fmt_g17(double value);

// Base64 (RFC 4648) packing of little-endian doubles, used by aux.json.
std::string base64_encode_doubles(const double* data, std::size_t count);
std::vector<double> base64_decode_doubles(const std::string& text);

// ---- model spec JSON ----------------------------------------------------
// {"variables": [{"name": "...", "kind": "continuous|binary|ordinal",
//   "categories": k}...], "covariates": ["..."], "weight": "...",
//  "K1": 2, "K2": 1, "ignorable": false}
struct DataSpec {
    ModelSpec model;
    std::vector<std::string> variable_names;
    std::vector<std::string> covariate_names;
    std::string weight_column;  // empty = unit weights
};

DataSpec read_data_spec(const std::string& path);

// ---- dataset CSV ----------------------------------------------------------
// Header row; missing responses coded exactly "NA". "UNDEF" cells are
// rejected with guidance. Weights and covariates must be complete.
Dataset read_dataset_csv(const std::string& path, const DataSpec& spec);

// Completed dataset with covariate and weight columns (identical layout to
// the input), used for the imputed_m.csv outputs.
void write_completed_csv(const std::string& path, const DataSpec& spec,
                         const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& w);
void write_mask_csv(const std::string& path, const DataSpec& spec,
                    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& mask);

// Reads an imputed CSV back against the spec (no NA tokens allowed).
void read_completed_csv(const std::string& path, const DataSpec& spec, Eigen::MatrixXd& y,
                        Eigen::MatrixXd& x, Eigen::VectorXd& w);

// ---- psi JSON -------------------------------------------------------------
void write_psi_json(const std::string& path, const Psi& psi);
Psi read_psi_json(const std::string& path);

// ---- auxiliary container (aux.json, schema_version 1) ----------------------
// Persists everything `analyze` needs beyond the imputed CSVs: psi_hat, the
// flattened-layout names, per-imputation scores, per-unit observed-score
// averages, the Louis information, retained latents, mask, and weights.
void write_aux_json(const std::string& path, const ImputationOutput& imp);
ImputationOutput read_aux_json(const std::string& path);

// ---- analysis results ------------------------------------------------------
void write_analysis_json(const std::string& path, const AnalysisResult& result,
                         const EstimatingFunction& ef);
void write_analysis_table_csv(const std::string& path, const AnalysisResult& result,
                              const EstimatingFunction& ef);

// ---- BIC table -------------------------------------------------------------
void write_bic_csv(const std::string& path, const SelectionResult& result);

// ---- run manifest ----------------------------------------------------------
void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace lvmi
