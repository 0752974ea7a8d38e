#include "lvmi/io.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace lvmi {

using nlohmann::json;

std::string fmt_g17(double value) {
    std::array<char, 40> buf;
    std::snprintf(buf.data(), buf.size(), "%.17g", value);
    return std::string(buf.data());
}

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::string b64_encode(const unsigned char* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        const unsigned b0 = data[i];
        const unsigned b1 = i + 1 < len ? data[i + 1] : 0;
        const unsigned b2 = i + 2 < len ? data[i + 2] : 0;
        out.push_back(kB64Alphabet[b0 >> 2]);
        out.push_back(kB64Alphabet[((b0 & 0x3) << 4) | (b1 >> 4)]);
        out.push_back(i + 1 < len ? kB64Alphabet[((b1 & 0xf) << 2) | (b2 >> 6)] : '=');
        out.push_back(i + 2 < len ? kB64Alphabet[b2 & 0x3f] : '=');
    }
    return out;
}

std::vector<unsigned char> b64_decode(const std::string& text) {
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    int acc = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = b64_value(c);
        if (v < 0) throw IoError("invalid base64 character");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    // Row-major packing.
    std::vector<double> flat(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            flat[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    j["data"] = base64_encode_doubles(flat.data(), flat.size());
    return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const std::vector<double> flat = base64_decode_doubles(j.at("data").get<std::string>());
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw IoError("matrix payload size mismatch");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    return m;
}

json open_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return j;
}

void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // Trim surrounding whitespace and a trailing CR.
        std::size_t b = field.find_first_not_of(" \t\r");
        std::size_t e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ValidationError(where + ": cannot parse numeric value '" + s + "'");
    }
}

}  // namespace

std::string base64_encode_doubles(const double* data, std::size_t count) {
    static_assert(sizeof(double) == 8);
    std::vector<unsigned char> bytes(count * 8);
    std::memcpy(bytes.data(), data, count * 8);
    return b64_encode(bytes.data(), bytes.size());
}

std::vector<double> base64_decode_doubles(const std::string& text) {
    const std::vector<unsigned char> bytes = b64_decode(text);
    if (bytes.size() % 8 != 0) throw IoError("base64 payload is not a multiple of 8 bytes");
    std::vector<double> out(bytes.size() / 8);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

DataSpec read_data_spec(const std::string& path) {
    const json j = open_json(path);
    DataSpec spec;
    if (!j.contains("variables") || !j["variables"].is_array() || j["variables"].empty())
        throw ValidationError(path + ": spec needs a non-empty 'variables' array");
    int index = 0;
    for (const auto& v : j["variables"]) {
        VariableSpec var;
        var.index = index++;
        var.kind = var_kind_from_string(v.at("kind").get<std::string>());
        if (var.kind == VarKind::Ordinal) {
            if (!v.contains("categories"))
                throw ValidationError(path + ": ordinal variable needs 'categories'");
            var.n_categories = v["categories"].get<int>();
        }
        spec.model.variables.push_back(var);
        const std::string name = v.at("name").get<std::string>();
        if (name.find(',') != std::string::npos)
            throw ValidationError(path + ": variable names must not contain commas");
        spec.variable_names.push_back(name);
    }
    spec.model.K1 = j.value("K1", 1);
    spec.model.K2 = j.value("K2", 0);
    spec.model.ignorable = j.value("ignorable", spec.model.K2 == 0);
    if (j.contains("covariates"))
        for (const auto& c : j["covariates"])
            spec.covariate_names.push_back(c.get<std::string>());
    spec.model.p = static_cast<int>(spec.covariate_names.size());
    spec.weight_column = j.value("weight", std::string());
    spec.model.validate();
    return spec;
}

namespace {

struct CsvColumns {
    std::vector<int> variable_col;
    std::vector<int> covariate_col;
    int weight_col = -1;
};

CsvColumns map_columns(const std::vector<std::string>& header, const DataSpec& spec,
                       const std::string& path) {
    CsvColumns cols;
    auto find = [&](const std::string& name) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<int>(c);
        return -1;
    };
    for (const auto& name : spec.variable_names) {
        const int c = find(name);
        if (c < 0)
            throw ValidationError(path + ": column '" + name +
                                  "' declared in the spec is missing from the CSV header");
        cols.variable_col.push_back(c);
    }
    for (const auto& name : spec.covariate_names) {
        const int c = find(name);
        if (c < 0) throw ValidationError(path + ": covariate column '" + name + "' missing");
        cols.covariate_col.push_back(c);
    }
    if (!spec.weight_column.empty()) {
        cols.weight_col = find(spec.weight_column);
        if (cols.weight_col < 0)
            throw ValidationError(path + ": weight column '" + spec.weight_column + "' missing");
    }
    return cols;
}

}  // namespace

Dataset read_dataset_csv(const std::string& path, const DataSpec& spec) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
    const auto header = split_csv_line(line);
    const CsvColumns cols = map_columns(header, spec, path);

    std::vector<std::vector<std::string>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        rows.push_back(std::move(fields));
    }
    const int n = static_cast<int>(rows.size());
    if (n == 0) throw ValidationError(path + ": no data rows");
    const int J = spec.model.J();

    Dataset data;
    data.y.resize(n, J);
    data.z.resize(n, J);
    data.x.resize(n, spec.model.p);
    data.w = Eigen::VectorXd::Ones(n);

    for (int i = 0; i < n; ++i) {
        const auto& fields = rows[i];
        const std::string where = path + ":" + std::to_string(i + 2);
        for (int j = 0; j < J; ++j) {
            const std::string& tok = fields[cols.variable_col[j]];
            if (tok == "UNDEF")
                throw ValidationError(where + ", column '" + spec.variable_names[j] +
                                      "': 'UNDEF' cells are not modeled; drop the variable or "
                                      "recode the value before fitting");
            if (tok == "NA") {
                data.z(i, j) = 0;
                data.y(i, j) = std::nan("");
            } else {
                data.z(i, j) = 1;
                data.y(i, j) = parse_double(tok, where + ", column '" + spec.variable_names[j] + "'");
            }
        }
        for (int l = 0; l < spec.model.p; ++l) {
            const std::string& tok = fields[cols.covariate_col[l]];
            if (tok == "NA" || tok == "UNDEF")
                throw ValidationError(where + ": covariate '" + spec.covariate_names[l] +
                                      "' must be complete");
            data.x(i, l) = parse_double(tok, where + ", covariate '" + spec.covariate_names[l] + "'");
        }
        if (cols.weight_col >= 0) {
            const std::string& tok = fields[cols.weight_col];
            if (tok == "NA" || tok == "UNDEF")
                throw ValidationError(where + ": weight column '" + spec.weight_column +
                                      "' must be complete");
            data.w[i] = parse_double(tok, where + ", weight");
        }
    }
    data.validate(spec.model);
    return data;
}

namespace {

void write_header(std::ofstream& out, const DataSpec& spec) {
    for (std::size_t j = 0; j < spec.variable_names.size(); ++j) {
        if (j) out << ',';
        out << spec.variable_names[j];
    }
    for (const auto& c : spec.covariate_names) out << ',' << c;
    if (!spec.weight_column.empty()) out << ',' << spec.weight_column;
    out << '\n';
}

}  // namespace

void write_completed_csv(const std::string& path, const DataSpec& spec,
                         const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& w) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_header(out, spec);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            if (j) out << ',';
            out << fmt_g17(y(i, j));
        }
        for (Eigen::Index l = 0; l < x.cols(); ++l) out << ',' << fmt_g17(x(i, l));
        if (!spec.weight_column.empty()) out << ',' << fmt_g17(w[i]);
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

void write_mask_csv(const std::string& path, const DataSpec& spec,
                    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& mask) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (std::size_t j = 0; j < spec.variable_names.size(); ++j) {
        if (j) out << ',';
        out << spec.variable_names[j];
    }
    out << '\n';
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
            if (j) out << ',';
            out << static_cast<int>(mask(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

void read_completed_csv(const std::string& path, const DataSpec& spec, Eigen::MatrixXd& y,
                        Eigen::MatrixXd& x, Eigen::VectorXd& w) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
    const auto header = split_csv_line(line);
    const CsvColumns cols = map_columns(header, spec, path);

    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    const int n = static_cast<int>(rows.size());
    const int J = spec.model.J();
    y.resize(n, J);
    x.resize(n, spec.model.p);
    w = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < n; ++i) {
        const std::string where = path + ":" + std::to_string(i + 2);
        for (int j = 0; j < J; ++j) {
            const std::string& tok = rows[i][cols.variable_col[j]];
            if (tok == "NA")
                throw ValidationError(where + ": imputed dataset must be complete, found NA");
            y(i, j) = parse_double(tok, where);
        }
        for (int l = 0; l < spec.model.p; ++l)
            x(i, l) = parse_double(rows[i][cols.covariate_col[l]], where);
        if (cols.weight_col >= 0) w[i] = parse_double(rows[i][cols.weight_col], where);
    }
}

namespace {

json spec_to_json(const ModelSpec& spec) {
    json j;
    j["K1"] = spec.K1;
    j["K2"] = spec.K2;
    j["p"] = spec.p;
    j["ignorable"] = spec.ignorable;
    json vars = json::array();
    for (const auto& v : spec.variables) {
        json jv;
        jv["index"] = v.index;
        jv["kind"] = to_string(v.kind);
        if (v.kind == VarKind::Ordinal) jv["categories"] = v.n_categories;
        vars.push_back(jv);
    }
    j["variables"] = vars;
    return j;
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec spec;
    spec.K1 = j.at("K1").get<int>();
    spec.K2 = j.at("K2").get<int>();
    spec.p = j.at("p").get<int>();
    spec.ignorable = j.at("ignorable").get<bool>();
    for (const auto& jv : j.at("variables")) {
        VariableSpec v;
        v.index = jv.at("index").get<int>();
        v.kind = var_kind_from_string(jv.at("kind").get<std::string>());
        v.n_categories = jv.value("categories", 0);
        spec.variables.push_back(v);
    }
    spec.validate();
    return spec;
}

json psi_to_json(const Psi& psi) {
    json j;
    j["spec"] = spec_to_json(psi.spec);
    const ParamLayout layout(psi.spec);
    j["layout"] = layout.names();
    j["values"] = base64_encode_doubles(layout.pack_natural(psi).data(),
                                        static_cast<std::size_t>(layout.dim()));
    // Readable mirror of the flattened values (informational only).
    json readable;
    const Eigen::VectorXd v = layout.pack_natural(psi);
    for (int d = 0; d < layout.dim(); ++d) readable[layout.names()[d]] = v[d];
    j["values_readable"] = readable;
    return j;
}

Psi psi_from_json(const json& j) {
    const ModelSpec spec = spec_from_json(j.at("spec"));
    const ParamLayout layout(spec);
    const std::vector<double> flat = base64_decode_doubles(j.at("values").get<std::string>());
    if (static_cast<int>(flat.size()) != layout.dim())
        throw IoError("psi payload dimension mismatch");
    Eigen::VectorXd v(layout.dim());
    for (int d = 0; d < layout.dim(); ++d) v[d] = flat[d];
    Psi psi = layout.unpack_natural(v);
    psi.validate();
    return psi;
}

}  // namespace

void write_psi_json(const std::string& path, const Psi& psi) {
    save_json(path, psi_to_json(psi));
}

Psi read_psi_json(const std::string& path) { return psi_from_json(open_json(path)); }

void write_aux_json(const std::string& path, const ImputationOutput& imp) {
    json j;
    j["schema_version"] = 1;
    j["psi"] = psi_to_json(imp.psi_hat);
    j["n_units"] = imp.n_units();
    j["n_imputations"] = imp.n_imputations();
    j["param_dim"] = imp.param_dim();
    j["config"] = {{"iters", imp.config.iters},
                   {"burnin", imp.config.burnin},
                   {"thin", imp.config.thin},
                   {"seed", imp.config.seed}};
    json scores = json::array();
    for (const auto& s : imp.scores_m) scores.push_back(matrix_to_json(s));
    j["scores_m"] = scores;
    j["s_bar_obs"] = matrix_to_json(imp.s_bar_obs);
    j["i_obs"] = matrix_to_json(imp.i_obs);
    json etas = json::array(), xis = json::array();
    for (const auto& e : imp.eta_m) etas.push_back(matrix_to_json(e));
    for (const auto& xm : imp.xi_m) xis.push_back(matrix_to_json(xm));
    j["eta_m"] = etas;
    j["xi_m"] = xis;
    j["x"] = matrix_to_json(imp.x);
    j["weights"] = matrix_to_json(imp.weights);
    std::string mask;
    mask.reserve(static_cast<std::size_t>(imp.mask.rows()) * imp.mask.cols());
    for (Eigen::Index i = 0; i < imp.mask.rows(); ++i)
        for (Eigen::Index jj = 0; jj < imp.mask.cols(); ++jj)
            mask.push_back(imp.mask(i, jj) ? '1' : '0');
    j["mask"] = mask;
    j["mask_cols"] = imp.mask.cols();
    save_json(path, j);
}

ImputationOutput read_aux_json(const std::string& path) {
    const json j = open_json(path);
    if (j.value("schema_version", 0) != 1)
        throw IoError(path + ": unsupported aux schema version");
    ImputationOutput imp;
    imp.psi_hat = psi_from_json(j.at("psi"));
    imp.config.iters = j.at("config").at("iters").get<int>();
    imp.config.burnin = j.at("config").at("burnin").get<int>();
    imp.config.thin = j.at("config").at("thin").get<int>();
    imp.config.seed = j.at("config").at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("scores_m")) imp.scores_m.push_back(matrix_from_json(s));
    imp.s_bar_obs = matrix_from_json(j.at("s_bar_obs"));
    imp.i_obs = matrix_from_json(j.at("i_obs"));
    for (const auto& e : j.at("eta_m")) imp.eta_m.push_back(matrix_from_json(e));
    for (const auto& xm : j.at("xi_m")) imp.xi_m.push_back(matrix_from_json(xm));
    imp.x = matrix_from_json(j.at("x"));
    const Eigen::MatrixXd w = matrix_from_json(j.at("weights"));
    imp.weights = w.col(0);
    const std::string mask = j.at("mask").get<std::string>();
    const int cols = j.at("mask_cols").get<int>();
    const int rows = static_cast<int>(mask.size()) / cols;
    imp.mask.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int c = 0; c < cols; ++c) imp.mask(i, c) = mask[i * cols + c] == '1';
    return imp;
}

void write_analysis_json(const std::string& path, const AnalysisResult& result,
                         const EstimatingFunction& ef) {
    json j;
    j["model"] = ef.name;
    j["level"] = result.level;
    j["newton_iterations"] = result.newton_iterations;
    j["pseudo_inverse_used"] = result.components.pinv_used;
    j["w_eff"] = result.components.w_eff;
    json params = json::array();
    for (int k = 0; k < result.theta_hat.size(); ++k) {
        json p;
        p["name"] = k < static_cast<int>(ef.param_names.size()) ? ef.param_names[k]
                                                                : "theta" + std::to_string(k + 1);
        p["estimate"] = result.theta_hat[k];
        p["se"] = result.se[k];
        p["ci_lower"] = result.ci_lower[k];
        p["ci_upper"] = result.ci_upper[k];
        params.push_back(p);
    }
    j["parameters"] = params;
    auto flat = [](const Eigen::MatrixXd& m) {
        json jm;
        jm["rows"] = m.rows();
        jm["cols"] = m.cols();
        std::vector<double> v;
        v.reserve(m.size());
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
        jm["data_row_major"] = v;
        return jm;
    };
    j["components"] = {{"tau", flat(result.components.tau_hat)},
                       {"omega_c", flat(result.components.omega_c_hat)},
                       {"omega", flat(result.components.omega_hat)},
                       {"kappa", flat(result.components.kappa_hat)},
                       {"lambda", flat(result.components.lambda_hat)},
                       {"sigma", flat(result.components.sigma_hat)}};
    save_json(path, j);
}

void write_analysis_table_csv(const std::string& path, const AnalysisResult& result,
                              const EstimatingFunction& ef) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "parameter,estimate,se,ci_lower,ci_upper\n";
    for (int k = 0; k < result.theta_hat.size(); ++k) {
        const std::string name = k < static_cast<int>(ef.param_names.size())
                                     ? ef.param_names[k]
                                     : "theta" + std::to_string(k + 1);
        out << name << ',' << fmt_g17(result.theta_hat[k]) << ',' << fmt_g17(result.se[k]) << ','
            << fmt_g17(result.ci_lower[k]) << ',' << fmt_g17(result.ci_upper[k]) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

void write_bic_csv(const std::string& path, const SelectionResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "K1,K2,loglik,se,nparams,bic,status\n";
    for (const auto& row : result.rows) {
        out << row.K1 << ',' << row.K2 << ',';
        if (row.failed) {
            out << ",,,," << "failed: " << row.error << '\n';
        } else {
            out << fmt_g17(row.loglik_hat) << ',' << fmt_g17(row.loglik_se) << ','
                << row.n_params << ',' << fmt_g17(row.bic) << ",ok\n";
        }
    }
    if (!out) throw IoError("write failed for " + path);
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    json j;
    j["command"] = command;
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["timestamp"] = buf;
    for (const auto& [k, v] : entries) j["config"][k] = v;
    save_json(path, j);
}

}  // namespace lvmi
