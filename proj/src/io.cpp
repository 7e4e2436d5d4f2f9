#include "spdwg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace spdwg::io {

using nlohmann::json;

namespace {

constexpr double kSymmetryTol = 1e-9;

std::string at_line(const std::string& origin, std::size_t line) { return origin + ":" + std::to_string(line) + ": "; }

bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

SpdMat checked_spd(const Matrix& m, const std::string& where) {
    if (m.rows() != m.cols() || m.rows() < 1) throw IoError(where + "matrix is not square");
    if (!m.allFinite()) throw IoError(where + "matrix has non-finite entries");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol) throw IoError(where + "matrix is not symmetric (max asymmetry " + format_double(asym) + ")");
    try {
        return SpdMat(SymMat::symmetrize(m));
    } catch (const Error& e) {
        throw IoError(where + "matrix is not positive definite: " + e.what());
    }
}

LabeledSpdDataset parse_jsonl(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    Index d = -1;
    int classes = 0;
    bool have_header = false;
    std::vector<SpdMat> xs;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(at_line(origin, lineno) + "invalid JSON: " + e.what());
        }
        if (!rec.is_object()) throw IoError(at_line(origin, lineno) + "record is not a JSON object");
        if (!have_header) {
            if (!rec.contains("d") || !rec["d"].is_number_integer())
                throw IoError(at_line(origin, lineno) + "first record must be the header {\"d\": int, \"classes\": int}");
            d = rec["d"].get<Index>();
            if (d < 1) throw IoError(at_line(origin, lineno) + "header dimension must be positive");
            if (rec.contains("classes")) {
                if (!rec["classes"].is_number_integer() || rec["classes"].get<int>() < 1)
                    throw IoError(at_line(origin, lineno) + "header 'classes' must be a positive integer");
                classes = rec["classes"].get<int>();
            }
            have_header = true;
            continue;
        }
        if (!rec.contains("label") || !rec["label"].is_number_integer())
            throw IoError(at_line(origin, lineno) + "record " + std::to_string(xs.size()) + " lacks an integer 'label'");
        if (!rec.contains("matrix")) throw IoError(at_line(origin, lineno) + "record lacks 'matrix'");
        Matrix m;
        try {
            m = matrix_from_json(rec["matrix"], "matrix");
        } catch (const Error& e) {
            throw IoError(at_line(origin, lineno) + e.what());
        }
        if (m.rows() != d)
            throw IoError(at_line(origin, lineno) + "record " + std::to_string(xs.size()) + " has dim " +
                          std::to_string(m.rows()) + ", header says " + std::to_string(d));
        const int label = rec["label"].get<int>();
        if (label < 0 || (classes > 0 && label >= classes))
            throw IoError(at_line(origin, lineno) + "label " + std::to_string(label) + " out of range");
        xs.push_back(checked_spd(m, at_line(origin, lineno) + "record " + std::to_string(xs.size()) + ": "));
        labels.push_back(label);
    }
    if (!have_header) throw IoError(origin + ": missing header record");
    if (xs.empty()) throw IoError(origin + ": dataset has no records");
    try {
        return LabeledSpdDataset(std::move(xs), std::move(labels), classes);
    } catch (const Error& e) {
        throw IoError(origin + ": " + e.what());
    }
}

LabeledSpdDataset parse_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    Index d = -1;
    std::vector<SpdMat> xs;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line) || line.front() == '#') continue;
        const auto fields = split_commas(line);
        double first = 0.0;
        if (!parse_double(fields.front(), first)) {
            if (xs.empty() && d < 0) continue;  // header
            throw IoError(at_line(origin, lineno) + "label is not a number");
        }
        if (first != std::floor(first) || first < 0) throw IoError(at_line(origin, lineno) + "label must be a non-negative integer");
        const Index n = static_cast<Index>(fields.size()) - 1;
        Index dd;
        try {
            dd = matrix_dim_from_tangent_dim(n);
        } catch (const Error&) {
            throw IoError(at_line(origin, lineno) + std::to_string(n) + " entries do not form an upper triangle");
        }
        if (d < 0) d = dd;
        if (dd != d)
            throw IoError(at_line(origin, lineno) + "record " + std::to_string(xs.size()) + " has dim " +
                          std::to_string(dd) + ", expected " + std::to_string(d));
        Matrix m(d, d);
        std::size_t f = 1;
        for (Index i = 0; i < d; ++i)
            for (Index j = i; j < d; ++j) {
                double v;
                if (!parse_double(fields[f], v)) throw IoError(at_line(origin, lineno) + "field " + std::to_string(f) + " is not a number");
                m(i, j) = v;
                m(j, i) = v;
                ++f;
            }
        xs.push_back(checked_spd(m, at_line(origin, lineno) + "record " + std::to_string(xs.size()) + ": "));
        labels.push_back(static_cast<int>(first));
    }
    if (xs.empty()) throw IoError(origin + ": dataset has no records");
    try {
        return LabeledSpdDataset(std::move(xs), std::move(labels));
    } catch (const Error& e) {
        throw IoError(origin + ": " + e.what());
    }
}

json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vector vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw InvalidInput(what + " must be an array of numbers");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidInput(what + "[" + std::to_string(i) + "] is not a number");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

json spd_list_to_json(const std::vector<SpdMat>& xs) {
    json a = json::array();
    for (const auto& x : xs) a.push_back(matrix_to_json(x.matrix()));
    return a;
}

json cov_to_json(const CovSpec& c) {
    return c.is_full() ? json{{"kind", "full"}, {"value", matrix_to_json(c.full_matrix().matrix())}}
                       : json{{"kind", "diag"}, {"value", vector_to_json(c.diag())}};
}

CovSpec cov_from_json(const json& j) {
    const CovKind kind = cov_kind_from_string(j.at("kind").get<std::string>());
    if (kind == CovKind::Full) return CovSpec::full(spd_from_json(j.at("value"), "covariance"));
    return CovSpec::diagonal(vector_from_json(j.at("value"), "covariance"));
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << contents;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

DatasetFormat detect_format(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".csv") return DatasetFormat::Csv;
    if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") return DatasetFormat::JsonLines;
    const std::string text = read_file(path);
    const auto pos = text.find_first_not_of(" \t\r\n");
    return pos != std::string::npos && text[pos] == '{' ? DatasetFormat::JsonLines : DatasetFormat::Csv;
}

LabeledSpdDataset parse_dataset(const std::string& text, DatasetFormat format, const std::string& origin) {
    return format == DatasetFormat::Csv ? parse_csv(text, origin) : parse_jsonl(text, origin);
}

LabeledSpdDataset load_dataset(const std::filesystem::path& path) {
    return parse_dataset(read_file(path), detect_format(path), path.string());
}

std::string format_dataset(const LabeledSpdDataset& data, DatasetFormat format) {
    std::string out;
    if (format == DatasetFormat::JsonLines) {
        out += json{{"d", data.dim}, {"classes", data.n_classes}}.dump() + "\n";
        for (std::size_t i = 0; i < data.size(); ++i)
            out += json{{"label", data.labels[i]}, {"matrix", matrix_to_json(data.x[i].matrix())}}.dump() + "\n";
        return out;
    }
    for (std::size_t r = 0; r < data.size(); ++r) {
        out += std::to_string(data.labels[r]);
        const Matrix& m = data.x[r].matrix();
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = i; j < m.cols(); ++j) out += "," + format_double(m(i, j));
        out += "\n";
    }
    return out;
}

void save_dataset(const LabeledSpdDataset& data, const std::filesystem::path& path, DatasetFormat format) {
    write_file(path, format_dataset(data, format));
}

void save_dataset(const LabeledSpdDataset& data, const std::filesystem::path& path) {
    save_dataset(data, path, path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::JsonLines);
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw InvalidInput(what + " must be a non-empty array of rows");
    const std::size_t d = j.size();
    Matrix m(static_cast<Index>(d), static_cast<Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        if (!j[i].is_array() || j[i].size() != d) throw InvalidInput(what + " row " + std::to_string(i) + " has the wrong length");
        for (std::size_t k = 0; k < d; ++k) {
            if (!j[i][k].is_number()) throw InvalidInput(what + " entry (" + std::to_string(i) + "," + std::to_string(k) + ") is not a number");
            m(static_cast<Index>(i), static_cast<Index>(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

SpdMat spd_from_json(const json& j, const std::string& what) {
    const Matrix m = matrix_from_json(j, what);
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol) throw InvalidInput(what + " is not symmetric");
    return SpdMat(SymMat::symmetrize(m));
}

json params_to_json(const WgParams& theta) {
    json j;
    j["d"] = theta.dim();
    j["p"] = matrix_to_json(theta.p.matrix());
    j["mu"] = vector_to_json(theta.mu);
    j["sigma_kind"] = to_string(theta.sigma.kind());
    j["sigma"] = theta.sigma.is_full() ? matrix_to_json(theta.sigma.full_matrix().matrix()) : vector_to_json(theta.sigma.diag());
    return j;
}

WgParams params_from_json(const json& j) {
    try {
        const Index d = j.at("d").get<Index>();
        SpdMat p = spd_from_json(j.at("p"), "p");
        if (p.dim() != d) throw InvalidInput("p has dim " + std::to_string(p.dim()) + ", expected " + std::to_string(d));
        Vector mu = vector_from_json(j.at("mu"), "mu");
        const CovKind kind = cov_kind_from_string(j.at("sigma_kind").get<std::string>());
        CovSpec sigma = kind == CovKind::Full ? CovSpec::full(spd_from_json(j.at("sigma"), "sigma"))
                                              : CovSpec::diagonal(vector_from_json(j.at("sigma"), "sigma"));
        return WgParams(std::move(p), std::move(mu), std::move(sigma));
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("parameter file: ") + e.what());
    }
}

void save_params(const WgParams& theta, const std::filesystem::path& path) {
    write_file(path, params_to_json(minimal_representative(theta)).dump(2) + "\n");
}

WgParams load_params(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": invalid JSON: " + e.what());
    }
    try {
        return params_from_json(j);
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

json model_to_json(const ClassifierModel& model) {
    json j;
    j["d"] = model.dim();
    j["n_classes"] = model.n_classes();
    j["log_priors"] = vector_to_json(model.log_priors);
    if (const auto* m = std::get_if<MdmModel>(&model.model)) {
        j["type"] = "mdm";
        j["class_means"] = spd_list_to_json(m->class_means);
    } else if (const auto* t = std::get_if<TsdaModel>(&model.model)) {
        j["type"] = "tsda";
        j["kind"] = t->kind == TsdaKind::Lda ? "lda" : "qda";
        j["diag"] = t->diag;
        j["base"] = matrix_to_json(t->base.matrix());
        json mus = json::array();
        for (const auto& mu : t->class_mu) mus.push_back(vector_to_json(mu));
        j["class_mu"] = std::move(mus);
        json covs = json::array();
        for (const auto& c : t->cov) covs.push_back(cov_to_json(c));
        j["cov"] = std::move(covs);
    } else {
        const auto& w = std::get<WdaModel>(model.model);
        j["type"] = "wda";
        j["shared_sigma"] = w.shared_sigma;
        json ps = json::array();
        for (const auto& th : w.class_params) ps.push_back(params_to_json(th));
        j["class_params"] = std::move(ps);
    }
    return j;
}

ClassifierModel model_from_json(const json& j) {
    try {
        ClassifierModel m;
        m.log_priors = vector_from_json(j.at("log_priors"), "log_priors");
        const std::string type = j.at("type").get<std::string>();
        const auto K = static_cast<std::size_t>(m.log_priors.size());
        if (type == "mdm") {
            MdmModel mdm;
            for (const auto& x : j.at("class_means")) mdm.class_means.push_back(spd_from_json(x, "class mean"));
            if (mdm.class_means.size() != K) throw InvalidInput("class_means count differs from log_priors");
            m.model = std::move(mdm);
        } else if (type == "tsda") {
            TsdaModel t;
            const std::string kind = j.at("kind").get<std::string>();
            if (kind != "lda" && kind != "qda") throw InvalidInput("tsda kind must be lda or qda");
            t.kind = kind == "lda" ? TsdaKind::Lda : TsdaKind::Qda;
            t.diag = j.at("diag").get<bool>();
            t.base = spd_from_json(j.at("base"), "base");
            for (const auto& mu : j.at("class_mu")) t.class_mu.push_back(vector_from_json(mu, "class_mu"));
            for (const auto& c : j.at("cov")) t.cov.push_back(cov_from_json(c));
            if (t.class_mu.size() != K) throw InvalidInput("class_mu count differs from log_priors");
            if (t.cov.size() != 1 && t.cov.size() != K) throw InvalidInput("cov count must be 1 or n_classes");
            m.model = std::move(t);
        } else if (type == "wda") {
            WdaModel w;
            w.shared_sigma = j.at("shared_sigma").get<bool>();
            for (const auto& th : j.at("class_params")) w.class_params.push_back(params_from_json(th));
            if (w.class_params.size() != K) throw InvalidInput("class_params count differs from log_priors");
            m.model = std::move(w);
        } else {
            throw InvalidInput("unknown model type '" + type + "'");
        }
        return m;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("model file: ") + e.what());
    }
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    write_file(path, model_to_json(model).dump(2) + "\n");
}

ClassifierModel load_model(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": invalid JSON: " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

json report_to_json(const FitReport& r) {
    json j;
    j["iterations"] = r.iterations;
    j["final_cost"] = r.final_cost;
    j["grad_norm"] = r.grad_norm;
    j["converged"] = r.converged;
    j["wall_time"] = r.wall_time;
    j["stop_reason"] = r.stop_reason;
    j["cost_trace"] = r.cost_trace;
    j["warnings"] = r.warnings;
    return j;
}

Matrix load_numeric_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line) || line.front() == '#') continue;
        const auto fields = split_commas(line);
        std::vector<double> row;
        bool numeric = true;
        for (auto f : fields) {
            double v;
            if (!parse_double(f, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (rows.empty()) continue;  // header
            throw IoError(at_line(path.string(), lineno) + "non-numeric field");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError(at_line(path.string(), lineno) + "expected " + std::to_string(rows.front().size()) + " columns");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path.string() + ": no numeric rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    return m;
}

}  // namespace spdwg::io
