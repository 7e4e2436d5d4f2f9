#pragma once

// File formats: labeled SPD datasets (JSON lines or CSV), wrapped Gaussian
// parameter files and classifier model files (JSON).

#include "spdwg/classify.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace spdwg::io {

enum class DatasetFormat { JsonLines, Csv };

/// By extension (.csv, .jsonl/.ndjson/.json), falling back to sniffing the
/// first non-blank character of the file.
DatasetFormat detect_format(const std::filesystem::path& path);

/// Records are validated: square, symmetric to 1e-9 (then symmetrized) and
/// positive definite. Errors are IoError naming the path and line.
LabeledSpdDataset load_dataset(const std::filesystem::path& path);
LabeledSpdDataset parse_dataset(const std::string& text, DatasetFormat format, const std::string& origin = "<memory>");

void save_dataset(const LabeledSpdDataset& data, const std::filesystem::path& path);
void save_dataset(const LabeledSpdDataset& data, const std::filesystem::path& path, DatasetFormat format);
std::string format_dataset(const LabeledSpdDataset& data, DatasetFormat format);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& what);
SpdMat spd_from_json(const nlohmann::json& j, const std::string& what);

/// {d, p, mu, sigma_kind, sigma} as stored (no normalization).
nlohmann::json params_to_json(const WgParams& theta);
WgParams params_from_json(const nlohmann::json& j);

/// Parameter files always hold the minimal representative.
void save_params(const WgParams& theta, const std::filesystem::path& path);
WgParams load_params(const std::filesystem::path& path);

nlohmann::json model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const nlohmann::json& j);
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

nlohmann::json report_to_json(const FitReport& report);

/// Numeric CSV (rows x columns); a non-numeric first line is treated as a header.
Matrix load_numeric_csv(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace spdwg::io
