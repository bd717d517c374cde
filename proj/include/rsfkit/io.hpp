#pragma once

#include <filesystem>
#include <string>

#include "rsfkit/model.hpp"

#include <nlohmann/json_fwd.hpp>

namespace rsfkit {

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

nlohmann::json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& j);

Matrix matrix_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json matrix_to_json(const Matrix& M);

SystemModel model_from_json(const nlohmann::json& j, const std::string& origin = "");
nlohmann::json model_to_json(const SystemModel& m);

/// Load a model file; an interconnection file (with "subsystems") loads
/// and validates all parts.
SystemModel load_model(const std::filesystem::path& path);
Interconnection load_interconnection(const std::filesystem::path& path);
bool is_interconnection_file(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const SystemModel& m);

/// Trace CSV: header t,x1..xn,y1..ym,u1..up,v1..vq,w1..wr, full precision.
void save_trace_csv(const std::filesystem::path& path, const Trace& tr);
Trace load_trace_csv(const std::filesystem::path& path);

}  // namespace rsfkit
