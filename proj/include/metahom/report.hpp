#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <json.hpp>

#include "metahom/config.hpp"

namespace metahom {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Tool name, version, git hash, command, seed and the canonical config echo.
nlohmann::json run_metadata(const RunConfig& config, const std::string& command);

/// Nine [re, im] pairs in row-major order.
nlohmann::json matrix_json(const Eigen::Matrix3cd& m);
nlohmann::json matrix_json(const Eigen::Matrix3d& m);

/// Writes {"metadata": metadata + content_sha256, "result": payload}; the hash
/// covers the compact dump of the payload.
void write_json_artifact(const std::filesystem::path& path, const nlohmann::json& payload,
                         const nlohmann::json& metadata);

/// Writes '#' comment lines with the tool version, config echo and the SHA-256
/// of `body`, then `body` itself.
void write_csv_artifact(const std::filesystem::path& path, const std::string& body, const nlohmann::json& metadata);

}  // namespace metahom
