#include "metahom/report.hpp"

#include <fstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "metahom/error.hpp"
#include "metahom/version.hpp"

namespace metahom {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::io, "SHA-256 digest failed");
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

nlohmann::json run_metadata(const RunConfig& config, const std::string& command) {
  return {{"tool", "metahom"},     {"version", kVersion},  {"git_hash", kGitHash},
          {"command", command},    {"seed", config.seed},  {"config", to_json(config)}};
}

nlohmann::json matrix_json(const Eigen::Matrix3cd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.push_back({m(i, j).real(), m(i, j).imag()});
  return out;
}

nlohmann::json matrix_json(const Eigen::Matrix3d& m) { return matrix_json(Eigen::Matrix3cd(m.cast<cplx>())); }

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw Error(ErrorCode::io, fmt::format("write to '{}' failed", path.string()));
}

}  // namespace

void write_json_artifact(const std::filesystem::path& path, const nlohmann::json& payload,
                         const nlohmann::json& metadata) {
  nlohmann::json meta = metadata;
  meta["content_sha256"] = sha256_hex(payload.dump());
  const nlohmann::json doc = {{"metadata", meta}, {"result", payload}};
  write_text(path, doc.dump(2) + "\n");
}

void write_csv_artifact(const std::filesystem::path& path, const std::string& body, const nlohmann::json& metadata) {
  std::string text = fmt::format("# {} {} ({})\n", metadata.value("tool", "metahom"),
                                 metadata.value("version", ""), metadata.value("git_hash", ""));
  if (metadata.contains("config")) text += "# config: " + metadata["config"].dump() + "\n";
  text += "# content_sha256: " + sha256_hex(body) + "\n";
  text += body;
  write_text(path, text);
}

}  // namespace metahom
