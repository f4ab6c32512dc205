#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace mgsim::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// manifest.json: everything needed to reproduce a run. No wall-clock data,
/// so repeated runs give identical bytes.
class Manifest {
public:
    explicit Manifest(std::string command);

    void input(const std::string& role, const std::filesystem::path& path);
    void input_bytes(const std::string& role, const std::string& label, const std::string& bytes);
    void output(const std::filesystem::path& file);
    nlohmann::ordered_json& options() { return j_["options"]; }
    nlohmann::ordered_json& config() { return j_["config"]; }
    nlohmann::ordered_json& results() { return j_["results"]; }

    void write(const std::filesystem::path& dir) const;

private:
    nlohmann::ordered_json j_;
};

}  // namespace mgsim::cli
