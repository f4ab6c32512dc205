#include "manifest.hpp"

#include <fstream>
#include <iterator>
#include <memory>

#include <openssl/evp.h>

#include "mgsim/errors.hpp"

#ifndef MGSIM_VERSION
#define MGSIM_VERSION "unknown"
#endif

namespace mgsim::cli {

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

Manifest::Manifest(std::string command) {
    j_["tool"] = "mgsim";
    j_["version"] = MGSIM_VERSION;
    j_["command"] = std::move(command);
    j_["options"] = nlohmann::ordered_json::object();
    j_["config"] = nlohmann::ordered_json::object();
    j_["inputs"] = nlohmann::ordered_json::array();
    j_["outputs"] = nlohmann::ordered_json::array();
    j_["results"] = nlohmann::ordered_json::object();
}

void Manifest::input(const std::string& role, const std::filesystem::path& path) {
    j_["inputs"].push_back({{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}});
}

void Manifest::input_bytes(const std::string& role, const std::string& label, const std::string& bytes) {
    j_["inputs"].push_back({{"role", role}, {"path", label}, {"sha256", sha256_hex(bytes)}});
}

void Manifest::output(const std::filesystem::path& file) { j_["outputs"].push_back(file.filename().string()); }

void Manifest::write(const std::filesystem::path& dir) const {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / "manifest.json").string());
    out << j_.dump(2) << '\n';
}

}  // namespace mgsim::cli
