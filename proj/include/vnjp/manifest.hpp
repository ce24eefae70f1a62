#pragma once

#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>
#include <openssl/evp.h>

#include "vnjp/errors.hpp"
#include "vnjp/version.hpp"

namespace vnjp {

namespace detail {

inline std::string digest_to_hex(const unsigned char* digest, unsigned int len) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

struct EvpCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  ~EvpCtx() { EVP_MD_CTX_free(ctx); }
};

}  // namespace detail

inline std::string sha256_hex(std::string_view data) {
  detail::EvpCtx c;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!c.ctx || EVP_DigestInit_ex(c.ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(c.ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(c.ctx, digest, &len) != 1) {
    throw IoError("SHA-256 digest failed");
  }
  return detail::digest_to_hex(digest, len);
}

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  detail::EvpCtx c;
  if (!c.ctx || EVP_DigestInit_ex(c.ctx, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 digest failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(c.ctx, buf, static_cast<std::size_t>(got)) != 1) {
      throw IoError("SHA-256 digest failed");
    }
  }
  if (in.bad()) throw IoError("read failed: " + path.string());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(c.ctx, digest, &len) != 1) throw IoError("SHA-256 digest failed");
  return detail::digest_to_hex(digest, len);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Audit record written beside every subcommand's outputs: content hashes
/// of all inputs and outputs plus the effective config. Two runs over the
/// same inputs differ only in the timestamp field.
struct RunManifest {
  std::string subcommand;
  std::string timestamp = utc_timestamp();
  std::map<std::string, std::string> inputs;   // path as given -> sha256
  std::map<std::string, std::string> outputs;  // path as given -> sha256
  nlohmann::ordered_json config;

  void add_input(const std::filesystem::path& path) {
    inputs[path.string()] = sha256_file(path);
  }

  void add_output(const std::filesystem::path& path) {
    outputs[path.string()] = sha256_file(path);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "vnjp";
    j["version"] = version_string;
    j["subcommand"] = subcommand;
    j["timestamp"] = timestamp;
    j["config"] = config.is_null() ? nlohmann::ordered_json::object() : config;
    j["inputs"] = nlohmann::ordered_json(inputs);
    j["outputs"] = nlohmann::ordered_json(outputs);
    return j;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << to_json().dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
  }
};

}  // namespace vnjp
