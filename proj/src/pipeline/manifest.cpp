#include "srosync/pipeline/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include "json.hpp"
#include "srosync/error.hpp"

namespace srosync::pipeline {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error(ErrorKind::kIo, "SHA-256 initialisation failed");
    }
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "srosync-manifest/1";
  j["software_version"] = m.software_version;
  j["config_hash"] = m.config_hash;
  j["seeds"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.seeds) j["seeds"][k] = v;
  j["conditions"] = m.conditions;
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& o : m.outputs) j["outputs"].push_back({{"path", o.path}, {"sha256", o.sha256}});
  j["summary"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.summary) {
    if (std::isfinite(v)) j["summary"][k] = v;
    else j["summary"][k] = nullptr;
  }
  j["notes"] = m.notes;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.software_version = j.at("software_version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [k, v] : j.at("seeds").items()) m.seeds[k] = v.get<std::uint64_t>();
    m.conditions = j.at("conditions").get<std::vector<std::string>>();
    for (const auto& o : j.at("outputs")) {
      m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>()});
    }
    for (const auto& [k, v] : j.at("summary").items()) {
      m.summary[k] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    }
    m.notes = j.at("notes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, std::string("manifest: ") + e.what());
  }
  return m;
}

}  // namespace srosync::pipeline
