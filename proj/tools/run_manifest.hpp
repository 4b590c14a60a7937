#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/error.hpp"

#ifndef PROCAP_GIT_DESCRIBE
#define PROCAP_GIT_DESCRIBE "unknown"
#endif

namespace procap::cli {

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

// One per artifact-producing command, written as run_manifest.json in the
// output directory.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

  void set_config(nlohmann::json c) { config_ = std::move(c); }
  void set_seed(std::uint64_t s) { seed_ = s; }

  // Hashes a file, or every regular file below a directory.
  void add_input(const std::filesystem::path& p) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) inputs_[f.generic_string()] = sha256_file(f);
    } else {
      inputs_[p.generic_string()] = sha256_file(p);
    }
  }

  void add_output(const std::filesystem::path& p) { outputs_.push_back(p); }

  void write(const std::filesystem::path& dir) const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& p : outputs_) {
      out[p.generic_string()] = std::filesystem::exists(p) ? sha256_file(p) : std::string("missing");
    }
    nlohmann::json j = {
        {"command", command_},
        {"argv", argv_},
        {"config", config_},
        {"seed", seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr)},
        {"git_describe", PROCAP_GIT_DESCRIBE},
        {"inputs", inputs_},
        {"outputs", out},
        {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()},
    };
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "run_manifest.json", std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + (dir / "run_manifest.json").string());
    os << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_ = nlohmann::json::object();
  std::optional<std::uint64_t> seed_;
  nlohmann::json inputs_ = nlohmann::json::object();
  std::vector<std::filesystem::path> outputs_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace procap::cli
