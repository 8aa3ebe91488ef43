#pragma once

#include <openssl/evp.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "c2flow/common.hpp"

namespace c2flow::tool {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";

inline std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read '" + p.string() + "' for checksumming");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  for (unsigned i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Relative path -> sha256 for every regular file under dir except the manifest.
inline nlohmann::json checksum_tree(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  nlohmann::json out = nlohmann::json::object();
  for (const auto& f : files) out[fs::relative(f, dir).generic_string()] = sha256_file(f);
  return out;
}

/// Output directory that only appears once every file in it is complete.
/// Files go to a hidden sibling directory which is renamed into place on
/// commit and deleted otherwise. An existing target is replaced only if it
/// holds a manifest, i.e. it is an earlier c2flow output.
class StagedOutput {
 public:
  explicit StagedOutput(const fs::path& target) : target_(fs::absolute(target).lexically_normal()) {
    if (target_.filename().empty()) target_ = target_.parent_path();
    if (fs::exists(target_) && !fs::is_directory(target_))
      throw Error("output path '" + target_.string() + "' exists and is not a directory");
    if (fs::exists(target_) && !fs::is_empty(target_) && !fs::exists(target_ / "manifest.json"))
      throw Error("refusing to replace '" + target_.string() + "': it is not empty and has no manifest.json");
    fs::create_directories(target_.parent_path());
    staging_ = target_.parent_path() / ("." + target_.filename().string() + ".partial-" + std::to_string(::getpid()));
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }

  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  ~StagedOutput() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  fs::path file(const std::string& rel) const {
    const auto p = staging_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }

  const fs::path& staging() const { return staging_; }
  const fs::path& target() const { return target_; }

  /// Writes manifest.json (with output checksums) and promotes the directory.
  void commit(nlohmann::json manifest) {
    manifest["outputs"] = checksum_tree(staging_);
    manifest["finished_at"] = utc_timestamp();
    {
      std::ofstream out(staging_ / "manifest.json");
      out << manifest.dump(1) << '\n';
      if (!out) throw Error("failed writing manifest in '" + staging_.string() + "'");
    }
    fs::path old;
    if (fs::exists(target_)) {
      old = target_.parent_path() / ("." + target_.filename().string() + ".old-" + std::to_string(::getpid()));
      fs::remove_all(old);
      fs::rename(target_, old);
    }
    fs::rename(staging_, target_);
    committed_ = true;
    if (!old.empty()) fs::remove_all(old);
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

/// Manifest skeleton; outputs and finished_at are filled in by commit().
inline nlohmann::json start_manifest(const std::string& command, std::uint64_t seed, int jobs) {
  return {{"tool", "c2flow"},
          {"version", kToolVersion},
          {"command", command},
          {"seed", seed},
          {"jobs", jobs},
          {"started_at", utc_timestamp()},
          {"config", nlohmann::json::object()},
          {"inputs", nlohmann::json::object()}};
}

inline void record_input(nlohmann::json& manifest, const std::string& path) {
  manifest["inputs"][path] = sha256_file(path);
}

}  // namespace c2flow::tool
