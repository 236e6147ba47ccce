#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace monostage::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Reproducibility record written next to every command's outputs.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  nlohmann::ordered_json& config() { return config_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::ordered_json value) { extra_[key] = std::move(value); }

  /// Hashes outputs, stamps wall-clock, writes <dir>/manifest.json.
  void write(const std::filesystem::path& dir);

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json extra_ = nlohmann::ordered_json::object();
  std::uint64_t seed_ = 0;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::system_clock::time_point started_at_;
};

}  // namespace monostage::cli
