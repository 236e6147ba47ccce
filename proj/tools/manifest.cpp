#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

#include "monostage/errors.hpp"

namespace monostage::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      start_(std::chrono::steady_clock::now()),
      started_at_(std::chrono::system_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) { inputs_.push_back(path); }

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

void RunManifest::write(const std::filesystem::path& dir) {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["argv"] = argv_;
  j["config"] = config_;
  j["seed"] = seed_;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& p : inputs_) inputs[p.string()] = sha256_file(p);
  j["inputs"] = std::move(inputs);
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  for (const auto& p : outputs_) outputs[p.string()] = sha256_file(p);
  j["outputs"] = std::move(outputs);
  for (const auto& [key, value] : extra_.items()) j[key] = value;

  const std::time_t started = std::chrono::system_clock::to_time_t(started_at_);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started));
  j["started_at"] = stamp;
  j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();

  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace monostage::cli
