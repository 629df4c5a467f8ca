#include <cstdlib>
#include <filesystem>

#include "shift/harness.hpp"

namespace shift::harness {

std::string out_root(const ExperimentConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv(kOutEnvVar); env && *env) return env;
  return "out";
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

std::string artifact_dir(const ExperimentConfig& cfg) {
  std::string dir = out_root(cfg) + "/t" + hash_hex(train_hash(cfg));
  ensure_dir(dir);
  return dir;
}

std::string victim_path(const ExperimentConfig& cfg) { return artifact_dir(cfg) + "/victim.bin"; }

std::string denoiser_path(const ExperimentConfig& cfg) {
  return artifact_dir(cfg) + "/denoiser.bin";
}

std::string ae_path(const ExperimentConfig& cfg) { return artifact_dir(cfg) + "/ae.bin"; }

std::string logs_dir(const ExperimentConfig& cfg) {
  std::string dir = artifact_dir(cfg) + "/logs";
  ensure_dir(dir);
  return dir;
}

}  // namespace shift::harness
