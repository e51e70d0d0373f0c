#pragma once

// Shared plumbing for the qdx subcommands: configuration lookup, seeded
// defaults, and output files that carry a provenance header.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "qdx/kvconfig.hpp"
#include "qdx/pulsesim.hpp"
#include "qdx/random.hpp"

namespace qdx::cli {

inline constexpr const char* kVersion = "1.0.0";

struct GlobalOptions {
  std::string config_path;
  std::string device_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string out_dir;
  bool dry_run = false;
  bool timestamp = false;
};

class Context {
 public:
  Context(std::string command, const GlobalOptions& g);

  const std::string& command() const { return command_; }
  const KvConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  unsigned jobs() const { return jobs_; }
  bool dry_run() const { return dry_run_; }
  const std::filesystem::path& out_dir() const { return out_dir_; }

  /// Device from --device, then run.device in the config, then `fallback`
  /// (a file name inside the bundled data directory).
  DeviceParams device(const std::string& fallback);
  /// Resolves a path given in the config relative to the config file.
  std::string resolve(const std::string& path) const;
  /// Adds file contents to the configuration hash.
  void hash_file(const std::string& path);

  Shots shots(const std::string& key, std::int64_t fallback) const;
  std::vector<double> grid(const std::string& prefix, double lo, double hi, int count) const;
  std::vector<std::string> strings(const std::string& key,
                                   const std::vector<std::string>& fallback) const;

  /// Rejects unknown keys; call after every lookup of a subcommand.
  void finish_config() const;

  /// Opens `name` in the output directory and writes the header.
  std::ofstream open(const std::string& name) const;
  std::string header() const;
  std::uint64_t config_hash() const { return fnv1a(hash_material_); }
  void announce(const std::string& name) const;

 private:
  std::string command_;
  KvConfig cfg_;
  std::filesystem::path cfg_dir_;
  std::string device_flag_;
  std::uint64_t seed_ = 0;
  unsigned jobs_ = 1;
  bool dry_run_ = false;
  bool timestamp_ = false;
  std::filesystem::path out_dir_;
  std::string hash_material_;
};

std::string data_path(const std::string& name);

}  // namespace qdx::cli
