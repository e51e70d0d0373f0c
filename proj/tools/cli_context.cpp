#include "cli_context.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <sstream>

#include "qdx/error.hpp"

namespace qdx::cli {

namespace fs = std::filesystem;

std::string data_path(const std::string& name) { return std::string(QDX_DATA_DIR) + "/" + name; }

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Context::Context(std::string command, const GlobalOptions& g)
    : command_(std::move(command)), device_flag_(g.device_path), jobs_(g.jobs),
      dry_run_(g.dry_run), timestamp_(g.timestamp) {
  if (!g.config_path.empty()) {
    cfg_ = KvConfig::load(g.config_path);
    cfg_dir_ = fs::path(g.config_path).parent_path();
  }
  seed_ = g.seed ? *g.seed : static_cast<std::uint64_t>(cfg_.get_int("run.seed", 0));
  if (g.jobs == 0) throw ConfigError("--jobs must be at least 1");
  if (!g.out_dir.empty()) {
    out_dir_ = g.out_dir;
  } else if (const char* env = std::getenv("QDX_OUTPUT_DIR"); env && *env) {
    out_dir_ = env;
  } else {
    out_dir_ = "qdx_out";
  }
  // The hash covers what determines the numbers: command, seed, config.
  hash_material_ = command_ + "\nseed=" + std::to_string(seed_) + "\n" + cfg_.canonical();
}

std::string Context::resolve(const std::string& path) const {
  const fs::path p(path);
  if (p.is_absolute() || cfg_dir_.empty()) return path;
  return (cfg_dir_ / p).string();
}

void Context::hash_file(const std::string& path) {
  hash_material_ += "\nfile:" + read_file(path);
}

DeviceParams Context::device(const std::string& fallback) {
  std::string path;
  if (!device_flag_.empty()) {
    path = device_flag_;
  } else if (cfg_.has("run.device")) {
    path = resolve(cfg_.get_string("run.device"));
  } else {
    path = data_path(fallback);
  }
  hash_file(path);
  return load_device(path);
}

Shots Context::shots(const std::string& key, std::int64_t fallback) const {
  const std::int64_t n = cfg_.get_int(key, fallback);
  if (n < 0) throw ConfigError(key + ": shots must be >= 0 (0 = infinite)");
  return n == 0 ? Shots::infinite() : Shots(static_cast<std::uint64_t>(n));
}

std::vector<double> Context::grid(const std::string& prefix, double lo, double hi, int count) const {
  lo = cfg_.get_double(prefix + "_lo", lo);
  hi = cfg_.get_double(prefix + "_hi", hi);
  count = static_cast<int>(cfg_.get_int(prefix + "_count", count));
  if (count < 1) throw ConfigError(prefix + "_count must be at least 1");
  if (count == 1) return {lo};
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) v[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (count - 1);
  return v;
}

std::vector<std::string> Context::strings(const std::string& key,
                                          const std::vector<std::string>& fallback) const {
  if (!cfg_.has(key)) return fallback;
  std::vector<std::string> out;
  std::stringstream ss(cfg_.get_string(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

void Context::finish_config() const {
  cfg_.get_int("run.seed", 0);
  cfg_.get_string("run.device", "");
  cfg_.check_all_used();
}

std::string Context::header() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "# qdx %s %s seed=%" PRIu64 " config=%016" PRIx64 "\n", kVersion,
                command_.c_str(), seed_, config_hash());
  std::string h = buf;
  if (timestamp_) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char ts[64];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    h += std::string("# generated ") + ts + "\n";
  }
  return h;
}

std::ofstream Context::open(const std::string& name) const {
  fs::create_directories(out_dir_);
  const fs::path path = out_dir_ / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << header();
  return out;
}

void Context::announce(const std::string& name) const {
  std::cout << "wrote " << (out_dir_ / name).string() << "\n";
}

}  // namespace qdx::cli
