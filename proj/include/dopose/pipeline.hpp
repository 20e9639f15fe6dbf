#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dopose/eval.hpp"
#include "dopose/grasp.hpp"

namespace dopose {

// Setting names, identical to the long flag names.
const std::vector<std::string> &setting_keys();

// "ransac-iters" → "DOPOSE_RANSAC_ITERS"
std::string env_var_name(const std::string &key);

using EnvLookup = std::function<std::optional<std::string>(const std::string &name)>;
EnvLookup process_environment();

struct SettingSources {
  std::map<std::string, std::string> flags;  // given on the command line
  EnvLookup env;                             // may be empty
  nlohmann::json config = nlohmann::json::object();
};

// flags > DOPOSE_* environment > config file > nullopt (caller default).
std::optional<std::string> resolve_setting(const SettingSources &sources, const std::string &key);

struct PipelineConfig {
  std::filesystem::path dataset;
  std::string split = "test";
  std::string scene;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  CocoOptions metrics;
  RansacConfig ransac;
  std::optional<std::pair<int, int>> resolution;

  std::filesystem::path annotation;
  std::string format;
  std::filesystem::path gt, results;
  std::filesystem::path rgb, depth, masks, camera;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool serial = false;
};

// Parses every resolved setting. Throws kInvalidArgument naming the setting.
PipelineConfig make_config(const SettingSources &sources);

// "0.5,0.75" or "0.5:0.05:0.95"
std::vector<double> parse_thresholds(const std::string &text);

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPrecondition = 2;

/**
 * Command-line entry point. Results go to `out`, logs and diagnostics to
 * `err`. Returns 0 on success, 2 when a precondition (missing input file,
 * missing world transforms, locked scene) fails and 1 on any other error.
 */
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err,
            EnvLookup env = process_environment());

}  // namespace dopose
