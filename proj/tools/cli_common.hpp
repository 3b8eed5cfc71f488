#ifndef AQUANET_TOOLS_CLI_COMMON_HPP_
#define AQUANET_TOOLS_CLI_COMMON_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace aquanet::cli {

namespace fs = std::filesystem;

/// Options shared by most commands. Every flag can also come from AQUANET_<FLAG>.
struct CommonOptions {
  std::string config;
  std::string dataset;
  std::string out;
  std::uint64_t seed = 0;
  long iters = 0;
  CLI::Option *seed_opt = nullptr;
  CLI::Option *iters_opt = nullptr;
  std::vector<std::string> toggles;
  int label_offset = 0;

  std::optional<std::uint64_t> seed_override() const;
  std::optional<long> iters_override() const;
};

/// One JSON manifest per run, written last.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);
  void set(const std::string &key, nlohmann::json value) { doc_[key] = std::move(value); }
  void add_output(const fs::path &p) { doc_["outputs"].push_back(p.string()); }
  void write(const fs::path &out_dir);

 private:
  nlohmann::json doc_;
  std::chrono::steady_clock::time_point start_;
};

nlohmann::json read_json_file(const fs::path &path);
void write_json_file(const fs::path &path, const nlohmann::json &doc);

/// Parsed `name=on|off` toggles; names are two_paths, lm and cm.
struct Toggles {
  std::optional<bool> two_paths;
  std::optional<bool> lm;
  std::optional<bool> cm;
};
Toggles parse_toggles(const std::vector<std::string> &raw);

using Handler = std::function<void()>;

/// Adds every subcommand; the matching handler runs after a successful parse.
std::vector<std::pair<CLI::App *, Handler>> register_all(CLI::App &app, const std::vector<std::string> &argv);

} // namespace aquanet::cli

#endif // AQUANET_TOOLS_CLI_COMMON_HPP_
