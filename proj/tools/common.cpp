#include <ctime>
#include <fstream>

#include "aquanet/dataset.hpp"
#include "aquanet/errors.hpp"
#include "cli_common.hpp"

namespace aquanet::cli {

std::optional<std::uint64_t> CommonOptions::seed_override() const {
  if (seed_opt && seed_opt->count() > 0) return seed;
  return std::nullopt;
}

std::optional<long> CommonOptions::iters_override() const {
  if (iters_opt && iters_opt->count() > 0) return iters;
  return std::nullopt;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv) : start_(std::chrono::steady_clock::now()) {
  doc_["command"] = std::move(command);
  doc_["argv"] = std::move(argv);
  doc_["outputs"] = nlohmann::json::array();
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  doc_["started_at"] = buf;
}

void RunManifest::write(const fs::path &out_dir) {
  doc_["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  write_json_file(out_dir / "run_manifest.json", doc_);
}

nlohmann::json read_json_file(const fs::path &path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigInvalid(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path &path, const nlohmann::json &doc) { write_text_file(path, doc.dump(2) + "\n"); }

Toggles parse_toggles(const std::vector<std::string> &raw) {
  Toggles t;
  for (const auto &item : raw) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigInvalid("toggle '" + item + "' is not name=on|off");
    const std::string name = item.substr(0, eq), value = item.substr(eq + 1);
    bool on;
    if (value == "on") {
      on = true;
    } else if (value == "off") {
      on = false;
    } else {
      throw ConfigInvalid("toggle '" + item + "': value must be on or off");
    }
    if (name == "two_paths") {
      t.two_paths = on;
    } else if (name == "lm") {
      t.lm = on;
    } else if (name == "cm") {
      t.cm = on;
    } else {
      throw ConfigInvalid("unknown toggle '" + name + "' (expected two_paths, lm or cm)");
    }
  }
  return t;
}

} // namespace aquanet::cli
