#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"
#include "namegate/models.hpp"
#include "namegate/training.hpp"

namespace namegate {

struct EvalOptions {
  bool write_predictions = true;
  bool write_checkpoints = true;
};

// A parsed run configuration. Paths are absolute or relative to base_dir,
// the directory holding the configuration file.
struct RunConfig {
  std::filesystem::path base_dir;
  std::filesystem::path manifest;
  nlohmann::json provider;  // empty when not configured
  ModelOptions model;
  TrainConfig train;
  EvalOptions eval;
  std::uint64_t seed = 0;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
};

// Strict parse; unknown keys and bad values throw ConfigError. With
// `kind_override`, the model section is read as if it named that kind, and
// the learning-rate grid falls back to that kind's default unless given.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                           std::optional<ModelKind> kind_override = std::nullopt);

// Reads and parses a file; malformed JSON throws ConfigError with the
// parser's position.
nlohmann::json read_json_file(const std::filesystem::path& path);
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<ModelKind> kind_override = std::nullopt);

nlohmann::ordered_json to_json(const RunConfig& c);

}  // namespace namegate
