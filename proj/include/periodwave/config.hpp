#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "periodwave/estimator.hpp"
#include "periodwave/flow.hpp"
#include "periodwave/sampler.hpp"
#include "periodwave/spectral.hpp"

namespace periodwave {

inline constexpr const char* kVersion = "periodwave 0.1.0";

// Everything a run needs. Serialized as one flat JSON object whose keys are
// dotted paths ("train.lr", "model.periods", "sampler.steps", ...).
struct RunConfig {
  std::string model_preset = "full_band";  // full_band | multi_band | tiny | tiny_multi_band
  int model_band = 0;                      // band of a multi-band preset
  MelConfig mel;
  EstimatorConfig model = EstimatorConfig::full_band();
  TrainConfig train = TrainConfig::full_band();
  SamplerConfig sampler;
  std::string data_dir;
  std::vector<std::string> data_files;
  std::string out_dir = "run";
  int log_every = 10;
  long long checkpoint_every = 1000;
  std::uint64_t seed = 1234;

  void validate() const;
};

nlohmann::json to_flat_json(const RunConfig& c);

// Applies `flat` on top of the defaults. Preset keys are applied first so
// every other key refines the preset; multi-band presets default to the
// per-band learning rate unless train.lr is given. Unknown keys throw.
RunConfig resolve_config(const nlohmann::json& flat);

// Reads a flat JSON object from disk; nested objects are rejected.
nlohmann::json read_flat_json(const std::filesystem::path& path);

// model.* subset used in checkpoint manifests.
nlohmann::json estimator_config_json(const EstimatorConfig& c);
EstimatorConfig estimator_config_from_json(const nlohmann::json& flat);

// Git blob id (SHA-1 of "blob <len>\0<text>") of the version string.
std::string code_version_hash();

// Resolved config plus seed, device and code hash.
nlohmann::json run_manifest(const RunConfig& c, const std::string& command, const nlohmann::json& overrides);

// PERIODWAVE_DEVICE, or "cpu" when unset.
std::string compute_device();

}  // namespace periodwave
