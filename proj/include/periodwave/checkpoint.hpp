#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "periodwave/estimator.hpp"

namespace periodwave {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// <dir>/manifest.json plus one little-endian float32 file per parameter,
// each listed with its shape, byte count and SHA-256.
void save_checkpoint(const std::filesystem::path& dir, const Estimator<float>& model, long long step,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  std::unique_ptr<Estimator<float>> model;
  long long step = 0;
  nlohmann::json manifest;
};

// Rebuilds the estimator from the manifest's config echo and verifies every
// tensor against its recorded hash.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

std::string sha256_hex(const void* data, std::size_t bytes);

}  // namespace periodwave
