#include "periodwave/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include <openssl/evp.h>

#include "periodwave/config.hpp"

namespace periodwave {

static_assert(std::endian::native == std::endian::little, "checkpoint tensors are written in host byte order");

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const void* data, std::size_t bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned n = 0;
  if (EVP_Digest(data, bytes, md, &n, EVP_sha256(), nullptr) != 1) throw CheckpointError("sha256 failed");
  std::ostringstream s;
  for (unsigned i = 0; i < n; ++i) s << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return s.str();
}

void save_checkpoint(const fs::path& dir, const Estimator<float>& model, long long step, const json& extra) {
  fs::create_directories(dir);
  json params = json::array();
  for (const auto& p : model.parameters()) {
    const Mat<float>& m = p.var.data();
    const std::size_t bytes = sizeof(float) * std::size_t(m.size());
    const std::string file = p.name + ".f32";
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(m.data()), std::streamsize(bytes));
    if (!out) throw CheckpointError("short write on " + (dir / file).string());
    params.push_back({{"name", p.name},
                      {"shape", p.shape},
                      {"dtype", "float32"},
                      {"file", file},
                      {"bytes", bytes},
                      {"sha256", sha256_hex(m.data(), bytes)}});
  }
  json manifest;
  manifest["format"] = "periodwave-checkpoint";
  manifest["format_version"] = 1;
  manifest["version"] = kVersion;
  manifest["config"] = estimator_config_json(model.config());
  manifest["seed"] = model.seed();
  manifest["step"] = step;
  manifest["parameter_count"] = model.parameter_count();
  manifest["parameters"] = params;
  manifest["extra"] = extra;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw CheckpointError("missing checkpoint manifest " + mpath.string());
  LoadedCheckpoint out;
  try {
    in >> out.manifest;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed manifest " + mpath.string() + ": " + e.what());
  }
  const json& man = out.manifest;
  if (man.value("format", "") != "periodwave-checkpoint") throw CheckpointError(mpath.string() + ": not a checkpoint");

  const EstimatorConfig cfg = estimator_config_from_json(man.at("config"));
  out.model = std::make_unique<Estimator<float>>(cfg, man.at("seed").get<std::uint64_t>());
  out.step = man.at("step").get<long long>();

  auto& params = out.model->parameters();
  const json& listed = man.at("parameters");
  if (listed.size() != params.size()) {
    throw CheckpointError("checkpoint lists " + std::to_string(listed.size()) + " tensors, model has " +
                          std::to_string(params.size()));
  }
  std::vector<char> buf;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& e = listed[i];
    auto& p = params[i];
    if (e.at("name").get<std::string>() != p.name) {
      throw CheckpointError("tensor " + std::to_string(i) + " is '" + e.at("name").get<std::string>() +
                            "', expected '" + p.name + "'");
    }
    if (e.at("shape").get<std::vector<Index>>() != p.shape || e.at("dtype").get<std::string>() != "float32") {
      throw CheckpointError("tensor '" + p.name + "' has an unexpected shape or dtype");
    }
    Mat<float>& m = p.var.data();
    const std::size_t bytes = sizeof(float) * std::size_t(m.size());
    const fs::path f = dir / e.at("file").get<std::string>();
    std::ifstream tin(f, std::ios::binary);
    if (!tin) throw CheckpointError("missing tensor file " + f.string());
    buf.assign(bytes + 1, 0);
    tin.read(buf.data(), std::streamsize(bytes + 1));
    if (std::size_t(tin.gcount()) != bytes) {
      throw CheckpointError("tensor file " + f.string() + " has the wrong size");
    }
    if (sha256_hex(buf.data(), bytes) != e.at("sha256").get<std::string>()) {
      throw CheckpointError("hash mismatch for " + f.string());
    }
    std::memcpy(m.data(), buf.data(), bytes);
  }
  return out;
}

}  // namespace periodwave
