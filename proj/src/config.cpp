#include "periodwave/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace periodwave {

using nlohmann::json;

namespace {

template <typename C>
struct Binding {
  std::string key;
  std::function<void(C&, const json&)> set;
  std::function<json(const C&)> get;
};

#define PW_FIELD(C, key, member) \
  Binding<C> { key, [](C& c, const json& v) { v.get_to(c.member); }, [](const C& c) { return json(c.member); } }

const std::vector<Binding<EstimatorConfig>>& model_bindings() {
  using E = EstimatorConfig;
  static const std::vector<Binding<E>> b = {
      PW_FIELD(E, "n_mels", n_mels),
      PW_FIELD(E, "periods", periods),
      PW_FIELD(E, "down_ratios", down_ratios),
      PW_FIELD(E, "up_ratios", up_ratios),
      PW_FIELD(E, "dblock_dims", dblock_dims),
      PW_FIELD(E, "mblock_dim", mblock_dim),
      PW_FIELD(E, "ublock_dims", ublock_dims),
      PW_FIELD(E, "res_kernels", res_kernels),
      PW_FIELD(E, "res_dilations", res_dilations),
      PW_FIELD(E, "final_res_kernels", final_res_kernels),
      PW_FIELD(E, "final_res_dilations", final_res_dilations),
      PW_FIELD(E, "time_embed_dim", time_embed_dim),
      PW_FIELD(E, "period_embed_dim", period_embed_dim),
      PW_FIELD(E, "mlp_dims", mlp_dims),
      PW_FIELD(E, "activation", activation),
      PW_FIELD(E, "multiband", multiband),
      PW_FIELD(E, "lower_bands", lower_bands),
      PW_FIELD(E, "mel_encoder.mel_embed_dim", mel.mel_embed_dim),
      PW_FIELD(E, "mel_encoder.n_blocks_stage1", mel.n_blocks_stage1),
      PW_FIELD(E, "mel_encoder.hidden_dim_stage1", mel.hidden_dim_stage1),
      PW_FIELD(E, "mel_encoder.drop_path", mel.drop_path),
      PW_FIELD(E, "mel_encoder.upsample_ratio", mel.upsample_ratio),
      PW_FIELD(E, "mel_encoder.upsample_dim", mel.upsample_dim),
      PW_FIELD(E, "mel_encoder.n_blocks_stage2", mel.n_blocks_stage2),
      PW_FIELD(E, "mel_encoder.hidden_dim_stage2", mel.hidden_dim_stage2),
      PW_FIELD(E, "mel_encoder.period_strides", mel.period_strides),
      PW_FIELD(E, "mel_encoder.out_dim", mel.out_dim),
  };
  return b;
}

const std::vector<Binding<RunConfig>>& run_bindings() {
  using R = RunConfig;
  static const std::vector<Binding<R>> b = [] {
    std::vector<Binding<R>> v = {
        PW_FIELD(R, "seed", seed),
        PW_FIELD(R, "mel.fft_size", mel.fft_size),
        PW_FIELD(R, "mel.hop_size", mel.hop_size),
        PW_FIELD(R, "mel.win_size", mel.win_size),
        PW_FIELD(R, "mel.n_mels", mel.n_mels),
        PW_FIELD(R, "mel.fmin", mel.fmin),
        PW_FIELD(R, "mel.fmax", mel.fmax),
        PW_FIELD(R, "mel.sample_rate", mel.sample_rate),
        PW_FIELD(R, "mel.log_floor", mel.log_floor),
        PW_FIELD(R, "train.lr", train.lr),
        PW_FIELD(R, "train.batch_size", train.batch_size),
        PW_FIELD(R, "train.segment", train.segment),
        PW_FIELD(R, "train.optimizer", train.optimizer),
        PW_FIELD(R, "train.sigma_min", train.sigma_min),
        PW_FIELD(R, "train.max_steps", train.max_steps),
        PW_FIELD(R, "train.beta1", train.beta1),
        PW_FIELD(R, "train.beta2", train.beta2),
        PW_FIELD(R, "train.adam_eps", train.adam_eps),
        PW_FIELD(R, "train.weight_decay", train.weight_decay),
        PW_FIELD(R, "train.grad_clip", train.grad_clip),
        PW_FIELD(R, "train.noise_scale", train.noise_scale),
        PW_FIELD(R, "train.log_every", log_every),
        PW_FIELD(R, "train.checkpoint_every", checkpoint_every),
        PW_FIELD(R, "sampler.steps", sampler.steps),
        PW_FIELD(R, "sampler.temperature", sampler.temperature),
        PW_FIELD(R, "sampler.noise_scale", sampler.noise_scale),
        PW_FIELD(R, "sampler.freeu.enabled", sampler.freeu.enabled),
        PW_FIELD(R, "sampler.freeu.skip_scale", sampler.freeu.skip_scale),
        PW_FIELD(R, "sampler.freeu.backbone_scale", sampler.freeu.backbone_scale),
        PW_FIELD(R, "data.dir", data_dir),
        PW_FIELD(R, "data.files", data_files),
        PW_FIELD(R, "out_dir", out_dir),
    };
    v.push_back({"sampler.method", [](R& c, const json& j) { c.sampler.method = parse_ode_method(j.get<std::string>()); },
                 [](const R& c) { return json(to_string(c.sampler.method)); }});
    v.push_back({"sampler.period_mode",
                 [](R& c, const json& j) {
                   const auto s = j.get<std::string>();
                   if (s == "batched") c.sampler.period_mode = PeriodMode::kBatched;
                   else if (s == "sequential") c.sampler.period_mode = PeriodMode::kSequential;
                   else throw std::invalid_argument("sampler.period_mode must be batched or sequential");
                 },
                 [](const R& c) {
                   return json(c.sampler.period_mode == PeriodMode::kBatched ? "batched" : "sequential");
                 }});
    v.push_back({"sampler.band_steps",
                 [](R& c, const json& j) {
                   if (j.is_null()) c.sampler.per_band_steps.reset();
                   else c.sampler.per_band_steps = j.get<std::array<int, 4>>();
                 },
                 [](const R& c) { return c.sampler.per_band_steps ? json(*c.sampler.per_band_steps) : json(nullptr); }});
    v.push_back({"sampler.band_temperature",
                 [](R& c, const json& j) {
                   if (j.is_null()) c.sampler.per_band_temperature.reset();
                   else c.sampler.per_band_temperature = j.get<std::array<double, 4>>();
                 },
                 [](const R& c) {
                   return c.sampler.per_band_temperature ? json(*c.sampler.per_band_temperature) : json(nullptr);
                 }});
    for (const auto& mb : model_bindings()) {
      v.push_back({"model." + mb.key, [set = mb.set](R& c, const json& j) { set(c.model, j); },
                   [get = mb.get](const R& c) { return get(c.model); }});
    }
    return v;
  }();
  return b;
}

#undef PW_FIELD

EstimatorConfig preset_model(const std::string& preset, int band) {
  if (preset == "full_band") return EstimatorConfig::full_band();
  if (preset == "multi_band") return EstimatorConfig::multi_band(band);
  if (preset == "tiny") return EstimatorConfig::tiny();
  if (preset == "tiny_multi_band") return EstimatorConfig::tiny_multi_band(band);
  throw std::invalid_argument("model.preset must be full_band, multi_band, tiny or tiny_multi_band (got '" + preset +
                              "')");
}

void apply_one(RunConfig& c, const std::string& key, const json& value) {
  for (const auto& b : run_bindings()) {
    if (b.key == key) {
      try {
        b.set(c, value);
      } catch (const json::exception& e) {
        throw std::invalid_argument("config key '" + key + "': " + e.what());
      }
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string hex(const unsigned char* p, unsigned n) {
  std::ostringstream s;
  for (unsigned i = 0; i < n; ++i) s << std::hex << std::setw(2) << std::setfill('0') << int(p[i]);
  return s.str();
}

}  // namespace

void RunConfig::validate() const {
  mel.validate();
  model.validate();
  train.validate();
  sampler.validate();
  if (model.n_mels != mel.n_mels) throw std::invalid_argument("model.n_mels must equal mel.n_mels");
  if (log_every < 1) throw std::invalid_argument("train.log_every must be >= 1");
  if (checkpoint_every < 1) throw std::invalid_argument("train.checkpoint_every must be >= 1");
}

json to_flat_json(const RunConfig& c) {
  json j = json::object();
  j["model.preset"] = c.model_preset;
  j["model.band"] = c.model_band;
  for (const auto& b : run_bindings()) j[b.key] = b.get(c);
  return j;
}

RunConfig resolve_config(const json& flat) {
  if (!flat.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig c;
  if (flat.contains("model.preset")) c.model_preset = flat.at("model.preset").get<std::string>();
  if (flat.contains("model.band")) c.model_band = flat.at("model.band").get<int>();
  c.model = preset_model(c.model_preset, c.model_band);
  if (c.model.multiband) c.train = TrainConfig::multi_band();
  for (const auto& [key, value] : flat.items()) {
    if (key == "model.preset" || key == "model.band") continue;
    apply_one(c, key, value);
  }
  c.validate();
  return c;
}

json read_flat_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config " + path.string() + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      throw std::invalid_argument("config " + path.string() + ": key '" + key +
                                  "' holds an object; use flat dotted keys");
    }
  }
  return j;
}

json estimator_config_json(const EstimatorConfig& c) {
  json j = json::object();
  for (const auto& b : model_bindings()) j["model." + b.key] = b.get(c);
  return j;
}

EstimatorConfig estimator_config_from_json(const json& flat) {
  EstimatorConfig c;
  for (const auto& b : model_bindings()) {
    const std::string key = "model." + b.key;
    if (!flat.contains(key)) throw std::invalid_argument("estimator config is missing '" + key + "'");
    b.set(c, flat.at(key));
  }
  c.validate();
  return c;
}

std::string code_version_hash() {
  const std::string text = kVersion;
  const std::string blob = "blob " + std::to_string(text.size()) + std::string(1, '\0') + text;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned n = 0;
  EVP_Digest(blob.data(), blob.size(), md, &n, EVP_sha1(), nullptr);
  return hex(md, n);
}

std::string compute_device() {
  const char* d = std::getenv("PERIODWAVE_DEVICE");
  return (d && *d) ? std::string(d) : std::string("cpu");
}

json run_manifest(const RunConfig& c, const std::string& command, const json& overrides) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["code_hash"] = code_version_hash();
  m["device"] = compute_device();
  m["seed"] = c.seed;
  m["config"] = to_flat_json(c);
  m["overrides"] = overrides;
  return m;
}

}  // namespace periodwave
