#include "periodwave/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "periodwave/checkpoint.hpp"
#include "periodwave/config.hpp"
#include "periodwave/metrics.hpp"
#include "periodwave/sampler.hpp"
#include "periodwave/wavelet.hpp"

namespace periodwave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by every subcommand. Anything left unset falls back to the
// config file, then to the built-in defaults.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::string method;
  std::optional<double> tau;
  std::optional<double> freeu_alpha, freeu_beta;
  std::vector<int> band_steps;
  std::string out;

  void attach(CLI::App* app, bool sampling) {
    app->add_option("--config", config, "Flat dotted-key JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--out", out, "Output path");
    if (!sampling) return;
    app->add_option("--steps", steps, "ODE steps")->check(CLI::PositiveNumber);
    app->add_option("--method", method, "ODE method")->check(CLI::IsMember({"euler", "midpoint", "rk4"}));
    app->add_option("--tau", tau, "Prior temperature")->check(CLI::NonNegativeNumber);
    app->add_option("--freeu-alpha", freeu_alpha, "FreeU skip scale (enables FreeU)")->check(CLI::PositiveNumber);
    app->add_option("--freeu-beta", freeu_beta, "FreeU backbone scale (enables FreeU)")->check(CLI::PositiveNumber);
    app->add_option("--band-steps", band_steps, "Per-band ODE steps a,b,c,d")->delimiter(',')->expected(4);
  }

  json overrides() const {
    json o = json::object();
    if (seed) o["seed"] = *seed;
    if (steps) o["sampler.steps"] = *steps;
    if (!method.empty()) o["sampler.method"] = method;
    if (tau) o["sampler.temperature"] = *tau;
    if (freeu_alpha) o["sampler.freeu.skip_scale"] = *freeu_alpha;
    if (freeu_beta) o["sampler.freeu.backbone_scale"] = *freeu_beta;
    if (freeu_alpha || freeu_beta) o["sampler.freeu.enabled"] = true;
    if (!band_steps.empty()) o["sampler.band_steps"] = band_steps;
    return o;
  }

  // File values first, command-line overrides on top.
  RunConfig resolve(const json& extra = json::object()) const {
    json flat = config.empty() ? json::object() : read_flat_json(config);
    for (const auto& [k, v] : extra.items()) flat[k] = v;
    const json o = overrides();
    for (const auto& [k, v] : o.items()) flat[k] = v;
    return resolve_config(flat);
  }
};

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_sidecar_manifest(const fs::path& out, const RunConfig& c, const std::string& command,
                            const CommonFlags& flags, json inputs) {
  json m = run_manifest(c, command, flags.overrides());
  m["inputs"] = std::move(inputs);
  write_json_file(fs::path(out.string() + ".manifest.json"), m);
}

void note_device() {
  const std::string dev = compute_device();
  if (dev != "cpu") std::cerr << "warning: PERIODWAVE_DEVICE=" << dev << " is not available; running on cpu\n";
}

MelSpec mel_from_input(const fs::path& input, const MelConfig& mc) {
  if (input.extension() == ".wav") {
    const Waveform w = load_wav(input);
    return mel_spectrogram(w, mc);
  }
  return load_mel(input);
}

void save_output(const Waveform& w, const fs::path& path, WavEncoding enc = WavEncoding::kFloat32) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_wav(w, path, enc);
}

std::vector<fs::path> list_wavs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

PriorTrack prior_for(const MelSpec& mel, const EstimatorConfig& model) {
  if (model.multiband) return energy_prior(mel, band_energy(model.lower_bands), model.lower_bands + 1);
  return energy_prior(mel, full_band_energy(), 0);
}

int cmd_train(const CommonFlags& flags, std::optional<long long> max_steps, const std::string& data) {
  json extra = json::object();
  if (max_steps) extra["train.max_steps"] = *max_steps;
  if (!data.empty()) extra["data.dir"] = data;
  if (!flags.out.empty()) extra["out_dir"] = flags.out;
  const RunConfig cfg = flags.resolve(extra);
  note_device();

  const fs::path out_dir = cfg.out_dir;
  fs::create_directories(out_dir);
  json manifest = run_manifest(cfg, "train", flags.overrides());
  write_json_file(out_dir / "manifest.json", manifest);

  Estimator<float> model(cfg.model, cfg.seed);
  std::cerr << "train: " << model.parameter_count() << " parameters\n";
  const json ckpt_extra = {{"run_manifest", "../manifest.json"}};
  if (cfg.train.max_steps == 0) {
    save_checkpoint(out_dir / "checkpoint", model, 0, ckpt_extra);
    return 0;
  }

  std::vector<fs::path> files;
  for (const auto& f : cfg.data_files) files.emplace_back(f);
  if (!cfg.data_dir.empty()) {
    for (auto& f : list_wavs(cfg.data_dir)) files.push_back(std::move(f));
  }
  if (files.empty()) throw std::invalid_argument("train: no training audio (set data.dir or data.files)");
  std::vector<Waveform> clips;
  for (const auto& f : files) {
    clips.push_back(load_wav(f));
    if (clips.back().sample_rate != cfg.mel.sample_rate) {
      throw std::invalid_argument("train: " + f.string() + " has rate " + std::to_string(clips.back().sample_rate) +
                                  ", config expects " + std::to_string(cfg.mel.sample_rate));
    }
  }

  TrainState<float> state(model, cfg.train, cfg.seed);
  std::mt19937_64 data_rng(cfg.seed ^ 0x5bd1e995ULL);
  std::ofstream log(out_dir / "train_log.jsonl", std::ios::app);
  const auto t0 = std::chrono::steady_clock::now();
  for (long long step = 0; step < cfg.train.max_steps; ++step) {
    std::vector<TrainItem> batch;
    for (int b = 0; b < cfg.train.batch_size; ++b) {
      const Waveform& clip = clips[data_rng() % clips.size()];
      const long long span = std::max<long long>(0, (long long)clip.size() - cfg.train.segment);
      const long long start = span > 0 ? (long long)(data_rng() % (span + 1)) : 0;
      TrainItem it;
      it.segment = segment(clip, start, cfg.train.segment);
      it.mel = mel_spectrogram(it.segment, cfg.mel);
      it.prior = prior_for(it.mel, cfg.model);
      batch.push_back(std::move(it));
    }
    const StepResult r = train_step(state, batch, cfg.train);
    const long long done = step + 1;
    if (done % cfg.log_every == 0 || done == cfg.train.max_steps) {
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      log << json{{"step", done}, {"loss", r.loss}, {"lr", cfg.train.lr}, {"wall_ms", ms}}.dump() << '\n';
      log.flush();
    }
    if (done % cfg.checkpoint_every == 0 || done == cfg.train.max_steps) {
      std::ostringstream name;
      name << "step_" << std::setw(8) << std::setfill('0') << done;
      save_checkpoint(out_dir / "checkpoints" / name.str(), model, done, {{"run_manifest", "../../manifest.json"}});
      save_checkpoint(out_dir / "checkpoint", model, done, ckpt_extra);
    }
  }
  return 0;
}

int cmd_synth(const CommonFlags& flags, const std::string& ckpt, const std::string& input) {
  const RunConfig cfg = flags.resolve();
  note_device();
  if (flags.out.empty()) throw std::invalid_argument("synth: --out is required");
  const LoadedCheckpoint lc = load_checkpoint(ckpt);
  const MelSpec mel = mel_from_input(input, cfg.mel);
  std::mt19937_64 rng(cfg.seed);
  const Waveform w = synthesize(*lc.model, mel, prior_for(mel, lc.model->config()), cfg.sampler, rng);
  save_output(w, flags.out);
  write_sidecar_manifest(flags.out, cfg, "synth", flags, {{"checkpoint", ckpt}, {"input", input}});
  return 0;
}

int cmd_synth_mb(const CommonFlags& flags, const std::vector<std::string>& ckpts, const std::string& input) {
  RunConfig cfg = flags.resolve();
  note_device();
  if (flags.out.empty()) throw std::invalid_argument("synth-mb: --out is required");
  if (ckpts.size() != 4) throw std::invalid_argument("synth-mb: need exactly 4 checkpoints, low band first");
  if (!cfg.sampler.per_band_steps) cfg.sampler.per_band_steps = std::array<int, 4>{16, 16, 16, 16};
  std::vector<LoadedCheckpoint> loaded;
  std::array<const Estimator<float>*, 4> models{};
  for (int b = 0; b < 4; ++b) {
    loaded.push_back(load_checkpoint(ckpts[b]));
    models[b] = loaded.back().model.get();
  }
  const MelSpec mel = mel_from_input(input, cfg.mel);
  std::array<PriorTrack, 4> priors;
  for (int b = 0; b < 4; ++b) priors[b] = energy_prior(mel, band_energy(b), b + 1);
  std::mt19937_64 rng(cfg.seed);
  const Waveform w = synthesize_mb(models, mel, priors, cfg.sampler, rng);
  save_output(w, flags.out);
  write_sidecar_manifest(flags.out, cfg, "synth-mb", flags, {{"checkpoints", ckpts}, {"input", input}});
  return 0;
}

int cmd_dwt(const CommonFlags& flags, const std::string& input, bool roundtrip, const std::string& merge_dir) {
  if (!merge_dir.empty()) {
    if (flags.out.empty()) throw std::invalid_argument("dwt --merge: --out is required");
    BandComponents<float> b;
    int rate = 0;
    for (int k = 0; k < 4; ++k) {
      const Waveform w = load_wav(fs::path(merge_dir) / ("band" + std::to_string(k) + ".wav"));
      b.bands[k] = Eigen::Map<const Eigen::VectorXf>(w.samples.data(), Index(w.size()));
      rate = w.sample_rate * 4;
    }
    const Eigen::VectorXf x = packet_merge(b);
    save_output(Waveform{std::vector<float>(x.data(), x.data() + x.size()), rate}, flags.out);
    return 0;
  }
  if (input.empty()) throw std::invalid_argument("dwt: input wav required");
  const Waveform w = load_wav(input);
  const long long n = (long long)w.size();
  const Waveform padded = segment(w, 0, (n + 3) / 4 * 4);
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXf>(padded.samples.data(), Index(padded.size())).cast<double>();
  const BandComponents<double> b = packet_split(x);
  if (roundtrip) {
    const double err = (packet_merge(b) - x).cwiseAbs().maxCoeff();
    std::cout << "max reconstruction error: " << std::scientific << err << '\n';
    return err < 1e-6 ? 0 : 1;
  }
  if (flags.out.empty()) throw std::invalid_argument("dwt: --out directory is required");
  fs::create_directories(flags.out);
  for (int k = 0; k < 4; ++k) {
    const Eigen::VectorXf band = b.bands[k].cast<float>();
    save_output(Waveform{std::vector<float>(band.data(), band.data() + band.size()), w.sample_rate / 4},
                fs::path(flags.out) / ("band" + std::to_string(k) + ".wav"), WavEncoding::kFloat32Unclamped);
  }
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& ref_dir, const std::string& gen_dir) {
  std::ostringstream csv;
  csv << "file,mstft\n";
  int n = 0;
  for (const auto& ref : list_wavs(ref_dir)) {
    const fs::path gen = fs::path(gen_dir) / ref.filename();
    if (!fs::exists(gen)) {
      std::cerr << "eval: no generated file for " << ref.filename() << ", skipped\n";
      continue;
    }
    Waveform r = load_wav(ref), g = load_wav(gen);
    // Vocoder outputs may differ from the reference by padding; compare the common span.
    const std::size_t len = std::min(r.size(), g.size());
    r.samples.resize(len);
    g.samples.resize(len);
    csv << ref.filename().string() << ',' << std::setprecision(8) << mstft_distance(r, g) << '\n';
    ++n;
  }
  if (n == 0) throw std::invalid_argument("eval: no matching wav files");
  if (flags.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream(flags.out, std::ios::trunc) << csv.str();
  }
  return 0;
}

int cmd_bench_ode(const CommonFlags& flags, const std::string& ckpt, const std::string& input,
                  const std::vector<std::string>& methods, const std::vector<int>& steps_list) {
  const RunConfig cfg = flags.resolve();
  note_device();
  const LoadedCheckpoint lc = load_checkpoint(ckpt);
  const MelSpec mel = mel_from_input(input, cfg.mel);
  std::vector<OdeMethod> ms;
  for (const auto& m : methods) ms.push_back(parse_ode_method(m));
  const auto rows = bench_ode(*lc.model, mel, prior_for(mel, lc.model->config()), ms, steps_list, cfg.sampler,
                              cfg.seed);
  if (flags.out.empty()) {
    write_bench_ode_csv(rows, std::cout);
  } else {
    std::ofstream out(flags.out, std::ios::trunc);
    write_bench_ode_csv(rows, out);
    write_sidecar_manifest(flags.out, cfg, "bench-ode", flags, {{"checkpoint", ckpt}, {"input", input}});
  }
  return 0;
}

int cmd_bench_speed(const CommonFlags& flags, const std::string& ckpt, const std::string& input, int reps) {
  const RunConfig cfg = flags.resolve();
  note_device();
  const LoadedCheckpoint lc = load_checkpoint(ckpt);
  const MelSpec mel = mel_from_input(input, cfg.mel);
  const PriorTrack prior = prior_for(mel, lc.model->config());
  std::mt19937_64 rng(cfg.seed);
  const SpeedReport r = bench_speed([&] { return synthesize(*lc.model, mel, prior, cfg.sampler, rng); }, reps);
  if (flags.out.empty()) {
    write_speed_json(r, std::cout);
  } else {
    std::ofstream out(flags.out, std::ios::trunc);
    write_speed_json(r, out);
    write_sidecar_manifest(flags.out, cfg, "bench-speed", flags, {{"checkpoint", ckpt}, {"input", input}});
  }
  return 0;
}

int cmd_mel(const CommonFlags& flags, const std::string& input) {
  const RunConfig cfg = flags.resolve();
  if (flags.out.empty()) throw std::invalid_argument("mel: --out is required");
  save_mel(mel_spectrogram(load_wav(input), cfg.mel), flags.out);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"periodwave: flow-matching waveform generation"};
  app.require_subcommand(1);

  CommonFlags train_f, synth_f, mb_f, dwt_f, eval_f, ode_f, speed_f, mel_f;
  std::optional<long long> max_steps;
  std::string data, ckpt, input, merge_dir, ref_dir, gen_dir;
  std::vector<std::string> ckpts;
  std::vector<std::string> methods{"euler", "midpoint", "rk4"};
  std::vector<int> steps_list{1, 2, 4, 8, 16, 32, 64, 128, 256};
  bool roundtrip = false;
  int reps = 3;

  auto* train = app.add_subcommand("train", "Train an estimator; writes checkpoints and a JSONL log");
  train_f.attach(train, false);
  train->add_option("--max-steps", max_steps, "Number of optimizer steps")->check(CLI::NonNegativeNumber);
  train->add_option("--data", data, "Directory of training wavs")->check(CLI::ExistingDirectory);

  auto* synth = app.add_subcommand("synth", "Generate a waveform from a mel (or a wav) with one checkpoint");
  synth_f.attach(synth, true);
  synth->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  synth->add_option("input", input, "Input .wav or mel file")->required()->check(CLI::ExistingFile);

  auto* mb = app.add_subcommand("synth-mb", "Generate with four band checkpoints, low band first");
  mb_f.attach(mb, true);
  mb->add_option("--checkpoints", ckpts, "Band checkpoint directories c0,c1,c2,c3")->delimiter(',')->required();
  mb->add_option("input", input, "Input .wav or mel file")->required()->check(CLI::ExistingFile);

  auto* dwt_cmd = app.add_subcommand("dwt", "Split a wav into four wavelet bands, merge them, or check the roundtrip");
  dwt_f.attach(dwt_cmd, false);
  dwt_cmd->add_flag("--roundtrip", roundtrip, "Report the split/merge reconstruction error");
  dwt_cmd->add_option("--merge", merge_dir, "Directory with band0..3.wav to merge")->check(CLI::ExistingDirectory);
  dwt_cmd->add_option("input", input, "Input wav")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "M-STFT distance per file; CSV file,mstft");
  eval_f.attach(eval, false);
  eval->add_option("--ref", ref_dir, "Reference wav directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--gen", gen_dir, "Generated wav directory")->required()->check(CLI::ExistingDirectory);

  auto* ode = app.add_subcommand("bench-ode", "Sweep ODE methods and steps; CSV method,steps,wall_ms,mstft");
  ode_f.attach(ode, true);
  ode->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  ode->add_option("--methods", methods, "Methods to sweep")->delimiter(',');
  ode->add_option("--steps-list", steps_list, "Step counts to sweep")->delimiter(',');
  ode->add_option("input", input, "Input .wav or mel file")->required()->check(CLI::ExistingFile);

  auto* speed = app.add_subcommand("bench-speed", "Median synthesis time over repetitions; JSON report");
  speed_f.attach(speed, true);
  speed->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  speed->add_option("--reps", reps, "Timed repetitions (>= 3)");
  speed->add_option("input", input, "Input .wav or mel file")->required()->check(CLI::ExistingFile);

  auto* mel = app.add_subcommand("mel", "Compute a mel file (float32 binary plus JSON sidecar) from a wav");
  mel_f.attach(mel, false);
  mel->add_option("input", input, "Input wav")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(train_f, max_steps, data);
    if (*synth) return cmd_synth(synth_f, ckpt, input);
    if (*mb) return cmd_synth_mb(mb_f, ckpts, input);
    if (*dwt_cmd) return cmd_dwt(dwt_f, input, roundtrip, merge_dir);
    if (*eval) return cmd_eval(eval_f, ref_dir, gen_dir);
    if (*ode) return cmd_bench_ode(ode_f, ckpt, input, methods, steps_list);
    if (*speed) return cmd_bench_speed(speed_f, ckpt, input, reps);
    if (*mel) return cmd_mel(mel_f, input);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace periodwave
