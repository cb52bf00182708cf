#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "periodwave/checkpoint.hpp"
#include "periodwave/config.hpp"
#include "test_util.hpp"

using namespace periodwave;
using nlohmann::json;

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("", 0) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc", 3) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  testutil::TempDir tmp("ckpt");
  Estimator<float> e(EstimatorConfig::tiny(), 17);
  e.parameters()[0].var.data()(0, 0) = -0.0f;
  e.parameters()[1].var.data()(0, 0) = std::numeric_limits<float>::denorm_min();
  save_checkpoint(tmp / "c", e, 42, {{"note", "x"}});
  const LoadedCheckpoint lc = load_checkpoint(tmp / "c");
  CHECK(lc.step == 42);
  CHECK(lc.model->seed() == 17);
  CHECK(lc.manifest.at("extra").at("note") == "x");
  CHECK(lc.manifest.at("parameter_count") == e.parameter_count());
  const auto& a = e.parameters();
  const auto& b = lc.model->parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    const Mat<float>& x = a[i].var.data();
    const Mat<float>& y = b[i].var.data();
    REQUIRE(x.size() == y.size());
    CHECK(std::memcmp(x.data(), y.data(), sizeof(float) * std::size_t(x.size())) == 0);
  }

  SUBCASE("saving the loaded model reproduces every file") {
    save_checkpoint(tmp / "d", *lc.model, 42, {{"note", "x"}});
    for (const auto& entry : std::filesystem::directory_iterator(tmp / "c")) {
      std::ifstream f1(entry.path(), std::ios::binary), f2(tmp / "d" / entry.path().filename(), std::ios::binary);
      const std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
      CHECK(s1 == s2);
    }
  }

  SUBCASE("a flipped byte is detected") {
    const auto victim = tmp / "c" / (a[2].name + ".f32");
    std::fstream f(victim, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.put(char(0x7f));
    f.close();
    CHECK_THROWS_AS(load_checkpoint(tmp / "c"), CheckpointError);
  }

  SUBCASE("a truncated file is detected") {
    std::filesystem::resize_file(tmp / "c" / (a[3].name + ".f32"), 4);
    CHECK_THROWS_AS(load_checkpoint(tmp / "c"), CheckpointError);
  }

  SUBCASE("a missing directory is reported") { CHECK_THROWS_AS(load_checkpoint(tmp / "nope"), CheckpointError); }
}

TEST_CASE("multi-band checkpoints keep their band") {
  testutil::TempDir tmp("ckpt_mb");
  Estimator<float> e(EstimatorConfig::tiny_multi_band(2), 5);
  save_checkpoint(tmp.path(), e, 0);
  const LoadedCheckpoint lc = load_checkpoint(tmp.path());
  CHECK(lc.model->config().multiband);
  CHECK(lc.model->config().lower_bands == 2);
}

TEST_CASE("config resolution") {
  const RunConfig d = resolve_config(json::object());
  CHECK(d.seed == 1234);
  CHECK(d.train.lr == 5e-4);
  CHECK(d.model.periods == std::vector<int>{1, 2, 3, 5, 7});

  const RunConfig mb = resolve_config({{"model.preset", "multi_band"}, {"model.band", 3}});
  CHECK(mb.model.multiband);
  CHECK(mb.model.lower_bands == 3);
  CHECK(mb.train.lr == 2e-4);
  CHECK(resolve_config({{"model.preset", "multi_band"}, {"train.lr", 1e-3}}).train.lr == 1e-3);

  const RunConfig t = resolve_config({{"model.preset", "tiny"}, {"sampler.method", "euler"}, {"sampler.steps", 4},
                                      {"sampler.band_steps", {16, 8, 4, 4}}});
  CHECK(t.sampler.method == OdeMethod::kEuler);
  CHECK(t.sampler.steps == 4);
  CHECK(*t.sampler.per_band_steps == std::array<int, 4>{16, 8, 4, 4});

  CHECK_THROWS(resolve_config({{"train.lrr", 1.0}}));
  CHECK_THROWS(resolve_config({{"train.lr", "fast"}}));
  CHECK_THROWS(resolve_config({{"sampler.method", "heun"}}));
  CHECK_THROWS(resolve_config({{"model.preset", "huge"}}));
  CHECK_THROWS(resolve_config({{"mel.n_mels", 80}}));
  CHECK_THROWS(resolve_config(json::array()));
}

TEST_CASE("flat JSON round-trips through resolve_config") {
  RunConfig c = resolve_config({{"model.preset", "tiny"}, {"seed", 9}, {"sampler.freeu.enabled", true}});
  const json flat = to_flat_json(c);
  CHECK(flat.at("seed") == 9);
  CHECK(flat.at("sampler.freeu.enabled") == true);
  CHECK(to_flat_json(resolve_config(flat)) == flat);
  for (const auto& [k, v] : flat.items()) CHECK_FALSE(v.is_object());
}

TEST_CASE("read_flat_json") {
  testutil::TempDir tmp("cfg");
  std::ofstream(tmp / "ok.json") << R"({"train.lr": 0.001, "seed": 3})";
  std::ofstream(tmp / "nested.json") << R"({"train": {"lr": 0.001}})";
  std::ofstream(tmp / "bad.json") << R"({"train.lr": )";
  CHECK(read_flat_json(tmp / "ok.json").at("seed") == 3);
  CHECK_THROWS(read_flat_json(tmp / "nested.json"));
  CHECK_THROWS(read_flat_json(tmp / "bad.json"));
  CHECK_THROWS(read_flat_json(tmp / "missing.json"));
}

TEST_CASE("manifest fields") {
  CHECK(code_version_hash() == "8f924e996b056addcded2c4bc82e08df034a94c4");
  const RunConfig c = resolve_config({{"seed", 5}});
  ::unsetenv("PERIODWAVE_DEVICE");
  const json m = run_manifest(c, "synth", {{"seed", 5}});
  CHECK(m.at("device") == "cpu");
  CHECK(m.at("seed") == 5);
  CHECK(m.at("code_hash") == code_version_hash());
  CHECK(m.at("config").at("seed") == 5);
  ::setenv("PERIODWAVE_DEVICE", "cuda:0", 1);
  CHECK(compute_device() == "cuda:0");
  ::unsetenv("PERIODWAVE_DEVICE");
}

TEST_CASE("estimator config echo") {
  const EstimatorConfig c = EstimatorConfig::tiny_multi_band(1);
  const EstimatorConfig r = estimator_config_from_json(estimator_config_json(c));
  CHECK(estimator_config_json(r) == estimator_config_json(c));
  json partial = estimator_config_json(c);
  partial.erase("model.periods");
  CHECK_THROWS(estimator_config_from_json(partial));
}
