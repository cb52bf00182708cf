#include <doctest.h>

#include <sstream>

#include "periodwave/sampler.hpp"
#include "periodwave/metrics.hpp"
#include "periodwave/wavelet.hpp"
#include "test_util.hpp"

using namespace periodwave;
using V = Vec<double>;

namespace {

double decay_error(OdeMethod m, int steps) {
  const VectorField<double> f = [](double, const V& x) { return V(-x); };
  return std::abs(integrate(f, V::Ones(1).eval(), m, steps)[0] - std::exp(-1.0));
}

void zero_parameters(Estimator<float>& e) {
  for (auto& p : e.parameters()) p.var.data().setZero();
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_ode_method("euler") == OdeMethod::kEuler);
  CHECK(parse_ode_method("midpoint") == OdeMethod::kMidpoint);
  CHECK(parse_ode_method("rk4") == OdeMethod::kRk4);
  CHECK_THROWS(parse_ode_method("heun"));
  CHECK(to_string(OdeMethod::kRk4) == "rk4");
  SamplerConfig c;
  CHECK(c.method == OdeMethod::kMidpoint);
  CHECK(c.steps == 16);
  CHECK(c.temperature == 0.667);
  c.steps = 0;
  CHECK_THROWS(c.validate());
  c.steps = 4;
  c.per_band_steps = std::array<int, 4>{4, 4, 0, 4};
  CHECK_THROWS(c.validate());
}

TEST_CASE("a constant field is integrated exactly by every method") {
  const V v = (V(3) << 0.5, -2.0, 1.25).finished();
  const VectorField<double> f = [&](double, const V&) { return v; };
  const V x0 = (V(3) << 1.0, 0.0, -1.0).finished();
  for (auto m : {OdeMethod::kEuler, OdeMethod::kMidpoint, OdeMethod::kRk4}) {
    for (int s : {1, 3, 16}) CHECK((integrate(f, x0, m, s) - (x0 + v)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("exponential decay reaches e^-1") {
  CHECK(decay_error(OdeMethod::kEuler, 1000) < 1e-3);
  CHECK(decay_error(OdeMethod::kMidpoint, 32) < 1e-3);
  CHECK(decay_error(OdeMethod::kRk4, 8) < 1e-3);
}

TEST_CASE("observed convergence orders") {
  const std::pair<OdeMethod, double> cases[] = {
      {OdeMethod::kEuler, 1.0}, {OdeMethod::kMidpoint, 2.0}, {OdeMethod::kRk4, 4.0}};
  for (const auto& [m, order] : cases) {
    const double e8 = decay_error(m, 8), e16 = decay_error(m, 16), e32 = decay_error(m, 32);
    INFO(to_string(m));
    CHECK(std::log2(e8 / e16) == doctest::Approx(order).epsilon(0.15));
    CHECK(std::log2(e16 / e32) == doctest::Approx(order).epsilon(0.1));
  }
}

TEST_CASE("field evaluations per step") {
  for (auto m : {OdeMethod::kEuler, OdeMethod::kMidpoint, OdeMethod::kRk4}) {
    int calls = 0;
    double t_max = 0.0;
    const VectorField<double> f = [&](double t, const V& x) {
      ++calls;
      t_max = std::max(t_max, t);
      return V(-x);
    };
    integrate(f, V::Ones(2).eval(), m, 10);
    CHECK(calls == 10 * evaluations_per_step(m));
    CHECK(t_max <= 1.0);
  }
}

TEST_CASE("a non-finite state aborts with the step index") {
  const VectorField<double> f = [](double t, const V& x) {
    return t >= 0.35 ? V::Constant(x.size(), std::numeric_limits<double>::infinity()).eval() : V::Zero(x.size()).eval();
  };
  try {
    integrate(f, V::Ones(4).eval(), OdeMethod::kEuler, 10);
    FAIL("expected NonFiniteState");
  } catch (const NonFiniteState& e) {
    CHECK(e.step() == 4);
  }
  CHECK_THROWS_AS(integrate(f, V::Ones(4).eval(), OdeMethod::kRk4, 10), NonFiniteState);
}

TEST_CASE("full-band synthesis") {
  Estimator<float> e(EstimatorConfig::tiny(), 7);
  const MelSpec mel = mel_spectrogram(testutil::sig_a(3000), MelConfig{});
  const PriorTrack prior = energy_prior(mel, full_band_energy(), 0);
  SamplerConfig cfg;
  cfg.steps = 4;

  std::mt19937_64 r1(9), r2(9), r3(10);
  const Waveform a = synthesize(e, mel, prior, cfg, r1);
  const Waveform b = synthesize(e, mel, prior, cfg, r2);
  const Waveform c = synthesize(e, mel, prior, cfg, r3);
  CHECK(a.samples.size() == 3000);
  CHECK(a.sample_rate == 24000);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  for (float v : a.samples) REQUIRE(std::isfinite(v));

  cfg.temperature = 0.0;
  std::mt19937_64 r4(1), r5(2);
  CHECK(synthesize(e, mel, prior, cfg, r4).samples == synthesize(e, mel, prior, cfg, r5).samples);

  PriorTrack short_prior = prior;
  short_prior.frame_std.pop_back();
  CHECK_THROWS(synthesize(e, mel, short_prior, cfg, r4));
  Estimator<float> mb(EstimatorConfig::tiny_multi_band(0), 1);
  CHECK_THROWS(synthesize(mb, mel, prior, cfg, r4));
}

TEST_CASE("a zero field returns the prior draw") {
  Estimator<float> e(EstimatorConfig::tiny(), 3);
  zero_parameters(e);
  const MelSpec mel = mel_spectrogram(testutil::sig_b(2048), MelConfig{});
  const PriorTrack prior = energy_prior(mel, full_band_energy(), 0);
  SamplerConfig cfg;
  cfg.steps = 3;
  std::mt19937_64 r1(5), r2(5);
  const Waveform w = synthesize(e, mel, prior, cfg, r1);
  const Vec<float> x0 =
      sample_prior<float>(PriorSpec{prior_to_sample_std(prior, 256, 2048), 0.5, 0.667}, 2048, r2);
  for (int i = 0; i < 2048; ++i) REQUIRE(w.samples[i] == doctest::Approx(x0[i]).epsilon(1e-6));
}

TEST_CASE("multi-band synthesis") {
  const MelSpec mel = mel_spectrogram(testutil::sig_a(4000), MelConfig{});
  std::array<std::unique_ptr<Estimator<float>>, 4> models;
  std::array<const Estimator<float>*, 4> ptrs{};
  std::array<PriorTrack, 4> priors;
  for (int b = 0; b < 4; ++b) {
    models[b] = std::make_unique<Estimator<float>>(EstimatorConfig::tiny_multi_band(b), 30 + b);
    ptrs[b] = models[b].get();
    priors[b] = energy_prior(mel, band_energy(b), b + 1);
  }
  SamplerConfig cfg;
  std::mt19937_64 no_steps(1);
  CHECK_THROWS(synthesize_mb(ptrs, mel, priors, cfg, no_steps));

  SUBCASE("schedules give finite output of the mel's length") {
    for (const auto& steps : {std::array<int, 4>{4, 4, 4, 4}, std::array<int, 4>{4, 2, 1, 1}}) {
      cfg.per_band_steps = steps;
      std::mt19937_64 rng(3);
      const Waveform w = synthesize_mb(ptrs, mel, priors, cfg, rng);
      CHECK(w.samples.size() == 4000);
      for (float v : w.samples) REQUIRE(std::isfinite(v));
    }
  }

  SUBCASE("wrong band order is rejected") {
    cfg.per_band_steps = std::array<int, 4>{1, 1, 1, 1};
    std::swap(ptrs[1], ptrs[2]);
    std::mt19937_64 rng(3);
    CHECK_THROWS(synthesize_mb(ptrs, mel, priors, cfg, rng));
  }

  SUBCASE("zero fields give silence at zero temperature and the merged priors otherwise") {
    for (auto& m : models) zero_parameters(*m);
    cfg.per_band_steps = std::array<int, 4>{2, 2, 2, 2};
    cfg.temperature = 0.0;
    std::mt19937_64 rng(3);
    for (float v : synthesize_mb(ptrs, mel, priors, cfg, rng).samples) REQUIRE(v == 0.0f);

    cfg.temperature = 0.667;
    std::mt19937_64 r1(8), r2(8);
    const Waveform w = synthesize_mb(ptrs, mel, priors, cfg, r1);
    BandComponents<float> expect;
    for (int b = 0; b < 4; ++b) {
      expect.bands[b] = sample_prior<float>(PriorSpec{prior_to_sample_std(priors[b], 64, 1000), 0.5, 0.667}, 1000, r2);
    }
    const Vec<float> merged = packet_merge(expect);
    for (int i = 0; i < 4000; ++i) REQUIRE(w.samples[i] == doctest::Approx(merged[i]).epsilon(1e-5));
  }
}

TEST_CASE("bench_ode") {
  Estimator<float> e(EstimatorConfig::tiny(), 11);
  const MelSpec mel = mel_spectrogram(testutil::sig_a(4096), MelConfig{});
  const PriorTrack prior = energy_prior(mel, full_band_energy(), 0);
  const auto rows = bench_ode(e, mel, prior, {OdeMethod::kEuler, OdeMethod::kMidpoint}, {2, kReferenceSteps},
                              SamplerConfig{}, 4);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == OdeMethod::kEuler);
  CHECK(rows[0].steps == 2);
  CHECK(rows[3].mstft == 0.0);
  CHECK(rows[2].mstft > 0.0);
  for (const auto& r : rows) CHECK(r.wall_ms > 0.0);
  std::ostringstream csv;
  write_bench_ode_csv(rows, csv);
  CHECK(csv.str().rfind("method,steps,wall_ms,mstft\neuler,2,", 0) == 0);
}
