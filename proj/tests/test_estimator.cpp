#include <doctest.h>

#include <random>

#include "periodwave/estimator.hpp"
#include "test_util.hpp"

using namespace periodwave;

namespace {

Mat<double> random_row(Index channels, Index n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(0.0, 0.3);
  Mat<double> x(channels, n);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = d(rng);
  return x;
}

double rel_diff(const Vec<double>& a, const Vec<double>& b) { return (a - b).norm() / std::max(1e-30, b.norm()); }

}  // namespace

TEST_CASE("full-band parameter count is near the published size") {
  const Estimator<float> e(EstimatorConfig::full_band(), 1);
  const double m = double(e.parameter_count()) / 1e6;
  MESSAGE("full-band parameters (M): " << m);
  CHECK(m > 29.73 * 0.9);
  CHECK(m < 29.73 * 1.1);
}

TEST_CASE("initialization is a function of the seed") {
  const Estimator<double> a(EstimatorConfig::tiny(), 5), b(EstimatorConfig::tiny(), 5), c(EstimatorConfig::tiny(), 6);
  REQUIRE(a.parameters().size() == b.parameters().size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    CHECK(a.parameters()[i].name == b.parameters()[i].name);
    CHECK(a.parameters()[i].var.data() == b.parameters()[i].var.data());
    any_diff = any_diff || a.parameters()[i].var.data() != c.parameters()[i].var.data();
  }
  CHECK(any_diff);
  CHECK(a.parameter_count() < 1000000);
}

TEST_CASE("config validation") {
  EstimatorConfig c = EstimatorConfig::full_band();
  c.validate();
  CHECK(c.total_downsample() == 64);
  CHECK(c.padded_length(32768, 7) == 33152);
  CHECK(c.middle_height(32768, 7) == 74);
  CHECK(c.middle_height(32768, 1) == 512);
  for (int b = 0; b < 4; ++b) {
    const EstimatorConfig m = EstimatorConfig::multi_band(b);
    m.validate();
    CHECK(m.in_channels() == 1 + b);
    CHECK(m.decimation() == 4);
  }
  c.down_ratios = {1, 4, 4, 2};
  c.up_ratios = {4, 4, 2};
  CHECK_THROWS(c.validate());
  c = EstimatorConfig::full_band();
  c.mel.period_strides = {1, 2, 3};
  CHECK_THROWS(c.validate());
  c = EstimatorConfig::full_band();
  c.activation = "snake";
  CHECK_THROWS(c.validate());
  c = EstimatorConfig::full_band();
  c.ublock_dims = {32, 64, 128};
  CHECK_THROWS(c.validate());
  CHECK_THROWS(EstimatorConfig::multi_band(4));
  FreeUParams f;
  f.skip_scale = 0.0;
  CHECK_THROWS(f.validate());
}

TEST_CASE("tiny estimator: shapes and middle-block heights") {
  const Estimator<double> e(EstimatorConfig::tiny(), 3);
  for (Index n : {Index(1024), Index(3000)}) {
    const MelSpec mel = mel_spectrogram(testutil::sig_a(n), MelConfig{});
    const CondFeatures<double> cond = e.mel_encode({&mel}, {n});
    for (std::size_t i = 0; i < cond.periods.size(); ++i) {
      CHECK(cond.per_period[i].layout()[0].h == e.config().middle_height(n, cond.periods[i]));
      CHECK(cond.per_period[i].data().rows() == 32);
    }
    ForwardTrace trace;
    const Vec<double> v = e.estimate_vector_field(random_row(1, n, 1), 0.4, cond, FreeUParams{}, PeriodMode::kBatched,
                                                  &trace);
    CHECK(v.size() == n);
    CHECK(v.allFinite());
    REQUIRE(trace.middles.size() == 5);
    for (const auto& m : trace.middles) {
      CHECK(m.height == e.config().padded_length(n, m.period) / (64 * m.period));
      CHECK(m.width == m.period);
    }
  }
}

TEST_CASE("FreeU (1, 1) equals FreeU disabled; (0.9, 1.1) differs") {
  const Estimator<double> e(EstimatorConfig::tiny(), 4);
  const Index n = 2048;
  const MelSpec mel = mel_spectrogram(testutil::sig_b(n), MelConfig{});
  const CondFeatures<double> cond = e.mel_encode({&mel}, {n});
  const Mat<double> x = random_row(1, n, 2);
  FreeUParams off;
  FreeUParams unit{1.0, 1.0, true};
  FreeUParams grid{0.9, 1.1, true};
  const Vec<double> a = e.estimate_vector_field(x, 0.3, cond, off);
  const Vec<double> b = e.estimate_vector_field(x, 0.3, cond, unit);
  const Vec<double> c = e.estimate_vector_field(x, 0.3, cond, grid);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(rel_diff(c, a) > 1e-6);
}

TEST_CASE("period-batched and sequential evaluation agree") {
  const Estimator<double> e(EstimatorConfig::tiny(), 8);
  const Index n = 3000;
  const MelSpec mel = mel_spectrogram(testutil::sig_a(n), MelConfig{});
  const CondFeatures<double> cond = e.mel_encode({&mel}, {n});
  const Mat<double> x = random_row(1, n, 3);
  const Vec<double> a = e.estimate_vector_field(x, 0.7, cond, FreeUParams{}, PeriodMode::kBatched);
  const Vec<double> b = e.estimate_vector_field(x, 0.7, cond, FreeUParams{}, PeriodMode::kSequential);
  CHECK(rel_diff(a, b) < 1e-5);
}

TEST_CASE("time conditioning changes the output") {
  const Estimator<double> e(EstimatorConfig::tiny(), 9);
  const Index n = 1024;
  const MelSpec mel = mel_spectrogram(testutil::sig_a(n), MelConfig{});
  const CondFeatures<double> cond = e.mel_encode({&mel}, {n});
  const Mat<double> x = random_row(1, n, 4);
  const Vec<double> a = e.estimate_vector_field(x, 0.1, cond, FreeUParams{});
  const Vec<double> b = e.estimate_vector_field(x, 0.9, cond, FreeUParams{});
  CHECK(rel_diff(a, b) > 1e-6);
  const Mat<double> emb = timestep_embedding<double>({0.1, 0.9}, 16);
  CHECK(emb.rows() == 16);
  CHECK((emb.col(0) - emb.col(1)).norm() > 0.1);
}

TEST_CASE("ragged batch equals per-item evaluation") {
  const Estimator<double> e(EstimatorConfig::tiny(), 10);
  const MelSpec m1 = mel_spectrogram(testutil::sig_a(1024), MelConfig{});
  const MelSpec m2 = mel_spectrogram(testutil::sig_b(1500), MelConfig{});
  const CondFeatures<double> both = e.mel_encode({&m1, &m2}, {1024, 1500});
  const Mat<double> x1 = random_row(1, 1024, 5), x2 = random_row(1, 1500, 6);
  Mat<double> x(1, 2524);
  x << x1, x2;
  const Var<double> xv = Var<double>::constant(x, make_layout({{1024, 1}, {1500, 1}}));
  NoGradGuard g;
  const Var<double> v = e.forward(xv, {0.2, 0.6}, both, FreeUParams{});
  const Vec<double> a = e.estimate_vector_field(x1, 0.2, e.mel_encode({&m1}, {1024}), FreeUParams{});
  const Vec<double> b = e.estimate_vector_field(x2, 0.6, e.mel_encode({&m2}, {1500}), FreeUParams{});
  CHECK(rel_diff(v.data().leftCols(1024).transpose(), a) < 1e-9);
  CHECK(rel_diff(v.data().rightCols(1500).transpose(), b) < 1e-9);
}

TEST_CASE("multi-band estimator takes lower bands as channels") {
  const Estimator<double> e(EstimatorConfig::tiny_multi_band(2), 11);
  const Index n = 4096, band = n / 4;
  const MelSpec mel = mel_spectrogram(testutil::sig_a(n), MelConfig{});
  const CondFeatures<double> cond = e.mel_encode({&mel}, {band});
  ForwardTrace trace;
  const Vec<double> v = e.estimate_vector_field(random_row(3, band, 7), 0.5, cond, FreeUParams{}, PeriodMode::kBatched,
                                                &trace);
  CHECK(v.size() == band);
  for (const auto& m : trace.middles) CHECK(m.height == e.config().padded_length(band, m.period) / (16 * m.period));
  CHECK_THROWS(e.estimate_vector_field(random_row(1, band, 7), 0.5, cond, FreeUParams{}));
}

TEST_CASE("estimator input errors") {
  const Estimator<double> e(EstimatorConfig::tiny(), 12);
  const Index n = 1024;
  const MelSpec mel = mel_spectrogram(testutil::sig_a(n), MelConfig{});
  const CondFeatures<double> cond = e.mel_encode({&mel}, {n});
  Mat<double> x = random_row(1, n, 8);
  CHECK_THROWS(e.estimate_vector_field(x, 1.5, cond, FreeUParams{}));
  CHECK_THROWS(e.estimate_vector_field(x, -0.1, cond, FreeUParams{}));
  CHECK_THROWS(e.estimate_vector_field(random_row(1, 2048, 8), 0.5, cond, FreeUParams{}));
  x(0, 10) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(e.estimate_vector_field(x, 0.5, cond, FreeUParams{}));
  CHECK_THROWS(e.mel_encode({&mel}, {2048}));
}
