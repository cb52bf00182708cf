#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "periodwave/estimator.hpp"

namespace periodwave {

inline constexpr double kSigmaMin = 1e-4;

// Standard normal draws from a 64-bit Mersenne stream. Box-Muller keeps the
// sequence identical across standard libraries.
class GaussianSource {
 public:
  explicit GaussianSource(std::mt19937_64& rng) : rng_(rng) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  double unit() { return double(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64& rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct PriorSpec {
  std::vector<float> sample_std;
  double noise_scale = 0.5;    // alpha
  double temperature = 0.667;  // tau

  void validate() const {
    if (!(noise_scale > 0.0)) throw std::invalid_argument("PriorSpec: noise scale must be positive");
    if (!(temperature >= 0.0)) throw std::invalid_argument("PriorSpec: temperature must be non-negative");
  }
};

// x0[i] = tau * alpha * sample_std[i] * eps_i.
template <typename Scalar>
Vec<Scalar> sample_prior(const PriorSpec& spec, Index length, std::mt19937_64& rng) {
  spec.validate();
  if (length != Index(spec.sample_std.size())) {
    throw std::invalid_argument("sample_prior: length " + std::to_string(length) + " != prior length " +
                                std::to_string(spec.sample_std.size()));
  }
  GaussianSource normal(rng);
  const double scale = spec.temperature * spec.noise_scale;
  Vec<Scalar> x(length);
  for (Index i = 0; i < length; ++i) x[i] = Scalar(scale * spec.sample_std[i] * normal());
  return x;
}

template <typename Derived0, typename Derived1>
auto ot_path(const Eigen::MatrixBase<Derived0>& x0, const Eigen::MatrixBase<Derived1>& x1, double t,
             double sigma_min = kSigmaMin) {
  using Scalar = typename Derived0::Scalar;
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols()) throw std::invalid_argument("ot_path: shape mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("ot_path: t outside [0, 1]");
  using Plain = typename Derived0::PlainObject;
  Plain out = Scalar(1.0 - (1.0 - sigma_min) * t) * x0 + Scalar(t) * x1;
  return out;
}

template <typename Derived0, typename Derived1>
auto ot_target(const Eigen::MatrixBase<Derived0>& x0, const Eigen::MatrixBase<Derived1>& x1,
               double sigma_min = kSigmaMin) {
  using Scalar = typename Derived0::Scalar;
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols()) throw std::invalid_argument("ot_target: shape mismatch");
  using Plain = typename Derived0::PlainObject;
  Plain out = x1 - Scalar(1.0 - sigma_min) * x0;
  return out;
}

template <typename Derived0, typename Derived1>
double cfm_loss(const Eigen::MatrixBase<Derived0>& v_pred, const Eigen::MatrixBase<Derived1>& u_target) {
  if (v_pred.size() == 0) throw std::invalid_argument("cfm_loss: empty input");
  if (v_pred.rows() != u_target.rows() || v_pred.cols() != u_target.cols()) {
    throw std::invalid_argument("cfm_loss: shape mismatch");
  }
  return (v_pred.template cast<double>() - u_target.template cast<double>()).squaredNorm() / double(v_pred.size());
}

template <typename Scalar>
struct FlowSample {
  Vec<Scalar> x0, x1;
  double t = 0.0;
  Vec<Scalar> x_t, u_target;

  static FlowSample make(Vec<Scalar> x0, Vec<Scalar> x1, double t, double sigma_min = kSigmaMin) {
    FlowSample s;
    s.x_t = ot_path(x0, x1, t, sigma_min);
    s.u_target = ot_target(x0, x1, sigma_min);
    s.x0 = std::move(x0);
    s.x1 = std::move(x1);
    s.t = t;
    return s;
  }
};

struct TrainConfig {
  double lr = 5e-4;
  int batch_size = 128;
  long long segment = 32768;
  std::string optimizer = "adamw";
  double sigma_min = kSigmaMin;
  long long max_steps = 1000000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 1000.0;
  double noise_scale = 0.5;

  static TrainConfig full_band() { return {}; }
  static TrainConfig multi_band() {
    TrainConfig c;
    c.lr = 2e-4;
    return c;
  }

  void validate() const;
};

// One training example: a waveform segment, its mel and the prior matching
// the estimator's band (full band or wavelet band).
struct TrainItem {
  Waveform segment;
  MelSpec mel;
  PriorTrack prior;
};

// Inputs and regression targets of one CFM batch in estimator layout.
template <typename Scalar>
struct CfmBatch {
  Mat<Scalar> x_t;  // in_channels x sum(lengths)
  Mat<Scalar> u;    // 1 x sum(lengths)
  std::vector<Scalar> t;
  std::vector<Index> lengths;
  std::vector<const MelSpec*> mels;  // borrowed from the items
};

// Draws t ~ U[0, 1] per item and x0 with tau = 1, then forms x_t and u. For
// multi-band estimators the target is wavelet band `lower_bands` and the
// ground-truth lower bands are stacked as extra input channels.
template <typename Scalar>
CfmBatch<Scalar> make_cfm_batch(const EstimatorConfig& cfg, const std::vector<TrainItem>& items, double sigma_min,
                                double noise_scale, std::mt19937_64& rng);
template <typename Scalar>
CfmBatch<Scalar> make_cfm_batch(const EstimatorConfig&, std::vector<TrainItem>&&, double, double,
                                std::mt19937_64&) = delete;

template <typename Scalar>
Var<Scalar> cfm_objective(const Estimator<Scalar>& model, const CfmBatch<Scalar>& batch,
                          std::mt19937_64* drop_rng = nullptr);

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Adam moments with decoupled weight decay over a model's parameter list.
template <typename Scalar>
class AdamW {
 public:
  AdamW(std::vector<NamedParam<Scalar>>& params, const TrainConfig& cfg);

  // Clips the global gradient norm, applies one update and clears gradients.
  // Returns the pre-clip norm.
  double step(double lr);
  long long steps() const { return t_; }

 private:
  std::vector<NamedParam<Scalar>>& params_;
  TrainConfig cfg_;
  std::vector<Mat<Scalar>> m_, v_;
  long long t_ = 0;
};

template <typename Scalar>
struct TrainState {
  Estimator<Scalar>& model;
  AdamW<Scalar> opt;
  std::mt19937_64 rng;
  long long step = 0;

  TrainState(Estimator<Scalar>& m, const TrainConfig& cfg, std::uint64_t seed)
      : model(m), opt(m.parameters(), cfg), rng(seed) {}
};

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
};

// One optimizer step on the CFM objective. A non-finite loss or gradient
// leaves the parameters untouched and throws NonFiniteLoss.
template <typename Scalar>
StepResult train_step(TrainState<Scalar>& state, const std::vector<TrainItem>& batch, const TrainConfig& cfg);

}  // namespace periodwave
