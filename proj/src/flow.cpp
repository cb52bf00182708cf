#include "periodwave/flow.hpp"

#include <cmath>
#include <sstream>

#include "periodwave/wavelet.hpp"

namespace periodwave {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (segment <= 0 || segment % 256 != 0) {
    throw std::invalid_argument("TrainConfig: segment must be a positive multiple of 256");
  }
  if (optimizer != "adamw") throw std::invalid_argument("TrainConfig: unsupported optimizer '" + optimizer + "'");
  if (!(sigma_min >= 0.0 && sigma_min < 1.0)) throw std::invalid_argument("TrainConfig: sigma_min outside [0, 1)");
  if (max_steps < 0) throw std::invalid_argument("TrainConfig: max_steps must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: Adam betas outside [0, 1)");
  }
  if (!(adam_eps > 0.0) || !(weight_decay >= 0.0) || !(grad_clip > 0.0) || !(noise_scale > 0.0)) {
    throw std::invalid_argument("TrainConfig: eps, grad_clip and noise_scale must be positive, weight_decay >= 0");
  }
}

template <typename Scalar>
CfmBatch<Scalar> make_cfm_batch(const EstimatorConfig& cfg, const std::vector<TrainItem>& items, double sigma_min,
                                double noise_scale, std::mt19937_64& rng) {
  if (items.empty()) throw std::invalid_argument("make_cfm_batch: empty batch");
  const int dec = cfg.decimation();
  const int band = cfg.lower_bands;
  CfmBatch<Scalar> out;
  Index total = 0;
  for (const auto& it : items) {
    const Index n = Index(it.segment.size());
    if (n % dec != 0) throw std::invalid_argument("make_cfm_batch: segment length not divisible by 4");
    out.lengths.push_back(n / dec);
    total += n / dec;
  }
  out.x_t.resize(cfg.in_channels(), total);
  out.u.resize(1, total);

  GaussianSource uniform(rng);
  Index col = 0;
  for (std::size_t b = 0; b < items.size(); ++b) {
    const TrainItem& it = items[b];
    const Index n = out.lengths[b];
    const Eigen::Map<const Eigen::VectorXf> wav(it.segment.samples.data(), Index(it.segment.samples.size()));

    Vec<Scalar> x1;
    if (cfg.multiband) {
      const auto split = packet_split(wav.cast<Scalar>().eval());
      x1 = split.bands[band];
      for (int k = 0; k < band; ++k) out.x_t.block(1 + k, col, 1, n) = split.bands[k].transpose();
    } else {
      x1 = wav.cast<Scalar>();
    }

    const double t = uniform.unit();
    PriorSpec spec{prior_to_sample_std(it.prior, it.mel.config.hop_size / dec, n), noise_scale, 1.0};
    const Vec<Scalar> x0 = sample_prior<Scalar>(spec, n, rng);
    out.x_t.block(0, col, 1, n) = ot_path(x0, x1, t, sigma_min).transpose();
    out.u.block(0, col, 1, n) = ot_target(x0, x1, sigma_min).transpose();
    out.t.push_back(Scalar(t));
    out.mels.push_back(&it.mel);
    col += n;
  }
  return out;
}

template <typename Scalar>
Var<Scalar> cfm_objective(const Estimator<Scalar>& model, const CfmBatch<Scalar>& batch, std::mt19937_64* drop_rng) {
  const CondFeatures<Scalar> cond = model.mel_encode(batch.mels, batch.lengths, drop_rng);
  std::vector<std::pair<Index, Index>> ext;
  for (Index n : batch.lengths) ext.emplace_back(n, 1);
  const Var<Scalar> x = Var<Scalar>::constant(batch.x_t, make_layout(ext));
  FreeUParams off;
  off.enabled = false;
  const Var<Scalar> v = model.forward(x, batch.t, cond, off);
  return mse(v, batch.u);
}

template <typename Scalar>
AdamW<Scalar>::AdamW(std::vector<NamedParam<Scalar>>& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(Mat<Scalar>::Zero(p.var.data().rows(), p.var.data().cols()));
    v_.push_back(Mat<Scalar>::Zero(p.var.data().rows(), p.var.data().cols()));
  }
}

template <typename Scalar>
double AdamW<Scalar>::step(double lr) {
  double sq = 0.0;
  for (auto& p : params_) {
    if (p.var.has_grad()) sq += p.var.grad().template cast<double>().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double clip = norm > cfg_.grad_clip ? cfg_.grad_clip / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  const Scalar b1 = Scalar(cfg_.beta1), b2 = Scalar(cfg_.beta2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var<Scalar>& w = params_[i].var;
    w.data() *= Scalar(1.0 - lr * cfg_.weight_decay);
    if (!w.has_grad()) continue;
    const Mat<Scalar> g = w.grad() * Scalar(clip);
    m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
    v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
    w.data().array() -= Scalar(lr / bc1) * m_[i].array() /
                        ((v_[i].array() / Scalar(bc2)).sqrt() + Scalar(cfg_.adam_eps));
    w.zero_grad();
  }
  return norm;
}

template <typename Scalar>
StepResult train_step(TrainState<Scalar>& state, const std::vector<TrainItem>& batch, const TrainConfig& cfg) {
  const CfmBatch<Scalar> cb = make_cfm_batch<Scalar>(state.model.config(), batch, cfg.sigma_min, cfg.noise_scale,
                                                     state.rng);
  Var<Scalar> loss = cfm_objective(state.model, cb, &state.rng);
  const double value = double(loss.data()(0, 0));

  auto fail = [&](const std::string& what) {
    for (auto& p : state.model.parameters()) p.var.zero_grad();
    std::ostringstream msg;
    msg << "train_step " << state.step << ": " << what << "; t =";
    for (Scalar t : cb.t) msg << ' ' << double(t);
    msg << "; |x_t|max = " << cb.x_t.cwiseAbs().maxCoeff() << "; |u|max = " << cb.u.cwiseAbs().maxCoeff();
    for (const auto& p : state.model.parameters()) {
      if (!p.var.data().allFinite()) {
        msg << "; parameter " << p.name << " is non-finite";
        break;
      }
    }
    throw NonFiniteLoss(msg.str());
  };
  if (!std::isfinite(value)) fail("non-finite loss " + std::to_string(value));

  backward(loss);
  for (const auto& p : state.model.parameters()) {
    if (p.var.has_grad() && !p.var.node()->grad.allFinite()) fail("non-finite gradient in " + p.name);
  }
  StepResult r;
  r.loss = value;
  r.grad_norm = state.opt.step(cfg.lr);
  ++state.step;
  return r;
}

#define PERIODWAVE_INSTANTIATE_FLOW(S)                                                                         \
  template CfmBatch<S> make_cfm_batch<S>(const EstimatorConfig&, const std::vector<TrainItem>&, double, double, \
                                         std::mt19937_64&);                                                    \
  template Var<S> cfm_objective<S>(const Estimator<S>&, const CfmBatch<S>&, std::mt19937_64*);                 \
  template class AdamW<S>;                                                                                     \
  template StepResult train_step<S>(TrainState<S>&, const std::vector<TrainItem>&, const TrainConfig&);

PERIODWAVE_INSTANTIATE_FLOW(float)
PERIODWAVE_INSTANTIATE_FLOW(double)

}  // namespace periodwave
