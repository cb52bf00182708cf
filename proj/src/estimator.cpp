#include "periodwave/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "periodwave/padding.hpp"

namespace periodwave {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("EstimatorConfig: " + what);
}

bool all_positive(const std::vector<int>& v) {
  return std::all_of(v.begin(), v.end(), [](int x) { return x > 0; });
}

Conv2dGeom square_geom(int kernel, int dilation) {
  Conv2dGeom g;
  g.kh = g.kw = kernel;
  g.dh = dilation;
  g.ph = dilation * (kernel - 1) / 2;
  g.pw = (kernel - 1) / 2;
  return g;
}

Conv2dGeom height_geom(int kernel, int dilation) {
  Conv2dGeom g;
  g.kh = kernel;
  g.dh = dilation;
  g.ph = dilation * (kernel - 1) / 2;
  return g;
}

// Strided down-sampling along height; ratio 1 is a plain 3x3 convolution.
Conv2dGeom down_geom(int ratio) {
  if (ratio == 1) return square_geom(3, 1);
  Conv2dGeom g;
  g.kh = ratio;
  g.kw = 3;
  g.sh = ratio;
  g.pw = 1;
  return g;
}

}  // namespace

EstimatorConfig EstimatorConfig::full_band() { return EstimatorConfig{}; }

EstimatorConfig EstimatorConfig::multi_band(int band) {
  if (band < 0 || band > 3) throw std::out_of_range("multi_band: band must be in [0, 4)");
  EstimatorConfig c;
  c.down_ratios = {1, 4, 4, 1};
  c.up_ratios = {4, 4, 1};
  c.dblock_dims = {32, 128, 512};
  c.mblock_dim = 512;
  c.ublock_dims = {512, 128, 32};
  c.multiband = true;
  c.lower_bands = band;
  return c;
}

EstimatorConfig EstimatorConfig::tiny() {
  EstimatorConfig c;
  c.dblock_dims = {4, 8, 16};
  c.mblock_dim = 32;
  c.ublock_dims = {16, 8, 4};
  c.time_embed_dim = 16;
  c.period_embed_dim = 16;
  c.mlp_dims = {32, 64, 32};
  c.mel.mel_embed_dim = 16;
  c.mel.n_blocks_stage1 = 1;
  c.mel.hidden_dim_stage1 = 32;
  c.mel.drop_path = 0.0;
  c.mel.upsample_dim = 16;
  c.mel.n_blocks_stage2 = 1;
  c.mel.hidden_dim_stage2 = 32;
  c.mel.out_dim = 32;
  return c;
}

EstimatorConfig EstimatorConfig::tiny_multi_band(int band) {
  const EstimatorConfig mb = multi_band(band);
  EstimatorConfig c = tiny();
  c.down_ratios = mb.down_ratios;
  c.up_ratios = mb.up_ratios;
  c.multiband = true;
  c.lower_bands = band;
  return c;
}

int EstimatorConfig::total_downsample() const {
  int d = 1;
  for (int r : down_ratios) d *= r;
  return d;
}

long long EstimatorConfig::padded_length(long long n, int period) const {
  return round_up(n, static_cast<long long>(total_downsample()) * period);
}

long long EstimatorConfig::middle_height(long long n, int period) const {
  return padded_length(n, period) / (static_cast<long long>(total_downsample()) * period);
}

void EstimatorConfig::validate() const {
  require(n_mels > 0, "n_mels must be positive");
  require(!periods.empty() && all_positive(periods), "periods must be non-empty and positive");
  require(mel.period_strides == periods, "mel encoder period strides must equal the estimator periods");
  require(!dblock_dims.empty() && all_positive(dblock_dims), "dblock dims must be positive");
  require(down_ratios.size() == dblock_dims.size() + 1, "need one down ratio per DBlock plus a leading 1");
  require(down_ratios.front() == 1 && all_positive(down_ratios), "down ratios must start with 1 and be positive");
  require(std::vector<int>(down_ratios.begin() + 1, down_ratios.end()) == up_ratios,
          "up ratios must mirror the down ratios after the leading 1");
  require(std::vector<int>(ublock_dims.rbegin(), ublock_dims.rend()) == dblock_dims,
          "UBlock dims must mirror DBlock dims for additive skips");
  require(mblock_dim > 0, "mblock dim must be positive");
  require(!res_kernels.empty() && res_kernels.size() == res_dilations.size(), "res kernels/dilations mismatch");
  require(!final_res_kernels.empty() && final_res_kernels.size() == final_res_dilations.size(),
          "final res kernels/dilations mismatch");
  for (int k : res_kernels) require(k > 0 && k % 2 == 1, "res kernels must be odd");
  for (int k : final_res_kernels) require(k > 0 && k % 2 == 1, "final res kernels must be odd");
  require(all_positive(res_dilations) && all_positive(final_res_dilations), "dilations must be positive");
  require(time_embed_dim > 0 && time_embed_dim % 2 == 0, "time embedding dim must be even and positive");
  require(period_embed_dim == time_embed_dim, "period embedding is added to the time embedding; dims must match");
  require(!mlp_dims.empty() && all_positive(mlp_dims), "MLP dims must be positive");
  require(activation == "silu", "only the SiLU activation is supported");
  require(mel.out_dim == mblock_dim, "mel encoder output dim must equal the MBlock dim");
  require(mel.mel_embed_dim > 0 && mel.hidden_dim_stage1 > 0 && mel.upsample_dim > 0 && mel.hidden_dim_stage2 > 0,
          "mel encoder dims must be positive");
  require(mel.upsample_ratio > 0 && mel.n_blocks_stage1 >= 0 && mel.n_blocks_stage2 >= 0,
          "mel encoder block counts must be non-negative");
  require(mel.drop_path >= 0.0 && mel.drop_path < 1.0, "drop path must be in [0, 1)");
  if (multiband) {
    require(lower_bands >= 0 && lower_bands <= 3, "multi-band estimators take 0..3 lower bands");
  } else {
    require(lower_bands == 0, "lower bands only apply to multi-band estimators");
    require(total_downsample() == 64, "full-band down ratios must multiply to 64");
  }
}

void FreeUParams::validate() const {
  if (!(skip_scale > 0.0 && backbone_scale > 0.0)) throw std::invalid_argument("FreeU scales must be positive");
}

template <typename Scalar>
Mat<Scalar> timestep_embedding(const std::vector<Scalar>& t, int dim) {
  const int half = dim / 2;
  Mat<Scalar> e(dim, static_cast<Index>(t.size()));
  const double log_base = std::log(10000.0) / std::max(1, half - 1);
  for (std::size_t j = 0; j < t.size(); ++j) {
    for (int k = 0; k < half; ++k) {
      const double arg = 1000.0 * double(t[j]) * std::exp(-log_base * k);
      e(k, j) = Scalar(std::sin(arg));
      e(half + k, j) = Scalar(std::cos(arg));
    }
  }
  return e;
}

template <typename Scalar>
Estimator<Scalar>::Estimator(const EstimatorConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed), store_(seed) {
  cfg_.validate();
  auto& ps = store_;
  const auto& mc = cfg_.mel;

  // Mel encoder
  mel_embed_ = Conv2d<Scalar>(ps, "mel.embed", cfg_.n_mels, mc.mel_embed_dim, height_geom(7, 1));
  mel_norm1_ = LayerNorm<Scalar>(ps, "mel.norm1", mc.mel_embed_dim);
  for (int i = 0; i < mc.n_blocks_stage1; ++i) {
    stage1_.emplace_back(ps, "mel.stage1." + std::to_string(i), mc.mel_embed_dim, mc.hidden_dim_stage1);
  }
  mel_norm2_ = LayerNorm<Scalar>(ps, "mel.norm2", mc.mel_embed_dim);
  mel_upsample_ = Linear<Scalar>(ps, "mel.upsample", mc.mel_embed_dim, mc.upsample_dim * mc.upsample_ratio);
  mel_norm3_ = LayerNorm<Scalar>(ps, "mel.norm3", mc.upsample_dim);
  for (int i = 0; i < mc.n_blocks_stage2; ++i) {
    stage2_.emplace_back(ps, "mel.stage2." + std::to_string(i), mc.upsample_dim, mc.hidden_dim_stage2);
  }
  for (int p : cfg_.periods) {
    Conv2dGeom g;
    g.kh = p;
    g.sh = p;
    period_down_.emplace_back(ps, "mel.down_p" + std::to_string(p), mc.upsample_dim, mc.out_dim, g);
  }

  // Time and period conditioning
  const Index n_periods = static_cast<Index>(cfg_.periods.size());
  period_table_ = ps.uniform("cond.period_embedding", cfg_.period_embed_dim, n_periods, 1.0,
                             {n_periods, cfg_.period_embed_dim});
  int in = cfg_.time_embed_dim;
  for (std::size_t i = 0; i < cfg_.mlp_dims.size(); ++i) {
    mlp_.emplace_back(ps, "cond.mlp." + std::to_string(i), in, cfg_.mlp_dims[i]);
    in = cfg_.mlp_dims[i];
  }

  // UNet
  const std::size_t levels = cfg_.dblock_dims.size();
  in_conv_ = Conv2d<Scalar>(ps, "unet.in", cfg_.in_channels(), cfg_.dblock_dims[0], square_geom(3, 1));
  for (std::size_t i = 0; i < levels; ++i) {
    const std::string name = "unet.down." + std::to_string(i);
    Level lvl;
    lvl.res = make_resblock(name + ".res", cfg_.dblock_dims[i]);
    lvl.ratio = cfg_.down_ratios[i + 1];
    const int next = i + 1 < levels ? cfg_.dblock_dims[i + 1] : cfg_.mblock_dim;
    lvl.resample = Conv2d<Scalar>(ps, name + ".resample", cfg_.dblock_dims[i], next, down_geom(lvl.ratio));
    down_.push_back(std::move(lvl));
  }
  middle_ = make_resblock("unet.mid.res", cfg_.mblock_dim);
  for (std::size_t j = 0; j < levels; ++j) {
    const std::string name = "unet.up." + std::to_string(j);
    Level lvl;
    lvl.ratio = cfg_.up_ratios[levels - 1 - j];
    const int from = j == 0 ? cfg_.mblock_dim : cfg_.ublock_dims[j - 1];
    lvl.resample = Conv2d<Scalar>(ps, name + ".resample", from, cfg_.ublock_dims[j], square_geom(3, 1));
    lvl.res = make_resblock(name + ".res", cfg_.ublock_dims[j]);
    up_.push_back(std::move(lvl));
  }
  const int out_dim = cfg_.ublock_dims.back();
  for (std::size_t i = 0; i < cfg_.final_res_kernels.size(); ++i) {
    final_convs_.emplace_back(ps, "final.res." + std::to_string(i), out_dim, out_dim,
                              height_geom(cfg_.final_res_kernels[i], cfg_.final_res_dilations[i]));
  }
  out_conv_ = Conv2d<Scalar>(ps, "final.out", out_dim, 1, height_geom(3, 1));
}

template <typename Scalar>
typename Estimator<Scalar>::ResBlock Estimator<Scalar>::make_resblock(const std::string& name, int dim) {
  ResBlock rb;
  for (std::size_t i = 0; i < cfg_.res_kernels.size(); ++i) {
    rb.convs.emplace_back(store_, name + ".conv" + std::to_string(i), dim, dim,
                          square_geom(cfg_.res_kernels[i], cfg_.res_dilations[i]));
  }
  rb.cond = Linear<Scalar>(store_, name + ".cond", cfg_.mlp_dims.back(), dim);
  return rb;
}

template <typename Scalar>
Var<Scalar> Estimator<Scalar>::run_resblock(const ResBlock& rb, const Var<Scalar>& x,
                                            const Var<Scalar>& cond_act) const {
  Var<Scalar> h = rb.convs[0](silu(x));
  h = add_segment_bias(h, rb.cond(cond_act));
  for (std::size_t i = 1; i < rb.convs.size(); ++i) h = rb.convs[i](silu(h));
  return add(x, h);
}

template <typename Scalar>
CondFeatures<Scalar> Estimator<Scalar>::mel_encode(const std::vector<const MelSpec*>& mels,
                                                   const std::vector<Index>& lengths, std::mt19937_64* rng) const {
  if (mels.empty() || mels.size() != lengths.size()) {
    throw std::invalid_argument("mel_encode: need one signal length per mel");
  }
  const auto& mc = cfg_.mel;
  const int dsamp = cfg_.total_downsample();
  std::vector<std::pair<Index, Index>> ext;
  Index total_frames = 0;
  for (std::size_t b = 0; b < mels.size(); ++b) {
    const MelSpec& m = *mels[b];
    if (m.bins() != cfg_.n_mels) throw std::invalid_argument("mel_encode: mel bin count does not match the estimator");
    const int hop = m.config.hop_size;
    if (hop != cfg_.decimation() * mc.upsample_ratio * dsamp) {
      throw std::invalid_argument("mel_encode: hop " + std::to_string(hop) +
                                  " inconsistent with upsample ratio x total down-sampling");
    }
    const Index expected = mel_frames(static_cast<long long>(lengths[b]) * cfg_.decimation(), hop);
    if (m.frames() != expected) {
      throw std::invalid_argument("mel_encode: " + std::to_string(m.frames()) + " mel frames for a signal needing " +
                                  std::to_string(expected));
    }
    ext.emplace_back(m.frames(), 1);
    total_frames += m.frames();
  }
  Mat<Scalar> mel_data(cfg_.n_mels, total_frames);
  Index col = 0;
  for (const MelSpec* m : mels) {
    // Row-major frames x bins is column-major bins x frames.
    mel_data.middleCols(col, m->frames()) =
        Eigen::Map<const Eigen::MatrixXf>(m->values.data(), m->bins(), m->frames()).template cast<Scalar>();
    col += m->frames();
  }
  const Var<Scalar> mel_var = Var<Scalar>::constant(std::move(mel_data), make_layout(ext));

  auto keep_factors = [&]() -> std::vector<Scalar> {
    if (rng == nullptr || mc.drop_path <= 0.0) return {};
    std::vector<Scalar> f(mels.size());
    for (auto& v : f) {
      const double u = double((*rng)() >> 11) * 0x1.0p-53;
      v = u < mc.drop_path ? Scalar(0) : Scalar(1.0 / (1.0 - mc.drop_path));
    }
    return f;
  };

  Var<Scalar> h = mel_norm1_(mel_embed_(mel_var));
  for (const auto& blk : stage1_) h = blk(h, keep_factors());
  h = mel_norm2_(h);
  h = unfold_channels(mel_upsample_(h), static_cast<Index>(mc.upsample_ratio));
  h = mel_norm3_(h);
  for (const auto& blk : stage2_) h = blk(h, keep_factors());

  CondFeatures<Scalar> out;
  out.periods = cfg_.periods;
  out.lengths = lengths;
  for (std::size_t i = 0; i < cfg_.periods.size(); ++i) {
    const int p = cfg_.periods[i];
    // Crop or edge-extend the up-sampled track to padded_length / dsamp so the
    // stride-p projection lands exactly on the middle-block height.
    std::vector<std::pair<Index, Index>> fit_ext;
    std::vector<Index> src;
    for (std::size_t b = 0; b < mels.size(); ++b) {
      const Segment& s = h.layout()[b];
      const Index target = static_cast<Index>(cfg_.padded_length(lengths[b], p) / dsamp);
      fit_ext.emplace_back(target, 1);
      for (Index k = 0; k < target; ++k) src.push_back(s.offset + std::min(k, s.h - 1));
    }
    out.per_period.push_back(period_down_[i](gather(h, src, make_layout(fit_ext))));
  }
  return out;
}

template <typename Scalar>
Var<Scalar> Estimator<Scalar>::period_paths(const Var<Scalar>& x, const std::vector<Scalar>& t,
                                            const CondFeatures<Scalar>& cond,
                                            const std::vector<std::size_t>& period_idx, const FreeUParams& freeu,
                                            ForwardTrace* trace) const {
  const std::size_t n_items = x.layout().size();
  const long long dsamp = cfg_.total_downsample();

  // Periodify every (period, item) pair into one batch of grids.
  std::vector<std::pair<Index, Index>> ext;
  std::vector<Index> src;
  std::vector<Scalar> seg_t;
  std::vector<Index> seg_period;
  for (std::size_t pi : period_idx) {
    const int p = cfg_.periods[pi];
    for (std::size_t b = 0; b < n_items; ++b) {
      const Segment& s = x.layout()[b];
      const long long padded = cfg_.padded_length(s.h, p);
      ext.emplace_back(static_cast<Index>(padded / p), p);
      for (long long i = 0; i < padded; ++i) src.push_back(s.offset + static_cast<Index>(reflect_index(i, s.h)));
      seg_t.push_back(t[b]);
      seg_period.push_back(static_cast<Index>(pi));
    }
  }
  const Layout grid_layout = make_layout(ext);
  Var<Scalar> h = gather(x, src, grid_layout);

  // Time + period embedding, one column per grid.
  std::vector<std::pair<Index, Index>> one(seg_t.size(), {1, 1});
  const Layout emb_layout = make_layout(one);
  Var<Scalar> e = add(Var<Scalar>::constant(timestep_embedding(seg_t, cfg_.time_embed_dim), emb_layout),
                      gather(period_table_, seg_period, emb_layout));
  for (std::size_t i = 0; i < mlp_.size(); ++i) {
    e = mlp_[i](e);
    if (i + 1 < mlp_.size()) e = silu(e);
  }
  const Var<Scalar> cond_act = silu(e);

  h = in_conv_(h);
  std::vector<Var<Scalar>> skips;
  for (const auto& lvl : down_) {
    h = run_resblock(lvl.res, h, cond_act);
    skips.push_back(h);
    h = lvl.resample(h);
  }

  // Middle block: add the mel conditioning, broadcast across the period axis.
  std::vector<Var<Scalar>> cond_parts;
  for (std::size_t pi : period_idx) cond_parts.push_back(cond.per_period[pi]);
  const Var<Scalar> cond_all = concat_positions(cond_parts);
  std::vector<Index> bsrc;
  bsrc.reserve(static_cast<std::size_t>(h.data().cols()));
  for (std::size_t s = 0; s < h.layout().size(); ++s) {
    const Segment& seg = h.layout()[s];
    const Segment& cseg = cond_all.layout()[s];
    const int p = cfg_.periods[seg_period[s]];
    if (seg.h != cseg.h || seg.w != p) {
      throw std::invalid_argument("forward: conditioning height " + std::to_string(cseg.h) +
                                  " does not match middle block height " + std::to_string(seg.h));
    }
    if (trace) trace->middles.push_back({p, static_cast<Index>(s % n_items), seg.h, seg.w});
    for (Index y = 0; y < seg.h; ++y) {
      for (Index xx = 0; xx < seg.w; ++xx) bsrc.push_back(cseg.offset + y);
    }
  }
  h = add(h, gather(cond_all, bsrc, h.layout()));
  h = run_resblock(middle_, h, cond_act);

  for (std::size_t j = 0; j < up_.size(); ++j) {
    const auto& lvl = up_[j];
    if (lvl.ratio > 1) {
      std::vector<std::pair<Index, Index>> up_ext;
      std::vector<Index> usrc;
      for (const auto& seg : h.layout()) {
        up_ext.emplace_back(seg.h * lvl.ratio, seg.w);
        for (Index y = 0; y < seg.h * lvl.ratio; ++y) {
          for (Index xx = 0; xx < seg.w; ++xx) usrc.push_back(seg.offset + (y / lvl.ratio) * seg.w + xx);
        }
      }
      h = gather(h, usrc, make_layout(up_ext));
    }
    h = lvl.resample(h);
    const Var<Scalar>& skip = skips[skips.size() - 1 - j];
    h = freeu.enabled ? axpby(Scalar(freeu.skip_scale), skip, Scalar(freeu.backbone_scale), h) : add(skip, h);
    h = run_resblock(lvl.res, h, cond_act);
  }

  // De-periodify (row-major order is time order; crop the padding) and sum.
  std::vector<std::pair<Index, Index>> item_ext;
  for (const auto& s : x.layout()) item_ext.emplace_back(s.h, 1);
  const Layout item_layout = make_layout(item_ext);
  Var<Scalar> sum;
  for (std::size_t k = 0; k < period_idx.size(); ++k) {
    std::vector<Index> csrc;
    csrc.reserve(static_cast<std::size_t>(layout_positions(item_layout)));
    for (std::size_t b = 0; b < n_items; ++b) {
      const Segment& seg = h.layout()[k * n_items + b];
      for (Index i = 0; i < x.layout()[b].h; ++i) csrc.push_back(seg.offset + i);
    }
    Var<Scalar> path = gather(h, csrc, item_layout);
    sum = sum.defined() ? add(sum, path) : path;
  }
  return sum;
}

template <typename Scalar>
Var<Scalar> Estimator<Scalar>::forward(const Var<Scalar>& x, const std::vector<Scalar>& t,
                                       const CondFeatures<Scalar>& cond, const FreeUParams& freeu, PeriodMode mode,
                                       ForwardTrace* trace) const {
  if (x.data().rows() != cfg_.in_channels()) {
    throw std::invalid_argument("forward: expected " + std::to_string(cfg_.in_channels()) + " input channels");
  }
  if (t.size() != x.layout().size()) throw std::invalid_argument("forward: need one time value per item");
  for (Scalar tv : t) {
    if (!(tv >= Scalar(0) && tv <= Scalar(1))) throw std::invalid_argument("forward: t must lie in [0, 1]");
  }
  if (!x.data().allFinite()) throw std::invalid_argument("forward: non-finite input");
  if (cond.per_period.size() != cfg_.periods.size() || cond.lengths.size() != x.layout().size()) {
    throw std::invalid_argument("forward: conditioning does not match the batch");
  }
  for (std::size_t b = 0; b < x.layout().size(); ++b) {
    if (x.layout()[b].w != 1 || x.layout()[b].h != cond.lengths[b]) {
      throw std::invalid_argument("forward: conditioning was built for a different signal length");
    }
  }
  if (freeu.enabled) freeu.validate();

  Var<Scalar> h;
  if (mode == PeriodMode::kBatched) {
    std::vector<std::size_t> all(cfg_.periods.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    h = period_paths(x, t, cond, all, freeu, trace);
  } else {
    for (std::size_t i = 0; i < cfg_.periods.size(); ++i) {
      Var<Scalar> path = period_paths(x, t, cond, {i}, freeu, trace);
      h = h.defined() ? add(h, path) : path;
    }
  }
  for (const auto& conv : final_convs_) h = add(h, conv(silu(h)));
  return out_conv_(silu(h));
}

template <typename Scalar>
Vec<Scalar> Estimator<Scalar>::estimate_vector_field(const Mat<Scalar>& x, double t, const CondFeatures<Scalar>& cond,
                                                     const FreeUParams& freeu, PeriodMode mode,
                                                     ForwardTrace* trace) const {
  NoGradGuard no_grad;
  const Index n = x.cols();
  const Var<Scalar> xv = Var<Scalar>::constant(x, Layout{{n, 1, 0}});
  const Var<Scalar> v = forward(xv, {Scalar(t)}, cond, freeu, mode, trace);
  return v.data().row(0).transpose();
}

template Mat<float> timestep_embedding(const std::vector<float>&, int);
template Mat<double> timestep_embedding(const std::vector<double>&, int);
template class Estimator<float>;
template class Estimator<double>;

}  // namespace periodwave
