#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "periodwave/layers.hpp"
#include "periodwave/spectral.hpp"

namespace periodwave {

struct MelEncoderConfig {
  int mel_embed_dim = 512;
  int n_blocks_stage1 = 8;
  int hidden_dim_stage1 = 1536;
  double drop_path = 0.1;
  int upsample_ratio = 4;
  int upsample_dim = 256;
  int n_blocks_stage2 = 4;
  int hidden_dim_stage2 = 1024;
  std::vector<int> period_strides{1, 2, 3, 5, 7};
  int out_dim = 512;
};

struct EstimatorConfig {
  int n_mels = 100;
  std::vector<int> periods{1, 2, 3, 5, 7};
  std::vector<int> down_ratios{1, 4, 4, 4};
  std::vector<int> up_ratios{4, 4, 4};
  std::vector<int> dblock_dims{32, 64, 128};
  int mblock_dim = 512;
  std::vector<int> ublock_dims{128, 64, 32};
  std::vector<int> res_kernels{3, 3};
  std::vector<int> res_dilations{1, 2};
  std::vector<int> final_res_kernels{3, 3, 3};
  std::vector<int> final_res_dilations{1, 2, 4};
  int time_embed_dim = 256;
  int period_embed_dim = 256;
  std::vector<int> mlp_dims{512, 2048, 512};
  std::string activation = "silu";
  bool multiband = false;
  // Number of already generated lower bands fed alongside x_t (multi-band only).
  int lower_bands = 0;
  MelEncoderConfig mel;

  static EstimatorConfig full_band();
  // Band 0..3 estimator of the wavelet multi-band model.
  static EstimatorConfig multi_band(int band);
  // Small widths with the full-band ratios; used for smoke tests and gradient checks.
  static EstimatorConfig tiny();
  // tiny() widths with the multi-band ratios.
  static EstimatorConfig tiny_multi_band(int band);

  int in_channels() const { return 1 + lower_bands; }
  // Product of the down-sampling ratios.
  int total_downsample() const;
  // Input samples per estimator sample: 4 for wavelet bands, 1 otherwise.
  int decimation() const { return multiband ? 4 : 1; }
  // Middle-block height for an input of length n at period p.
  long long middle_height(long long n, int period) const;
  long long padded_length(long long n, int period) const;

  void validate() const;
};

struct FreeUParams {
  double skip_scale = 0.9;      // applied to the skip features
  double backbone_scale = 1.1;  // applied to the up-sampled backbone features
  bool enabled = false;

  void validate() const;
};

/// Mel-derived conditioning, computed once per utterance and reused for every
/// ODE step. per_period[i] has one segment per batch item of height
/// padded_length / (total_downsample * period).
template <typename Scalar>
struct CondFeatures {
  std::vector<int> periods;
  std::vector<Var<Scalar>> per_period;
  std::vector<Index> lengths;  // estimator-domain signal length per item
};

// Records the middle-block extent of every (period, item) path.
struct ForwardTrace {
  struct Middle {
    int period;
    Index item;
    Index height;
    Index width;
  };
  std::vector<Middle> middles;
};

enum class PeriodMode { kBatched, kSequential };

template <typename Scalar>
class Estimator {
 public:
  Estimator(const EstimatorConfig& cfg, std::uint64_t seed);

  const EstimatorConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t parameter_count() const { return store_.count(); }
  std::vector<NamedParam<Scalar>>& parameters() { return store_.params(); }
  const std::vector<NamedParam<Scalar>>& parameters() const { return store_.params(); }

  // Encodes one mel per item. lengths[b] is the estimator-domain signal length
  // the mel was computed for (band length for multi-band estimators). With a
  // non-null rng, drop path is active.
  CondFeatures<Scalar> mel_encode(const std::vector<const MelSpec*>& mels, const std::vector<Index>& lengths,
                                  std::mt19937_64* rng = nullptr) const;

  // x: in_channels x sum(lengths) with one width-1 segment per item; t per
  // item. Returns 1 x sum(lengths).
  Var<Scalar> forward(const Var<Scalar>& x, const std::vector<Scalar>& t, const CondFeatures<Scalar>& cond,
                      const FreeUParams& freeu, PeriodMode mode = PeriodMode::kBatched,
                      ForwardTrace* trace = nullptr) const;

  // Single-item inference without recording gradients. x is in_channels x T.
  Vec<Scalar> estimate_vector_field(const Mat<Scalar>& x, double t, const CondFeatures<Scalar>& cond,
                                    const FreeUParams& freeu, PeriodMode mode = PeriodMode::kBatched,
                                    ForwardTrace* trace = nullptr) const;

 private:
  struct ResBlock {
    std::vector<Conv2d<Scalar>> convs;
    Linear<Scalar> cond;
  };
  struct Level {
    ResBlock res;
    Conv2d<Scalar> resample;
    int ratio = 1;
  };

  ResBlock make_resblock(const std::string& name, int dim);
  Var<Scalar> run_resblock(const ResBlock& rb, const Var<Scalar>& x, const Var<Scalar>& cond_act) const;
  Var<Scalar> period_paths(const Var<Scalar>& x, const std::vector<Scalar>& t, const CondFeatures<Scalar>& cond,
                           const std::vector<std::size_t>& period_idx, const FreeUParams& freeu,
                           ForwardTrace* trace) const;

  EstimatorConfig cfg_;
  std::uint64_t seed_;
  ParamStore<Scalar> store_;

  // Mel encoder
  Conv2d<Scalar> mel_embed_;
  LayerNorm<Scalar> mel_norm1_;
  std::vector<ConvNeXtV2Block<Scalar>> stage1_;
  LayerNorm<Scalar> mel_norm2_;
  Linear<Scalar> mel_upsample_;
  LayerNorm<Scalar> mel_norm3_;
  std::vector<ConvNeXtV2Block<Scalar>> stage2_;
  std::vector<Conv2d<Scalar>> period_down_;

  // Time / period conditioning
  Var<Scalar> period_table_;
  std::vector<Linear<Scalar>> mlp_;

  // UNet
  Conv2d<Scalar> in_conv_;
  std::vector<Level> down_;
  ResBlock middle_;
  std::vector<Level> up_;
  std::vector<Conv2d<Scalar>> final_convs_;
  Conv2d<Scalar> out_conv_;
};

// Sinusoidal embedding of t in [0, 1] (scaled by 1000), dim x t.size().
template <typename Scalar>
Mat<Scalar> timestep_embedding(const std::vector<Scalar>& t, int dim);

}  // namespace periodwave
