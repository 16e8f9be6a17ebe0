#pragma once

#include <string>
#include <vector>

#include "geomvd/attention.hpp"
#include "geomvd/image.hpp"
#include "geomvd/render.hpp"
#include "geomvd/schedule.hpp"
#include "geomvd/tensor.hpp"

namespace geomvd {

// ---- DDPM noise schedule ---------------------------------------------------

struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;      // betas[t-1] for t in 1..T, linear, increasing
    std::vector<double> alpha_bars; // alpha_bars[t] for t in 0..T; alpha_bars[0] = 1

    double beta(int t) const { return betas[t - 1]; }
    double alpha_bar(int t) const { return alpha_bars[t]; }
};

NoiseSchedule make_noise_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps with eps drawn
/// from the seeded deterministic Gaussian stream.
FeatureTensor add_noise(const FeatureTensor& x0, int t, const NoiseSchedule& sched, uint64_t seed);

// ---- Stand-in feature extraction -------------------------------------------

inline constexpr int kPatchSize = 8;
inline constexpr int kCrossModalDim = 64;

/// Stand-in for latent feature extraction: non-overlapping 8x8 mean-pooled
/// RGB patches form the tokens (3 channels pre-projection), followed by one
/// fixed seeded linear projection 3 -> channels per layer. Image dimensions
/// must be divisible by 8.
std::vector<FeatureTensor> extract_features(const RgbImage& img, uint64_t seed, int layers = 4,
                                            int channels = 32);

/// Inverse of the layer-0 patch embedding: each token maps back to an RGB
/// mean through the transposed projection and fills its 8x8 patch, clamped
/// to [0, 1].
RgbImage decode_latent(const FeatureTensor& latent, uint64_t seed, int out_w, int out_h);

/// Deterministic 64-dim stand-in for the cross-modal embedding:
/// 0.5 * text_part + 0.5 * image_part, where text_part is drawn from a
/// generator seeded by a 64-bit hash of the text and image_part is a fixed
/// seeded linear map of per-channel image statistics (mean/std/min/max).
/// Empty text + all-zero image yields the fixed baseline vector
/// 0.5 * text_part("") (the image statistics vanish identically).
std::vector<double> embed_cross_modal(const std::string& text, const RgbImage& img);

// ---- Toy denoiser -----------------------------------------------------------

/// Conditions entering one denoising step: the cross-modal embedding feeds
/// the cross-attention, image features carry noise matching the current
/// step, geometry features stay noise-free (mask-scaled once per view).
struct ConditionBundle {
    std::vector<double> cross_modal;
    std::vector<FeatureTensor> image_features; // per layer, noised at the current t
    std::vector<FeatureTensor> geo_features;   // per layer, noise-free
};

struct DenoiserConfig {
    int layers = 4;
    int channels = 32;
    int heads = 4;
    bool separate_geo_query = false; // experimental: independent W_GA^Q
};

/// Seed-generated stand-in for the pretrained denoising U-Net. Each layer
/// applies a residual decoupled geometry-enhanced attention block, a
/// single-token cross-attention over the cross-modal embedding, and a
/// pointwise two-layer tanh MLP. The geometry attention weights are
/// initialized as copies of the self-attention weights. Exercises wiring
/// and invariants only; it is untrained and produces no meaningful imagery.
class ToyDenoiser {
public:
    ToyDenoiser(const DenoiserConfig& cfg, uint64_t seed);

    /// Predicts the noise residual for latent x under the given conditions.
    FeatureTensor forward(const FeatureTensor& x, const ConditionBundle& cond,
                          double lambda_geo) const;

    const DenoiserConfig& config() const { return cfg_; }
    const std::vector<AttentionParams>& attention_params() const { return attn_; }

private:
    DenoiserConfig cfg_;
    std::vector<AttentionParams> attn_; // per layer
    std::vector<Matrix> cross_v_;       // per layer, kCrossModalDim -> channels
    std::vector<Matrix> mlp_in_;        // channels -> 4*channels
    std::vector<Matrix> mlp_out_;       // 4*channels -> channels
    Matrix eps_out_;                    // channels -> channels
};

// ---- Multi-view sampler ------------------------------------------------------

struct SamplerConfig {
    int T = 50;
    uint64_t seed = 0;
    int latent_size = 40; // decoded image is latent_size x latent_size
    double lambda_max = 0.3;
    double lambda_min = 1e-5;
    bool clamp_negative_cos = true;
    double sigma_scale = 1.0; // 0 disables the ancestral noise term
    DenoiserConfig denoiser;

    ScheduleParams schedule_params() const;
    void validate() const;
};

struct ViewDiagnostics {
    double delta_theta = 0.0;
    std::vector<double> lambda_per_step;        // visited t = T ... 1
    std::vector<uint64_t> geo_checksum_per_step; // constant across the run
};

struct MultiviewSample {
    std::vector<RgbImage> images;
    std::vector<ViewDiagnostics> diagnostics;
};

/// Reverse diffusion over every target view. Per view: the view deviation
/// against the input pose scales the (noise-free) geometry features once;
/// each step t = T..1 rebuilds the condition bundle with image features
/// noised at t, evaluates lambda_geo(t) and applies the DDPM ancestral
/// update with the toy denoiser.
///
/// Determinism contract: every random draw derives from cfg.seed. The
/// per-view stream is seeded by mix64(seed, hash of the pose payload), so
/// permuting the input views permutes the outputs identically; the image
/// feature noise stream is seeded by mix64 of (seed, t, layer) and is shared
/// by all views.
MultiviewSample sample_multiview(const RgbImage& input_img, const std::string& text,
                                 const std::vector<RgbImage>& geo_images,
                                 const std::vector<CameraPose>& poses,
                                 const CameraPose& input_pose, const SamplerConfig& cfg);

} // namespace geomvd
