#include "geomvd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "geomvd/errors.hpp"

namespace geomvd {

namespace {

// Substream tags for deriving independent seeds from the run seed.
constexpr uint64_t kTagFeatures = 0x66656174ull;  // feature projections
constexpr uint64_t kTagDenoiser = 0x6d6f646cull;  // denoiser weights
constexpr uint64_t kTagImageNoise = 0x696e6f69ull; // per-step image noise
constexpr uint64_t kTagView = 0x76696577ull;       // per-view latent stream
constexpr uint64_t kTagText = 0x74657874ull;
constexpr uint64_t kTagStats = 0x73746174ull;

Matrix random_matrix(int rows, int cols, uint64_t seed, double scale) {
    Matrix m(rows, cols);
    GaussianStream g(seed);
    for (double& v : m.data) v = g.next() * scale;
    return m;
}

// Per-layer 3 -> channels patch projection shared by extract_features and
// decode_latent.
Matrix patch_projection(uint64_t seed, int layer, int channels) {
    return random_matrix(3, channels, mix64(mix64(seed, kTagFeatures), static_cast<uint64_t>(layer)),
                         1.0 / std::sqrt(3.0));
}

FeatureTensor pool_patches(const RgbImage& img) {
    const int gw = img.width / kPatchSize, gh = img.height / kPatchSize;
    FeatureTensor tokens(1, gw * gh, 3);
    const double inv = 1.0 / (kPatchSize * kPatchSize);
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            double acc[3] = {0.0, 0.0, 0.0};
            for (int dy = 0; dy < kPatchSize; ++dy)
                for (int dx = 0; dx < kPatchSize; ++dx) {
                    const double* px = img.at(gy * kPatchSize + dy, gx * kPatchSize + dx);
                    acc[0] += px[0];
                    acc[1] += px[1];
                    acc[2] += px[2];
                }
            for (int c = 0; c < 3; ++c) tokens.at(0, gy * gw + gx, c) = acc[c] * inv;
        }
    }
    return tokens;
}

uint64_t pose_key(const CameraPose& pose) {
    double payload[7] = {pose.azimuth_deg,  pose.elevation_deg, pose.distance,
                         pose.target[0],    pose.target[1],     pose.target[2],
                         pose.projection == CameraPose::Projection::perspective ? pose.fov_deg : -1.0};
    return hash64(std::string_view(reinterpret_cast<const char*>(payload), sizeof(payload)));
}

uint64_t bundle_geo_checksum(const ConditionBundle& bundle) {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (const FeatureTensor& ft : bundle.geo_features) h = mix64(h, checksum_doubles(ft.data));
    return h;
}

} // namespace

NoiseSchedule make_noise_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ValidationError("noise schedule needs T >= 1");
    if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
        throw ValidationError("require 0 < beta_start < beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.betas.resize(T);
    s.alpha_bars.resize(T + 1);
    s.alpha_bars[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        s.betas[t - 1] = beta_start + (beta_end - beta_start) * frac;
        s.alpha_bars[t] = s.alpha_bars[t - 1] * (1.0 - s.betas[t - 1]);
    }
    return s;
}

FeatureTensor add_noise(const FeatureTensor& x0, int t, const NoiseSchedule& sched, uint64_t seed) {
    if (t < 0 || t > sched.T) throw ValidationError("noise step outside [0, T]");
    if (t == 0) return x0;

    const double ab = sched.alpha_bar(t);
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);

    FeatureTensor out = x0;
    GaussianStream g(seed);
    for (double& v : out.data) v = signal * v + noise * g.next();
    return out;
}

std::vector<FeatureTensor> extract_features(const RgbImage& img, uint64_t seed, int layers,
                                            int channels) {
    if (img.width <= 0 || img.height <= 0) throw ShapeError("empty image");
    if (img.width % kPatchSize != 0 || img.height % kPatchSize != 0)
        throw ShapeError("image dimensions must be divisible by the patch size (8)");
    if (layers < 1 || channels < 1) throw ValidationError("layers and channels must be positive");

    const FeatureTensor tokens = pool_patches(img);
    std::vector<FeatureTensor> out;
    out.reserve(layers);
    for (int layer = 0; layer < layers; ++layer)
        out.push_back(project(tokens, patch_projection(seed, layer, channels)));
    return out;
}

RgbImage decode_latent(const FeatureTensor& latent, uint64_t seed, int out_w, int out_h) {
    if (out_w % kPatchSize != 0 || out_h % kPatchSize != 0)
        throw ShapeError("decoded dimensions must be divisible by the patch size (8)");
    const int gw = out_w / kPatchSize, gh = out_h / kPatchSize;
    if (latent.batch != 1 || latent.tokens != gw * gh)
        throw ShapeError("latent token count does not match the decoded size");

    const Matrix dec = transpose(patch_projection(seed, 0, latent.channels));
    const FeatureTensor rgb = project(latent, dec); // tokens x 3

    RgbImage img(out_w, out_h);
    for (int gy = 0; gy < gh; ++gy)
        for (int gx = 0; gx < gw; ++gx)
            for (int dy = 0; dy < kPatchSize; ++dy)
                for (int dx = 0; dx < kPatchSize; ++dx) {
                    double* px = img.at(gy * kPatchSize + dy, gx * kPatchSize + dx);
                    for (int c = 0; c < 3; ++c) {
                        const double v = rgb.at(0, gy * gw + gx, c);
                        px[c] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                    }
                }
    return img;
}

std::vector<double> embed_cross_modal(const std::string& text, const RgbImage& img) {
    std::vector<double> out(kCrossModalDim, 0.0);

    // Text part: hash-seeded Gaussian features.
    GaussianStream tg(mix64(hash64(text), kTagText));
    std::vector<double> text_part(kCrossModalDim);
    for (double& v : text_part) v = tg.next();

    // Image part: per-channel mean/std/min/max through a fixed linear map.
    double stats[12] = {0};
    if (img.width > 0 && img.height > 0) {
        const size_t n = static_cast<size_t>(img.width) * img.height;
        for (int c = 0; c < 3; ++c) {
            double mean = 0.0, lo = img.data[c], hi = img.data[c];
            for (size_t p = 0; p < n; ++p) {
                const double v = img.data[p * 3 + c];
                mean += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (size_t p = 0; p < n; ++p) {
                const double d = img.data[p * 3 + c] - mean;
                var += d * d;
            }
            var /= static_cast<double>(n);
            stats[c * 4] = mean;
            stats[c * 4 + 1] = std::sqrt(var);
            stats[c * 4 + 2] = lo;
            stats[c * 4 + 3] = hi;
        }
    }
    const Matrix stat_map = random_matrix(12, kCrossModalDim, mix64(kTagStats, 0), 1.0 / std::sqrt(12.0));
    std::vector<double> image_part(kCrossModalDim, 0.0);
    for (int k = 0; k < 12; ++k)
        for (int j = 0; j < kCrossModalDim; ++j) image_part[j] += stats[k] * stat_map.at(k, j);

    for (int j = 0; j < kCrossModalDim; ++j) out[j] = 0.5 * text_part[j] + 0.5 * image_part[j];
    return out;
}

ToyDenoiser::ToyDenoiser(const DenoiserConfig& cfg, uint64_t seed) : cfg_(cfg) {
    if (cfg.layers < 1) throw ValidationError("denoiser needs at least one layer");
    if (cfg.channels < 1 || cfg.heads < 1 || cfg.channels % cfg.heads != 0)
        throw ValidationError("channels must be positive and divisible by heads");

    const int C = cfg.channels;
    const double ws = 1.0 / std::sqrt(static_cast<double>(C));
    uint64_t s = mix64(seed, kTagDenoiser);
    auto next_seed = [&s]() { return s = mix64(s, 0x5eedull); };

    for (int l = 0; l < cfg.layers; ++l) {
        SelfAttentionWeights w;
        w.q = random_matrix(C, C, next_seed(), ws);
        w.k = random_matrix(C, C, next_seed(), ws);
        w.v = random_matrix(C, C, next_seed(), ws);
        w.o = random_matrix(C, C, next_seed(), ws);
        AttentionParams p = init_geo_from_self(w, cfg.heads);
        if (cfg.separate_geo_query) p.w_ga_q = random_matrix(C, C, next_seed(), ws);
        attn_.push_back(std::move(p));

        cross_v_.push_back(random_matrix(kCrossModalDim, C, next_seed(),
                                         1.0 / std::sqrt(static_cast<double>(kCrossModalDim))));
        mlp_in_.push_back(random_matrix(C, 4 * C, next_seed(), ws));
        mlp_out_.push_back(random_matrix(4 * C, C, next_seed(), 0.5 / std::sqrt(static_cast<double>(C))));
    }
    eps_out_ = random_matrix(C, C, next_seed(), ws);
}

FeatureTensor ToyDenoiser::forward(const FeatureTensor& x, const ConditionBundle& cond,
                                   double lambda_geo) const {
    if (x.channels != cfg_.channels) throw ShapeError("latent channels do not match the denoiser");
    if (static_cast<int>(cond.image_features.size()) != cfg_.layers ||
        static_cast<int>(cond.geo_features.size()) != cfg_.layers)
        throw ShapeError("condition bundle layer count does not match the denoiser");
    if (static_cast<int>(cond.cross_modal.size()) != kCrossModalDim)
        throw ShapeError("cross-modal embedding has the wrong dimension");

    FeatureTensor h = x;
    for (int l = 0; l < cfg_.layers; ++l) {
        // Decoupled geometry-enhanced attention, residual.
        const GeoAttentionOutput att =
            fused_attention(h, cond.image_features[l], cond.geo_features[l], attn_[l], lambda_geo);
        for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += att.fused.data[i];

        // Single-token cross-attention over the cross-modal embedding:
        // softmax over one key is 1, so the block adds the projected value.
        std::vector<double> cv(cfg_.channels, 0.0);
        for (int k = 0; k < kCrossModalDim; ++k) {
            const double v = cond.cross_modal[k];
            if (v == 0.0) continue;
            for (int c = 0; c < cfg_.channels; ++c) cv[c] += v * cross_v_[l].at(k, c);
        }
        for (int b = 0; b < h.batch; ++b)
            for (int t = 0; t < h.tokens; ++t)
                for (int c = 0; c < cfg_.channels; ++c) h.at(b, t, c) += cv[c];

        // Pointwise two-layer MLP, residual.
        FeatureTensor mid = project(h, mlp_in_[l]);
        for (double& v : mid.data) v = std::tanh(v);
        const FeatureTensor delta = project(mid, mlp_out_[l]);
        for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += delta.data[i];
    }
    return project(h, eps_out_);
}

ScheduleParams SamplerConfig::schedule_params() const {
    ScheduleParams sp;
    sp.total_steps_T = T;
    sp.lambda_max = lambda_max;
    sp.lambda_min = lambda_min;
    sp.clamp_negative_cos = clamp_negative_cos;
    return sp;
}

void SamplerConfig::validate() const {
    schedule_params().validate();
    if (latent_size < kPatchSize || latent_size % kPatchSize != 0)
        throw ValidationError("latent_size must be a positive multiple of 8");
    if (sigma_scale < 0.0) throw ValidationError("sigma_scale must be nonnegative");
}

MultiviewSample sample_multiview(const RgbImage& input_img, const std::string& text,
                                 const std::vector<RgbImage>& geo_images,
                                 const std::vector<CameraPose>& poses,
                                 const CameraPose& input_pose, const SamplerConfig& cfg) {
    cfg.validate();
    if (geo_images.size() != poses.size())
        throw ValidationError("geometry image count does not match pose count");

    const ScheduleParams sp = cfg.schedule_params();
    const NoiseSchedule sched = make_noise_schedule(cfg.T);
    const ToyDenoiser denoiser(cfg.denoiser, cfg.seed);
    const uint64_t feature_seed = mix64(cfg.seed, kTagFeatures);

    const std::vector<double> cross = embed_cross_modal(text, input_img);
    const std::vector<FeatureTensor> img_base =
        extract_features(input_img, feature_seed, cfg.denoiser.layers, cfg.denoiser.channels);

    const int grid = cfg.latent_size / kPatchSize;
    const int latent_tokens = grid * grid;

    MultiviewSample result;
    result.images.reserve(poses.size());
    result.diagnostics.resize(poses.size());

    for (size_t n = 0; n < poses.size(); ++n) {
        ViewDiagnostics& diag = result.diagnostics[n];
        diag.delta_theta = view_deviation(poses[n], input_pose);

        std::vector<FeatureTensor> geo_scaled;
        for (const FeatureTensor& ft :
             extract_features(geo_images[n], feature_seed, cfg.denoiser.layers, cfg.denoiser.channels))
            geo_scaled.push_back(apply_geo_mask(ft, diag.delta_theta, sp));

        GaussianStream view_stream(mix64(mix64(cfg.seed, kTagView), pose_key(poses[n])));

        FeatureTensor x(1, latent_tokens, cfg.denoiser.channels);
        view_stream.fill(x.data);

        uint64_t first_checksum = 0;
        for (int t = cfg.T; t >= 1; --t) {
            ConditionBundle bundle;
            bundle.cross_modal = cross;
            bundle.geo_features = geo_scaled;
            bundle.image_features.reserve(img_base.size());
            for (size_t l = 0; l < img_base.size(); ++l) {
                const uint64_t noise_seed = mix64(mix64(cfg.seed, kTagImageNoise),
                                                  (static_cast<uint64_t>(t) << 16) | l);
                bundle.image_features.push_back(add_noise(img_base[l], t, sched, noise_seed));
            }

            const uint64_t geo_sum = bundle_geo_checksum(bundle);
            if (t == cfg.T) {
                first_checksum = geo_sum;
            } else if (geo_sum != first_checksum) {
                throw Error("geometry features changed between steps");
            }
            diag.geo_checksum_per_step.push_back(geo_sum);

            const double lambda = lambda_geo(static_cast<double>(t), sp);
            diag.lambda_per_step.push_back(lambda);

            const FeatureTensor eps = denoiser.forward(x, bundle, lambda);

            const double beta = sched.beta(t);
            const double ab = sched.alpha_bar(t);
            const double ab_prev = sched.alpha_bar(t - 1);
            const double mean_scale = 1.0 / std::sqrt(1.0 - beta);
            const double eps_scale = beta / std::sqrt(1.0 - ab);
            for (size_t i = 0; i < x.data.size(); ++i)
                x.data[i] = mean_scale * (x.data[i] - eps_scale * eps.data[i]);

            if (t > 1 && cfg.sigma_scale > 0.0) {
                const double sigma =
                    cfg.sigma_scale * std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
                for (double& v : x.data) v += sigma * view_stream.next();
            }
        }

        result.images.push_back(decode_latent(x, feature_seed, cfg.latent_size, cfg.latent_size));
    }
    return result;
}

} // namespace geomvd
