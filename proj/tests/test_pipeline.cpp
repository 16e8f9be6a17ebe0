#include <doctest.h>

#include <cmath>
#include <random>

#include "geomvd/errors.hpp"
#include "geomvd/pipeline.hpp"
#include "helpers.hpp"

using namespace geomvd;

namespace {

RgbImage checker_image(int size) {
    RgbImage img(size, size);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            double* px = img.at(r, c);
            px[0] = ((r / 8 + c / 8) % 2) ? 0.8 : 0.2;
            px[1] = 0.5 + 0.4 * std::sin(0.17 * r);
            px[2] = 0.5 + 0.4 * std::cos(0.13 * c);
        }
    return img;
}

CameraPose pose_at(double azimuth, double elevation = 0.0) {
    CameraPose p;
    p.azimuth_deg = azimuth;
    p.elevation_deg = elevation;
    p.distance = 2.5;
    return p;
}

SamplerConfig small_config() {
    SamplerConfig cfg;
    cfg.T = 10;
    cfg.latent_size = 40;
    cfg.denoiser.layers = 2;
    cfg.denoiser.channels = 16;
    cfg.denoiser.heads = 2;
    return cfg;
}

bool images_equal(const RgbImage& a, const RgbImage& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("noise schedule: empty product convention and monotone decay") {
    const NoiseSchedule s = make_noise_schedule(50);
    CHECK(s.alpha_bar(0) == 1.0);
    for (int t = 1; t <= 50; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    for (int t = 2; t <= 50; ++t) CHECK(s.beta(t) > s.beta(t - 1));
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(50) == 0.02);
}

TEST_CASE("noise schedule: alpha_bar(1000) lands near 4e-5") {
    const NoiseSchedule s = make_noise_schedule(1000);
    const double ab = s.alpha_bar(1000);
    CHECK(ab > 2e-5);
    CHECK(ab < 8e-5);
}

TEST_CASE("add_noise: step 0 is the identity") {
    FeatureTensor x0(1, 7, 3);
    for (size_t i = 0; i < x0.data.size(); ++i) x0.data[i] = 0.3 * static_cast<double>(i);
    const NoiseSchedule s = make_noise_schedule(10);
    const FeatureTensor out = add_noise(x0, 0, s, 99);
    CHECK(out.data == x0.data);
}

TEST_CASE("add_noise: seeded determinism") {
    const FeatureTensor x0(1, 16, 4, 0.5);
    const NoiseSchedule s = make_noise_schedule(20);
    const FeatureTensor a = add_noise(x0, 13, s, 7);
    const FeatureTensor b = add_noise(x0, 13, s, 7);
    CHECK(a.data == b.data);
    const FeatureTensor c = add_noise(x0, 13, s, 8);
    CHECK(a.data != c.data);
}

TEST_CASE("add_noise: terminal variance matches 1 - alpha_bar(T)") {
    const NoiseSchedule s = make_noise_schedule(1000);
    FeatureTensor x0(1, 3125, 32); // 1e5 zero entries
    const FeatureTensor out = add_noise(x0, 1000, s, 123);

    double mean = 0.0;
    for (double v : out.data) mean += v;
    mean /= static_cast<double>(out.data.size());
    double var = 0.0;
    for (double v : out.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out.data.size());

    const double want = 1.0 - s.alpha_bar(1000);
    CHECK(std::abs(var - want) < 0.03 * want);
}

TEST_CASE("features: constant image yields identical tokens per layer") {
    const RgbImage img(32, 32, 0.25, 0.5, 0.75);
    const auto layers = extract_features(img, 42, 3, 8);
    REQUIRE(layers.size() == 3);
    for (const FeatureTensor& f : layers) {
        CHECK(f.tokens == 16);
        for (int t = 1; t < f.tokens; ++t)
            for (int c = 0; c < f.channels; ++c) CHECK(f.at(0, t, c) == f.at(0, 0, c));
    }
}

TEST_CASE("features: 320x320 input produces 1600 tokens per layer") {
    const RgbImage img(320, 320, 1.0, 1.0, 1.0);
    const auto layers = extract_features(img, 0, 2, 8);
    for (const FeatureTensor& f : layers) CHECK(f.tokens == 1600);
}

TEST_CASE("features: a one-patch difference stays local to its token") {
    RgbImage a = checker_image(32);
    RgbImage b = a;
    b.at(10, 18)[0] += 0.05; // inside patch (1, 2) of the 4x4 grid

    const auto fa = extract_features(a, 5, 2, 8);
    const auto fb = extract_features(b, 5, 2, 8);
    const int changed_token = 1 * 4 + 2;
    for (size_t l = 0; l < fa.size(); ++l)
        for (int t = 0; t < fa[l].tokens; ++t)
            for (int c = 0; c < 8; ++c) {
                if (t == changed_token) continue;
                CHECK(fa[l].at(0, t, c) == fb[l].at(0, t, c));
            }
    CHECK(fa[0].at(0, changed_token, 0) != fb[0].at(0, changed_token, 0));
}

TEST_CASE("features: dimensions not divisible by 8 are rejected") {
    CHECK_THROWS_AS(extract_features(RgbImage(33, 32), 0, 2, 8), ShapeError);
}

TEST_CASE("decode: patch-constant image in range") {
    FeatureTensor latent(1, 25, 16);
    GaussianStream g(3);
    g.fill(latent.data);
    const RgbImage img = decode_latent(latent, 77, 40, 40);
    CHECK(img.width == 40);
    CHECK(img.height == 40);
    for (double v : img.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // Constant within each 8x8 patch.
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            for (int ch = 0; ch < 3; ++ch) CHECK(img.at(r, c)[ch] == img.at(0, 0)[ch]);
}

TEST_CASE("embed: deterministic and sized") {
    const RgbImage img = checker_image(16);
    const auto a = embed_cross_modal("a striped mug", img);
    const auto b = embed_cross_modal("a striped mug", img);
    CHECK(a.size() == 64);
    CHECK(a == b);
}

TEST_CASE("embed: baseline vector is content-defined") {
    // All-zero image statistics vanish, so the baseline is pure text part
    // and independent of the blank image's size.
    const auto base8 = embed_cross_modal("", RgbImage(8, 8));
    const auto base16 = embed_cross_modal("", RgbImage(16, 16));
    CHECK(base8 == base16);

    double norm = 0.0;
    for (double v : base8) norm += v * v;
    CHECK(norm > 0.0); // the text part is a fixed nonzero reference point
}

TEST_CASE("embed: single word swaps change the vector") {
    const RgbImage img(8, 8, 0.5, 0.5, 0.5);
    const std::string base = "the quick brown fox jumps over the lazy dog";
    const auto ref = embed_cross_modal(base, img);

    std::mt19937 rng(71);
    std::uniform_int_distribution<int> word(0, 8), letter(0, 25);
    int changed = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::istringstream in(base);
        std::vector<std::string> words;
        std::string w;
        while (in >> w) words.push_back(w);
        words[word(rng)] = std::string(1, static_cast<char>('a' + letter(rng))) +
                           std::to_string(trial);
        std::string swapped;
        for (size_t i = 0; i < words.size(); ++i) swapped += (i ? " " : "") + words[i];

        const auto got = embed_cross_modal(swapped, img);
        if (got != ref) ++changed;
    }
    CHECK(changed == 1000);
}

TEST_CASE("sampler: bit-identical across runs with the same seed") {
    const RgbImage input = checker_image(64);
    const auto geo = std::vector<RgbImage>{checker_image(64), checker_image(64)};
    const auto poses = std::vector<CameraPose>{pose_at(30.0), pose_at(90.0)};

    const SamplerConfig cfg = small_config();
    const MultiviewSample a = sample_multiview(input, "mug", geo, poses, pose_at(10.0), cfg);
    const MultiviewSample b = sample_multiview(input, "mug", geo, poses, pose_at(10.0), cfg);

    REQUIRE(a.images.size() == 2);
    for (size_t i = 0; i < a.images.size(); ++i) CHECK(images_equal(a.images[i], b.images[i]));
}

TEST_CASE("sampler: lambda trace matches the schedule exactly") {
    const RgbImage input = checker_image(64);
    const SamplerConfig cfg = small_config();
    const MultiviewSample s = sample_multiview(input, "", {checker_image(64)}, {pose_at(30.0)},
                                               pose_at(10.0), cfg);

    const ScheduleParams sp = cfg.schedule_params();
    const auto& lams = s.diagnostics[0].lambda_per_step;
    REQUIRE(lams.size() == static_cast<size_t>(cfg.T));
    for (int i = 0; i < cfg.T; ++i) {
        const int t = cfg.T - i;
        CHECK(lams[i] == lambda_geo(static_cast<double>(t), sp));
    }
}

TEST_CASE("sampler: geometry feature checksums never change within a run") {
    const RgbImage input = checker_image(64);
    const SamplerConfig cfg = small_config();
    const MultiviewSample s = sample_multiview(input, "", {checker_image(64)}, {pose_at(150.0)},
                                               pose_at(10.0), cfg);

    const auto& sums = s.diagnostics[0].geo_checksum_per_step;
    REQUIRE(sums.size() == static_cast<size_t>(cfg.T));
    for (uint64_t c : sums) CHECK(c == sums.front());
}

TEST_CASE("sampler: swapping views permutes the outputs identically") {
    const RgbImage input = checker_image(64);
    RgbImage geo_a = checker_image(64);
    RgbImage geo_b(64, 64, 0.9, 0.1, 0.4);

    const SamplerConfig cfg = small_config();
    const MultiviewSample fwd = sample_multiview(input, "x", {geo_a, geo_b},
                                                 {pose_at(30.0), pose_at(90.0)}, pose_at(10.0), cfg);
    const MultiviewSample rev = sample_multiview(input, "x", {geo_b, geo_a},
                                                 {pose_at(90.0), pose_at(30.0)}, pose_at(10.0), cfg);

    CHECK(images_equal(fwd.images[0], rev.images[1]));
    CHECK(images_equal(fwd.images[1], rev.images[0]));
}

TEST_CASE("sampler: disabled geometry schedule ignores the geometry images") {
    const RgbImage input = checker_image(64);
    RgbImage real_geo = checker_image(64);
    RgbImage scrambled(64, 64);
    GaussianStream g(1234);
    for (double& v : scrambled.data) v = std::abs(std::fmod(g.next(), 1.0));

    SamplerConfig cfg = small_config();
    cfg.lambda_max = 0.0; // geometry branch contributes nothing

    const MultiviewSample a =
        sample_multiview(input, "x", {real_geo}, {pose_at(30.0)}, pose_at(10.0), cfg);
    const MultiviewSample b =
        sample_multiview(input, "x", {scrambled}, {pose_at(30.0)}, pose_at(10.0), cfg);
    CHECK(images_equal(a.images[0], b.images[0]));
}

TEST_CASE("sampler: an annihilated mask makes the output geometry-blind") {
    // The input view sits at azimuth 10, so azimuth 190 is the antipodal
    // orbit position: the clamped cosine mask zeroes the geometry features
    // and the sampled view cannot depend on the geometry image content.
    const RgbImage input = checker_image(64);
    RgbImage geo_a = checker_image(64);
    RgbImage geo_b(64, 64, 0.9, 0.1, 0.4);

    const SamplerConfig cfg = small_config();
    const MultiviewSample a =
        sample_multiview(input, "x", {geo_a}, {pose_at(190.0)}, pose_at(10.0), cfg);
    const MultiviewSample b =
        sample_multiview(input, "x", {geo_b}, {pose_at(190.0)}, pose_at(10.0), cfg);
    CHECK(images_equal(a.images[0], b.images[0]));
    CHECK(a.diagnostics[0].geo_checksum_per_step == b.diagnostics[0].geo_checksum_per_step);
}

TEST_CASE("sampler: mismatched view counts are rejected") {
    const RgbImage input = checker_image(64);
    CHECK_THROWS_AS(sample_multiview(input, "", {checker_image(64)},
                                     {pose_at(30.0), pose_at(90.0)}, pose_at(10.0), small_config()),
                    ValidationError);
}

TEST_CASE("sampler: noised image features track the schedule variance") {
    const NoiseSchedule sched = make_noise_schedule(50);
    const auto feats = extract_features(checker_image(320), 9, 1, 32);
    const FeatureTensor& f0 = feats[0]; // 1600 x 32

    for (int t : {10, 25, 50}) {
        const FeatureTensor noised = add_noise(f0, t, sched, 1000 + t);
        const double ab = sched.alpha_bar(t);
        double var = 0.0;
        for (size_t i = 0; i < f0.data.size(); ++i) {
            const double resid = noised.data[i] - std::sqrt(ab) * f0.data[i];
            var += resid * resid;
        }
        var /= static_cast<double>(f0.data.size());
        const double want = 1.0 - ab;
        CHECK(std::abs(var - want) < 0.05 * want);
    }
}

TEST_CASE("denoiser: finite output and seeded determinism") {
    DenoiserConfig dc;
    dc.layers = 2;
    dc.channels = 8;
    dc.heads = 2;
    const ToyDenoiser d1(dc, 5);
    const ToyDenoiser d2(dc, 5);

    ConditionBundle bundle;
    bundle.cross_modal = embed_cross_modal("t", checker_image(16));
    bundle.image_features.assign(2, FeatureTensor(1, 4, 8, 0.3));
    bundle.geo_features.assign(2, FeatureTensor(1, 4, 8, -0.2));

    FeatureTensor x(1, 4, 8, 0.1);
    const FeatureTensor a = d1.forward(x, bundle, 0.25);
    const FeatureTensor b = d2.forward(x, bundle, 0.25);
    CHECK(a.data == b.data);
    for (double v : a.data) CHECK(std::isfinite(v));
}

} // TEST_SUITE
