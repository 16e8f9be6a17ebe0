#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "geomvd/attention.hpp"
#include "geomvd/integrate.hpp"
#include "geomvd/pipeline.hpp"
#include "geomvd/render.hpp"
#include "geomvd/schedule.hpp"
#include "geomvd/surface.hpp"

using namespace geomvd;

namespace {

struct Fixture {
    NormalMap normals;
    ForegroundMask mask;
};

Fixture hemisphere(int size, double R) {
    Fixture f{NormalMap(size, size), ForegroundMask(size, size)};
    const double cx = (size - 1) / 2.0;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const double x = c - cx, y = cx - r;
            const double r2 = x * x + y * y;
            if (r2 > R * R - 1e-9) continue;
            const double z = std::sqrt(R * R - r2);
            f.mask.set(r, c, true);
            double* n = f.normals.at(r, c);
            n[0] = x / R;
            n[1] = y / R;
            n[2] = z / R;
        }
    return f;
}

TriangleMesh dome_mesh(int size, double R) {
    const Fixture f = hemisphere(size, R);
    const DepthMap z = integrate_normals(f.normals, f.mask, {});
    return heightfield_to_mesh(z, f.mask);
}

} // namespace

static void BM_IntegrateNormals(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Fixture f = hemisphere(size, size * 0.42);
    for (auto _ : state) {
        DepthMap z = integrate_normals(f.normals, f.mask, {});
        benchmark::DoNotOptimize(z.data.data());
    }
    state.SetItemsProcessed(state.iterations() * f.mask.count_foreground());
}
BENCHMARK(BM_IntegrateNormals)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_HeightfieldToMesh(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Fixture f = hemisphere(size, size * 0.42);
    const DepthMap z = integrate_normals(f.normals, f.mask, {});
    for (auto _ : state) {
        TriangleMesh m = heightfield_to_mesh(z, f.mask);
        benchmark::DoNotOptimize(m.vertices.data());
    }
}
BENCHMARK(BM_HeightfieldToMesh)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_RenderGeometryImage(benchmark::State& state) {
    const TriangleMesh mesh = dome_mesh(96, 40.0);
    const CameraPose pose = orbit_poses(mesh, {30.0}, 0.0)[0];
    RenderConfig cfg;
    cfg.width = cfg.height = static_cast<int>(state.range(0));
    for (auto _ : state) {
        RgbImage img = render_geometry_image(mesh, pose, cfg);
        benchmark::DoNotOptimize(img.data.data());
    }
}
BENCHMARK(BM_RenderGeometryImage)->Arg(128)->Arg(320)->Unit(benchmark::kMillisecond);

static void BM_FusedAttention(benchmark::State& state) {
    std::mt19937 rng(1);
    std::normal_distribution<double> dist(0.0, 1.0);
    const int channels = 32, heads = 4;
    const int geo_tokens = static_cast<int>(state.range(0));

    SelfAttentionWeights w;
    w.q = Matrix(channels, channels);
    w.k = Matrix(channels, channels);
    w.v = Matrix(channels, channels);
    w.o = Matrix(channels, channels);
    for (Matrix* m : {&w.q, &w.k, &w.v, &w.o})
        for (double& v : m->data) v = dist(rng) / std::sqrt(channels);
    const AttentionParams p = init_geo_from_self(w, heads);

    FeatureTensor f_unet(1, 25, channels), f_img(1, geo_tokens, channels),
        f_geo(1, geo_tokens, channels);
    for (FeatureTensor* f : {&f_unet, &f_img, &f_geo})
        for (double& v : f->data) v = dist(rng);

    for (auto _ : state) {
        GeoAttentionOutput out = fused_attention(f_unet, f_img, f_geo, p, 0.3);
        benchmark::DoNotOptimize(out.fused.data.data());
    }
}
BENCHMARK(BM_FusedAttention)->Arg(64)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

static void BM_LambdaSchedule(benchmark::State& state) {
    ScheduleParams p;
    for (auto _ : state) {
        double acc = 0.0;
        for (int t = 0; t <= p.total_steps_T; ++t) acc += lambda_geo(t, p);
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(BM_LambdaSchedule);

static void BM_SampleMultiviewStep(benchmark::State& state) {
    // One view, small latent: measures the per-step denoiser cost.
    RgbImage input(64, 64, 0.5, 0.5, 0.5);
    RgbImage geo(320, 320, 0.4, 0.6, 0.8);
    CameraPose pose;
    pose.azimuth_deg = 30.0;
    pose.distance = 2.5;
    CameraPose input_pose = pose;
    input_pose.azimuth_deg = 10.0;

    SamplerConfig cfg;
    cfg.T = 2;
    cfg.latent_size = 40;
    for (auto _ : state) {
        MultiviewSample s = sample_multiview(input, "bench", {geo}, {pose}, input_pose, cfg);
        benchmark::DoNotOptimize(s.images.data());
    }
}
BENCHMARK(BM_SampleMultiviewStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
