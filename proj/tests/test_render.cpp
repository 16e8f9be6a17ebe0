#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "geomvd/errors.hpp"
#include "geomvd/integrate.hpp"
#include "geomvd/render.hpp"
#include "helpers.hpp"

using namespace geomvd;

namespace {

constexpr double kPi = std::numbers::pi;

// Large triangle parallel to the image plane at world z = depth, normals
// toward a frontal camera.
TriangleMesh frontal_triangle(double depth, const Vec3& normal, double extent = 10.0) {
    TriangleMesh m;
    m.vertices = {{-extent, -extent, depth}, {extent, -extent, depth}, {0.0, extent, depth}};
    m.normals = {normal, normal, normal};
    m.triangles = {{0, 1, 2}};
    return m;
}

CameraPose frontal_camera(double half_extent) {
    CameraPose pose;
    pose.distance = 100.0;
    pose.target = {0.0, 0.0, 0.0};
    (void)half_extent;
    return pose;
}

/// Axisymmetric test surface: a unit sphere tessellated with the vertex set
/// closed under x -> -x, vertex normals exactly radial.
TriangleMesh revolution_sphere(int rings = 16, int segments = 32) {
    TriangleMesh m;
    for (int i = 0; i <= rings; ++i) {
        const double phi = kPi * i / rings; // 0 = north pole (+y)
        for (int j = 0; j < segments; ++j) {
            const double theta = 2.0 * kPi * j / segments;
            const Vec3 p{std::sin(phi) * std::sin(theta), std::cos(phi),
                         std::sin(phi) * std::cos(theta)};
            m.vertices.push_back(p);
            m.normals.push_back(p);
        }
    }
    auto vid = [&](int i, int j) { return i * segments + (j % segments); };
    for (int i = 0; i < rings; ++i)
        for (int j = 0; j < segments; ++j) {
            m.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            m.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    return m;
}

} // namespace

TEST_SUITE("render") {

TEST_CASE("orbit: azimuth 0 elevation 0 sits on the target +z axis") {
    CameraPose pose;
    pose.distance = 3.0;
    pose.target = {1.0, 2.0, 3.0};
    const ViewTransform vt = camera_from_orbit(pose);

    CHECK(vt.eye[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(vt.eye[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(vt.eye[2] == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(vt.back[2] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(vt.right[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(vt.up[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("orbit: azimuth 180 mirrors the eye through the target in x and z") {
    CameraPose a, b;
    a.distance = b.distance = 2.0;
    a.azimuth_deg = 0.0;
    b.azimuth_deg = 180.0;
    const Vec3 ea = orbit_eye(a), eb = orbit_eye(b);
    CHECK(std::abs(eb[0] + ea[0]) < 1e-12);
    CHECK(std::abs(eb[1] - ea[1]) < 1e-12);
    CHECK(std::abs(eb[2] + ea[2]) < 1e-12);
}

TEST_CASE("orbit: spherical formula at azimuth 30 elevation 10") {
    CameraPose pose;
    pose.azimuth_deg = 30.0;
    pose.elevation_deg = 10.0;
    pose.distance = 5.0;
    const Vec3 eye = orbit_eye(pose);

    const double az = 30.0 * kPi / 180.0, el = 10.0 * kPi / 180.0;
    CHECK(std::abs(eye[0] - 5.0 * std::sin(az) * std::cos(el)) < 1e-12);
    CHECK(std::abs(eye[1] - 5.0 * std::sin(el)) < 1e-12);
    CHECK(std::abs(eye[2] - 5.0 * std::cos(az) * std::cos(el)) < 1e-12);
}

TEST_CASE("render: empty mesh is uniform background") {
    RenderConfig cfg;
    cfg.width = cfg.height = 8;
    const RgbImage img = render_geometry_image(TriangleMesh{}, CameraPose{}, cfg);
    for (size_t i = 0; i < img.data.size(); i += 3) {
        CHECK(img.data[i] == 1.0);
        CHECK(img.data[i + 1] == 1.0);
        CHECK(img.data[i + 2] == 1.0);
    }
}

TEST_CASE("render: front-facing triangle colors pixels exactly (0.5, 0.5, 1)") {
    const TriangleMesh m = frontal_triangle(0.0, {0.0, 0.0, 1.0});
    CameraPose pose = frontal_camera(10.0);
    RenderConfig cfg;
    cfg.width = cfg.height = 64;
    cfg.ortho_half_height = 12.0;

    const RgbImage img = render_geometry_image(m, pose, cfg);
    int covered = 0;
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) {
            const double* px = img.at(r, c);
            if (px[0] == 1.0 && px[1] == 1.0 && px[2] == 1.0) continue; // background
            ++covered;
            CHECK(px[0] == 0.5);
            CHECK(px[1] == 0.5);
            CHECK(px[2] == 1.0);
        }
    CHECK(covered > 500);
}

TEST_CASE("render: nearer of two overlapping triangles wins") {
    // Far triangle tilted in color only: distinguishable normals.
    TriangleMesh m = frontal_triangle(2.0, {0.0, 0.0, 1.0}, 5.0);
    const TriangleMesh far = frontal_triangle(1.0, {0.6, 0.0, 0.8}, 5.0);
    m.vertices.insert(m.vertices.end(), far.vertices.begin(), far.vertices.end());
    m.normals.insert(m.normals.end(), far.normals.begin(), far.normals.end());
    m.triangles.push_back({3, 4, 5});

    CameraPose pose = frontal_camera(5.0);
    RenderConfig cfg;
    cfg.width = cfg.height = 32;
    cfg.ortho_half_height = 6.0;
    const RgbImage img = render_geometry_image(m, pose, cfg);

    // The overlap around the centroid region must show the near color.
    const double* px = img.at(20, 16);
    CHECK(px[0] == 0.5);
    CHECK(px[1] == 0.5);
    CHECK(px[2] == 1.0);
}

TEST_CASE("render: z-buffer matches the per-pixel oracle on random pairs") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> pos(-4.0, 4.0);
    std::uniform_real_distribution<double> depth(1.0, 9.0);

    const int N = 32;
    RenderConfig cfg;
    cfg.width = cfg.height = N;
    cfg.ortho_half_height = 5.0;
    CameraPose pose = frontal_camera(5.0);
    pose.distance = 50.0;

    for (int trial = 0; trial < 50; ++trial) {
        // Two front-parallel triangles at constant depths with distinct
        // normal colors; constant depth keeps the oracle exact.
        TriangleMesh m;
        double zs[2] = {depth(rng), depth(rng)};
        if (std::abs(zs[0] - zs[1]) < 1e-3) zs[1] += 0.5;
        const Vec3 normals[2] = {{0.0, 0.0, 1.0}, {0.6, 0.0, 0.8}};
        for (int k = 0; k < 2; ++k) {
            // Ensure counter-clockwise orientation seen from +z.
            Vec3 a{pos(rng), pos(rng), zs[k]}, b{pos(rng), pos(rng), zs[k]},
                c{pos(rng), pos(rng), zs[k]};
            const double area2 =
                (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if (std::abs(area2) < 1.0) continue; // skip slivers
            if (area2 < 0.0) std::swap(b, c);
            const int base = static_cast<int>(m.vertices.size());
            m.vertices.insert(m.vertices.end(), {a, b, c});
            m.normals.insert(m.normals.end(), 3, normals[k]);
            m.triangles.push_back({base, base + 1, base + 2});
        }
        if (m.triangles.size() != 2) continue;

        const RgbImage img = render_geometry_image(m, pose, cfg);

        // Oracle: project vertices with the same frontal ortho mapping and
        // test pixel centers with a safety margin; nearer depth must win.
        auto screen = [&](const Vec3& v) {
            const double ndc_x = v[0] / cfg.ortho_half_height;
            const double ndc_y = v[1] / cfg.ortho_half_height;
            return std::pair{(ndc_x + 1.0) * 0.5 * N - 0.5, (1.0 - ndc_y) * 0.5 * N - 0.5};
        };
        for (int py = 0; py < N; ++py)
            for (int px_i = 0; px_i < N; ++px_i) {
                double best_depth = 0.0;
                const Vec3* best_normal = nullptr;
                bool ambiguous = false;
                for (size_t k = 0; k < m.triangles.size(); ++k) {
                    const auto& t = m.triangles[k];
                    const auto [ax, ay] = screen(m.vertices[t[0]]);
                    const auto [bx, by] = screen(m.vertices[t[1]]);
                    const auto [cx, cy] = screen(m.vertices[t[2]]);
                    const double area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
                    const double ea = (cx - bx) * (py - by) - (cy - by) * (px_i - bx);
                    const double eb = (ax - cx) * (py - cy) - (ay - cy) * (px_i - cx);
                    const double ec = (bx - ax) * (py - ay) - (by - ay) * (px_i - ax);
                    const double la = ea / area2, lb = eb / area2, lc = ec / area2;
                    const double margin = 1e-6;
                    if (la < margin || lb < margin || lc < margin) {
                        if (la > -margin && lb > -margin && lc > -margin) ambiguous = true;
                        continue;
                    }
                    const double d = pose.distance - m.vertices[t[0]][2];
                    if (best_normal == nullptr || d < best_depth) {
                        best_depth = d;
                        best_normal = &m.normals[t[0]];
                    }
                }
                if (ambiguous || best_normal == nullptr) continue;
                const double* got = img.at(py, px_i);
                for (int ch = 0; ch < 3; ++ch)
                    CHECK(got[ch] == doctest::Approx(((*best_normal)[ch] + 1.0) * 0.5).epsilon(1e-9));
            }
    }
}

TEST_CASE("render: default multiview emits six 320x320 images") {
    const auto f = testutil::hemisphere_fixture(24, 9.0);
    const TriangleMesh m = heightfield_to_mesh(f.analytic, f.mask);

    const std::vector<RgbImage> views = render_multiview(m);
    REQUIRE(views.size() == 6);
    for (const RgbImage& img : views) {
        CHECK(img.width == 320);
        CHECK(img.height == 320);
        for (double v : img.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("render: single-azimuth multiview equals a direct render") {
    const auto f = testutil::hemisphere_fixture(24, 9.0);
    const TriangleMesh m = heightfield_to_mesh(f.analytic, f.mask);

    RenderConfig cfg;
    cfg.width = cfg.height = 96;
    const std::vector<RgbImage> views = render_multiview(m, {0.0}, 0.0, cfg);
    REQUIRE(views.size() == 1);

    const CameraPose pose = orbit_poses(m, {0.0}, 0.0)[0];
    const RgbImage direct = render_geometry_image(m, pose, cfg);
    CHECK(views[0].data == direct.data);
}

TEST_CASE("render: mirrored azimuths produce mirrored images") {
    const TriangleMesh sphere = revolution_sphere();
    RenderConfig cfg;
    cfg.width = cfg.height = 128;

    auto is_bg = [](const double* px) { return px[0] == 1.0 && px[1] == 1.0 && px[2] == 1.0; };

    for (double az : {30.0, 150.0}) {
        const std::vector<RgbImage> pair = render_multiview(sphere, {az, 360.0 - az}, 0.0, cfg);
        const RgbImage& a = pair[0];
        const RgbImage& b = pair[1];

        double mean_diff = 0.0;
        int mismatched = 0;
        for (int r = 0; r < 128; ++r)
            for (int c = 0; c < 128; ++c) {
                const double* pa = a.at(r, c);
                const double* pb = b.at(r, 127 - c); // horizontal flip
                double d;
                if (is_bg(pa) || is_bg(pb)) {
                    d = is_bg(pa) == is_bg(pb) ? 0.0 : 1.0;
                } else {
                    // Mirroring negates the camera-space nx, flipping the
                    // red channel of the normal color.
                    d = std::abs(pa[0] - (1.0 - pb[0])) + std::abs(pa[1] - pb[1]) +
                        std::abs(pa[2] - pb[2]);
                }
                mean_diff += d;
                if (d > 0.05) ++mismatched;
            }
        mean_diff /= 128.0 * 128.0;
        CHECK(mean_diff < 0.01);
        CHECK(mismatched < 128 * 128 / 100); // under 1% of pixels
    }
}

TEST_CASE("render: integrate-mesh-render loop reproduces the normal colors") {
    const int size = 64;
    const double R = 24.0;
    const auto f = testutil::hemisphere_fixture(size, R);
    const DepthMap z = integrate_normals(f.normals, f.mask, {});
    const TriangleMesh mesh = heightfield_to_mesh(z, f.mask);

    const CameraPose pose = frontal_pose_for_grid(size, size, 1.0, 1000.0);
    const RenderConfig cfg = config_for_grid(size, size, 1.0);
    const RgbImage img = render_geometry_image(mesh, pose, cfg);

    double mae = 0.0;
    int count = 0;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            if (!f.mask.at(r, c)) continue;
            const double* n = f.normals.at(r, c);
            if (n[2] < 0.2) continue;
            const double* px = img.at(r, c);
            for (int ch = 0; ch < 3; ++ch) mae += std::abs(px[ch] - (n[ch] + 1.0) * 0.5);
            count += 3;
        }
    REQUIRE(count > 0);
    CHECK(mae / count < 0.05);
}

TEST_CASE("render: perspective projection keeps nearer objects larger") {
    TriangleMesh m = frontal_triangle(0.0, {0.0, 0.0, 1.0}, 2.0);
    CameraPose pose;
    pose.distance = 10.0;
    pose.projection = CameraPose::Projection::perspective;
    pose.fov_deg = 45.0;
    RenderConfig cfg;
    cfg.width = cfg.height = 64;

    const RgbImage near_img = render_geometry_image(m, pose, cfg);
    pose.distance = 20.0;
    const RgbImage far_img = render_geometry_image(m, pose, cfg);

    auto coverage = [](const RgbImage& img) {
        int n = 0;
        for (size_t i = 0; i < img.data.size(); i += 3)
            if (img.data[i] != 1.0 || img.data[i + 1] != 1.0 || img.data[i + 2] != 1.0) ++n;
        return n;
    };
    CHECK(coverage(near_img) > coverage(far_img));
    CHECK(coverage(far_img) > 0);
}

TEST_CASE("render: invalid poses and configs are rejected") {
    CameraPose pose;
    pose.distance = 0.0;
    CHECK_THROWS_AS(camera_from_orbit(pose), ValidationError);

    pose.distance = 1.0;
    pose.projection = CameraPose::Projection::perspective;
    pose.fov_deg = 200.0;
    CHECK_THROWS_AS(camera_from_orbit(pose), ValidationError);

    RenderConfig cfg;
    cfg.width = 0;
    CHECK_THROWS_AS(render_geometry_image(TriangleMesh{}, CameraPose{}, cfg), ValidationError);

    CHECK_THROWS_AS(render_multiview(TriangleMesh{}, {}, 0.0, RenderConfig{}), ValidationError);
}

} // TEST_SUITE
