#include "geomvd/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "geomvd/errors.hpp"

namespace geomvd {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    return {v[0] / n, v[1] / n, v[2] / n};
}

} // namespace

void CameraPose::validate() const {
    if (!(distance > 0.0)) throw ValidationError("camera distance must be positive");
    if (projection == Projection::perspective && !(fov_deg > 0.0 && fov_deg < 180.0))
        throw ValidationError("perspective fov must lie in (0, 180) degrees");
}

void RenderConfig::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("render dimensions must be positive");
    if (ortho_half_height < 0.0) throw ValidationError("ortho_half_height must be nonnegative");
}

Vec3 ViewTransform::to_camera(const Vec3& p) const {
    const Vec3 d = sub(p, eye);
    return {dot(right, d), dot(up, d), dot(back, d)};
}

Vec3 ViewTransform::rotate_to_camera(const Vec3& v) const {
    return {dot(right, v), dot(up, v), dot(back, v)};
}

Vec3 orbit_eye(const CameraPose& pose) {
    const double az = pose.azimuth_deg * kDegToRad;
    const double el = pose.elevation_deg * kDegToRad;
    const Vec3 dir{std::sin(az) * std::cos(el), std::sin(el), std::cos(az) * std::cos(el)};
    return {pose.target[0] + pose.distance * dir[0], pose.target[1] + pose.distance * dir[1],
            pose.target[2] + pose.distance * dir[2]};
}

ViewTransform camera_from_orbit(const CameraPose& pose) {
    pose.validate();
    ViewTransform vt;
    vt.eye = orbit_eye(pose);

    const Vec3 forward = normalized(sub(pose.target, vt.eye));
    Vec3 up_hint{0.0, 1.0, 0.0};
    Vec3 r = cross(forward, up_hint);
    if (norm(r) < 1e-9) {
        // Looking straight up or down the y axis; fall back to -z as the hint.
        up_hint = {0.0, 0.0, -1.0};
        r = cross(forward, up_hint);
    }
    vt.right = normalized(r);
    vt.up = cross(vt.right, forward);
    vt.back = {-forward[0], -forward[1], -forward[2]};
    vt.perspective = pose.projection == CameraPose::Projection::perspective;
    vt.tan_half_fov = vt.perspective ? std::tan(0.5 * pose.fov_deg * kDegToRad) : 0.0;
    return vt;
}

RgbImage render_geometry_image(const TriangleMesh& mesh, const CameraPose& pose,
                               const RenderConfig& cfg) {
    pose.validate();
    cfg.validate();

    const int W = cfg.width, H = cfg.height;
    RgbImage img(W, H, cfg.background[0], cfg.background[1], cfg.background[2]);
    if (mesh.triangles.empty()) return img;

    const ViewTransform vt = camera_from_orbit(pose);
    const size_t nv = mesh.vertices.size();

    std::vector<Vec3> cam(nv);     // camera-space positions
    std::vector<Vec3> shade(nv);   // normals in the color space
    for (size_t i = 0; i < nv; ++i) {
        cam[i] = vt.to_camera(mesh.vertices[i]);
        shade[i] = cfg.color_space == ColorSpace::camera ? vt.rotate_to_camera(mesh.normals[i])
                                                         : mesh.normals[i];
    }

    const double aspect = static_cast<double>(W) / H;
    double half_h = cfg.ortho_half_height;
    if (!vt.perspective && half_h <= 0.0) {
        double m = 1e-6;
        for (const Vec3& p : cam) m = std::max({m, std::abs(p[1]), std::abs(p[0]) / aspect});
        half_h = 1.05 * m;
    }
    const double half_w = half_h * aspect;

    // Screen coordinates in pixel-center units: pixel (row, col) samples at
    // (x=col, y=row), row 0 at the top.
    std::vector<double> sx(nv), sy(nv), invw(nv);
    std::vector<bool> in_front(nv, true);
    for (size_t i = 0; i < nv; ++i) {
        double ndc_x, ndc_y;
        if (vt.perspective) {
            const double wclip = -cam[i][2];
            if (wclip <= 1e-9) {
                in_front[i] = false;
                invw[i] = 0.0;
                sx[i] = sy[i] = 0.0;
                continue;
            }
            ndc_x = cam[i][0] / (wclip * vt.tan_half_fov * aspect);
            ndc_y = cam[i][1] / (wclip * vt.tan_half_fov);
            invw[i] = 1.0 / wclip;
        } else {
            ndc_x = cam[i][0] / half_w;
            ndc_y = cam[i][1] / half_h;
            invw[i] = 1.0;
        }
        sx[i] = (ndc_x + 1.0) * 0.5 * W - 0.5;
        sy[i] = (1.0 - ndc_y) * 0.5 * H - 0.5;
    }

    std::vector<double> zbuf(static_cast<size_t>(W) * H, std::numeric_limits<double>::infinity());

    for (const auto& tri : mesh.triangles) {
        const int ia = tri[0], ib = tri[1], ic = tri[2];
        if (!in_front[ia] || !in_front[ib] || !in_front[ic]) continue;

        const double ax = sx[ia], ay = sy[ia];
        const double bx = sx[ib], by = sy[ib];
        const double cx = sx[ic], cy = sy[ic];

        // Screen y grows downward, so triangles counter-clockwise as seen by
        // the camera have negative signed area; nonnegative area means a
        // back-facing or degenerate triangle.
        const double area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        if (area2 >= 0.0) continue;

        const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({ax, bx, cx}))));
        const int x1 = std::min(W - 1, static_cast<int>(std::floor(std::max({ax, bx, cx}))));
        const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({ay, by, cy}))));
        const int y1 = std::min(H - 1, static_cast<int>(std::floor(std::max({ay, by, cy}))));
        if (x0 > x1 || y0 > y1) continue;

        // Flat-shading fallback when a vertex normal is degenerate.
        const bool smooth = norm(shade[ia]) > 0.5 && norm(shade[ib]) > 0.5 && norm(shade[ic]) > 0.5;
        Vec3 flat{0.0, 0.0, 1.0};
        if (!smooth) {
            const Vec3 fn = cross(sub(cam[ib], cam[ia]), sub(cam[ic], cam[ia]));
            const double fl = norm(fn);
            if (fl > 0.0) {
                flat = {fn[0] / fl, fn[1] / fl, fn[2] / fl};
                if (cfg.color_space == ColorSpace::world) {
                    // Face normal was built in camera space; map back.
                    flat = {vt.right[0] * flat[0] + vt.up[0] * flat[1] + vt.back[0] * flat[2],
                            vt.right[1] * flat[0] + vt.up[1] * flat[1] + vt.back[1] * flat[2],
                            vt.right[2] * flat[0] + vt.up[2] * flat[1] + vt.back[2] * flat[2]};
                }
            }
        }

        const double da = -cam[ia][2], db = -cam[ib][2], dc = -cam[ic][2]; // camera depths
        for (int py = y0; py <= y1; ++py) {
            for (int px = x0; px <= x1; ++px) {
                const double ea = (cx - bx) * (py - by) - (cy - by) * (px - bx);
                const double eb = (ax - cx) * (py - cy) - (ay - cy) * (px - cx);
                const double ec = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
                double la = ea / area2, lb = eb / area2, lc = ec / area2;
                if (la < 0.0 || lb < 0.0 || lc < 0.0) continue;

                // Perspective-correct interpolation (reduces to affine for
                // orthographic where all invw = 1).
                const double wa = la * invw[ia], wb = lb * invw[ib], wc = lc * invw[ic];
                const double denom = wa + wb + wc;
                if (denom <= 0.0) continue;
                const double depth = (wa * da + wb * db + wc * dc) / denom;

                double& zref = zbuf[static_cast<size_t>(py) * W + px];
                if (!(depth < zref)) continue;
                zref = depth;

                Vec3 n;
                if (smooth) {
                    n = {(wa * shade[ia][0] + wb * shade[ib][0] + wc * shade[ic][0]) / denom,
                         (wa * shade[ia][1] + wb * shade[ib][1] + wc * shade[ic][1]) / denom,
                         (wa * shade[ia][2] + wb * shade[ib][2] + wc * shade[ic][2]) / denom};
                    const double nl = norm(n);
                    if (nl > 1e-12) {
                        n = {n[0] / nl, n[1] / nl, n[2] / nl};
                    } else {
                        n = flat;
                    }
                } else {
                    n = flat;
                }

                double* pix = img.at(py, px);
                for (int ch = 0; ch < 3; ++ch) {
                    const double v = (n[ch] + 1.0) * 0.5;
                    pix[ch] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                }
            }
        }
    }
    return img;
}

const std::vector<double>& default_azimuths() {
    static const std::vector<double> azimuths{30.0, 90.0, 150.0, 210.0, 270.0, 330.0};
    return azimuths;
}

std::vector<CameraPose> orbit_poses(const TriangleMesh& mesh, const std::vector<double>& azimuths,
                                    double elevation_deg) {
    Vec3 lo{0, 0, 0}, hi{0, 0, 0};
    if (!mesh.vertices.empty()) {
        lo = hi = mesh.vertices[0];
        for (const Vec3& v : mesh.vertices)
            for (int k = 0; k < 3; ++k) {
                lo[k] = std::min(lo[k], v[k]);
                hi[k] = std::max(hi[k], v[k]);
            }
    }
    const Vec3 center{(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2};
    const Vec3 half{(hi[0] - lo[0]) / 2, (hi[1] - lo[1]) / 2, (hi[2] - lo[2]) / 2};
    const double radius = std::max(norm(half), 1.0);

    std::vector<CameraPose> poses;
    poses.reserve(azimuths.size());
    for (double az : azimuths) {
        CameraPose p;
        p.azimuth_deg = az;
        p.elevation_deg = elevation_deg;
        p.distance = 2.5 * radius;
        p.target = center;
        poses.push_back(p);
    }
    return poses;
}

std::vector<RgbImage> render_multiview(const TriangleMesh& mesh,
                                       const std::vector<double>& azimuths, double elevation_deg,
                                       const RenderConfig& cfg) {
    if (azimuths.empty()) throw ValidationError("azimuth list must be nonempty");
    std::vector<RgbImage> out;
    out.reserve(azimuths.size());
    for (const CameraPose& pose : orbit_poses(mesh, azimuths, elevation_deg))
        out.push_back(render_geometry_image(mesh, pose, cfg));
    return out;
}

CameraPose frontal_pose_for_grid(int grid_w, int grid_h, double pixel_size, double distance) {
    CameraPose pose;
    pose.azimuth_deg = 0.0;
    pose.elevation_deg = 0.0;
    pose.distance = distance;
    pose.target = {(grid_w - 1) * 0.5 * pixel_size, (grid_h - 1) * 0.5 * pixel_size, 0.0};
    return pose;
}

RenderConfig config_for_grid(int grid_w, int grid_h, double pixel_size) {
    RenderConfig cfg;
    cfg.width = grid_w;
    cfg.height = grid_h;
    cfg.ortho_half_height = grid_h * 0.5 * pixel_size;
    return cfg;
}

} // namespace geomvd
