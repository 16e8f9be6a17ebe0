#pragma once

#include <vector>

#include "geomvd/image.hpp"
#include "geomvd/surface.hpp"

namespace geomvd {

/// Orbit camera: positioned at a spherical offset from `target`, looking at
/// it, with world up = +y. Azimuth 0 / elevation 0 puts the camera on the
/// target's +z axis viewing -z; azimuth rotates toward +x first.
struct CameraPose {
    enum class Projection { orthographic, perspective };

    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
    double distance = 1.0;
    Projection projection = Projection::orthographic;
    double fov_deg = 50.0; // perspective only
    Vec3 target{0.0, 0.0, 0.0};

    void validate() const;
};

enum class ColorSpace { camera, world };

struct RenderConfig {
    int width = 320;
    int height = 320;
    double background[3] = {1.0, 1.0, 1.0}; // white
    ColorSpace color_space = ColorSpace::camera;
    /// Half of the vertical view extent in scene units for orthographic
    /// projection; 0 auto-fits the mesh with a 5% margin.
    double ortho_half_height = 0.0;

    void validate() const;
};

/// World -> camera frame plus projection parameters.
struct ViewTransform {
    Vec3 eye{0, 0, 0};
    Vec3 right{1, 0, 0};
    Vec3 up{0, 1, 0};
    Vec3 back{0, 0, 1}; // camera looks along -back
    bool perspective = false;
    double tan_half_fov = 0.0;

    Vec3 to_camera(const Vec3& p) const;
    Vec3 rotate_to_camera(const Vec3& v) const;
};

ViewTransform camera_from_orbit(const CameraPose& pose);

/// Camera position in world coordinates for an orbit pose.
Vec3 orbit_eye(const CameraPose& pose);

/// Z-buffered rasterization of the mesh colored by (n + 1) / 2, where n is
/// the interpolated unit vertex normal expressed in the configured color
/// space. Uncovered pixels take the background color; back-facing triangles
/// are culled.
RgbImage render_geometry_image(const TriangleMesh& mesh, const CameraPose& pose,
                               const RenderConfig& cfg);

/// The six target azimuths used by the multi-view renders.
const std::vector<double>& default_azimuths();

/// Orbit poses around the mesh bounding-box center at the given azimuths.
std::vector<CameraPose> orbit_poses(const TriangleMesh& mesh, const std::vector<double>& azimuths,
                                    double elevation_deg);

/// One geometry image per azimuth at a shared elevation.
std::vector<RgbImage> render_multiview(const TriangleMesh& mesh,
                                       const std::vector<double>& azimuths = default_azimuths(),
                                       double elevation_deg = 0.0,
                                       const RenderConfig& cfg = RenderConfig{});

/// Frontal pose/framing under which heightfield pixel (row, col) of a
/// w x h grid lands exactly on image pixel (row, col) of a w x h render.
CameraPose frontal_pose_for_grid(int grid_w, int grid_h, double pixel_size, double distance);
RenderConfig config_for_grid(int grid_w, int grid_h, double pixel_size);

} // namespace geomvd
