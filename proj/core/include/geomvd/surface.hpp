#pragma once

#include <array>
#include <string>
#include <vector>

#include "geomvd/image.hpp"

namespace geomvd {

using Vec3 = std::array<double, 3>;

/// Triangle mesh of the integrated proxy surface. Triangles are wound
/// counter-clockwise when seen from the +z (front) side; vertex normals are
/// unit-length.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;                 // one per vertex
    std::vector<std::array<int, 3>> triangles; // index triples into vertices

    /// Throws ValidationError on out-of-range indices, non-unit normals or
    /// degenerate (zero-area) triangles.
    void validate() const;
};

/// One vertex per foreground pixel at (col * pixel_size, (height-1-row) *
/// pixel_size, z), so world +y points up while image rows grow downward.
/// Every 2x2 quad of foreground pixels becomes two triangles, split along
/// the diagonal with the smaller depth jump. Vertex normals are the
/// area-weighted average of incident face normals; vertices without any
/// incident face default to (0,0,1).
TriangleMesh heightfield_to_mesh(const DepthMap& z, const ForegroundMask& mask,
                                 double pixel_size = 1.0);

/// Wavefront OBJ with `v`, `vn` and `f v//vn` records, 1-based indices,
/// 9 significant digits.
void save_obj(const TriangleMesh& mesh, const std::string& path);

/// Parses `v`/`vn`/`f` records ("v", "v//vn" and "v/vt/vn" face forms;
/// polygons are fan-triangulated). Missing normals are recomputed from
/// faces. Normals are renormalized on load.
TriangleMesh load_obj(const std::string& path);

} // namespace geomvd
