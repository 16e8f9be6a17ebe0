#include "geomvd/surface.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "geomvd/errors.hpp"

namespace geomvd {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// Cross product of two triangle edges: direction is the face normal, length
// twice the face area.
Vec3 area_normal(const TriangleMesh& m, const std::array<int, 3>& tri) {
    const Vec3 e1 = sub(m.vertices[tri[1]], m.vertices[tri[0]]);
    const Vec3 e2 = sub(m.vertices[tri[2]], m.vertices[tri[0]]);
    return cross(e1, e2);
}

} // namespace

void TriangleMesh::validate() const {
    if (normals.size() != vertices.size())
        throw ValidationError("mesh must carry one normal per vertex");
    const int n = static_cast<int>(vertices.size());
    for (const auto& t : triangles) {
        for (int i : t)
            if (i < 0 || i >= n) throw ValidationError("triangle index out of range");
        if (norm(area_normal(*this, t)) == 0.0)
            throw ValidationError("degenerate (zero-area) triangle");
    }
    for (const Vec3& vn : normals) {
        if (std::abs(norm(vn) - 1.0) > 1e-6)
            throw ValidationError("vertex normal is not unit length");
    }
}

TriangleMesh heightfield_to_mesh(const DepthMap& z, const ForegroundMask& mask, double pixel_size) {
    if (z.width != mask.width || z.height != mask.height)
        throw ShapeError("depth map and mask dimensions differ");
    if (pixel_size <= 0.0) throw ValidationError("pixel_size must be positive");

    const int w = mask.width, h = mask.height;
    std::vector<int> vid(static_cast<size_t>(w) * h, -1);

    TriangleMesh mesh;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask.at(r, c)) continue;
            const double depth = z.at(r, c);
            if (!std::isfinite(depth)) throw ValidationError("non-finite depth on foreground pixel");
            vid[static_cast<size_t>(r) * w + c] = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back({c * pixel_size, (h - 1 - r) * pixel_size, depth});
        }
    }

    auto id = [&](int r, int c) { return vid[static_cast<size_t>(r) * w + c]; };

    for (int r = 0; r + 1 < h; ++r) {
        for (int c = 0; c + 1 < w; ++c) {
            const int a = id(r, c), b = id(r, c + 1);
            const int d = id(r + 1, c), e = id(r + 1, c + 1); // d below a, e below b
            if (a < 0 || b < 0 || d < 0 || e < 0) continue;

            const double jump_ae = std::abs(mesh.vertices[a][2] - mesh.vertices[e][2]);
            const double jump_bd = std::abs(mesh.vertices[b][2] - mesh.vertices[d][2]);
            if (jump_ae <= jump_bd) {
                mesh.triangles.push_back({a, d, e});
                mesh.triangles.push_back({a, e, b});
            } else {
                mesh.triangles.push_back({a, d, b});
                mesh.triangles.push_back({b, d, e});
            }
        }
    }

    // Area-weighted vertex normals.
    mesh.normals.assign(mesh.vertices.size(), {0.0, 0.0, 0.0});
    std::vector<std::array<int, 3>> kept;
    kept.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        const Vec3 an = area_normal(mesh, t);
        if (norm(an) == 0.0) continue; // drop degenerate triangles
        kept.push_back(t);
        for (int i : t) {
            mesh.normals[i][0] += an[0];
            mesh.normals[i][1] += an[1];
            mesh.normals[i][2] += an[2];
        }
    }
    mesh.triangles = std::move(kept);

    for (Vec3& vn : mesh.normals) {
        const double len = norm(vn);
        if (len > 0.0) {
            vn = {vn[0] / len, vn[1] / len, vn[2] / len};
        } else {
            vn = {0.0, 0.0, 1.0}; // isolated vertex
        }
    }
    return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write OBJ file: " + path);
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> guard(f, &std::fclose);

    for (const Vec3& v : mesh.vertices)
        std::fprintf(f, "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
    for (const Vec3& n : mesh.normals)
        std::fprintf(f, "vn %.9g %.9g %.9g\n", n[0], n[1], n[2]);
    for (const auto& t : mesh.triangles)
        std::fprintf(f, "f %d//%d %d//%d %d//%d\n", t[0] + 1, t[0] + 1, t[1] + 1, t[1] + 1,
                     t[2] + 1, t[2] + 1);
}

TriangleMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open OBJ file: " + path);

    TriangleMesh mesh;
    std::vector<Vec3> file_normals;
    std::vector<int> vertex_normal; // vertex -> index into file_normals, -1 unknown
    std::string line;

    auto parse_face_ref = [&](const std::string& tok, int& v, int& vn) {
        v = 0;
        vn = 0;
        const size_t s1 = tok.find('/');
        v = std::stoi(tok.substr(0, s1));
        if (s1 != std::string::npos) {
            const size_t s2 = tok.find('/', s1 + 1);
            if (s2 != std::string::npos && s2 + 1 < tok.size()) vn = std::stoi(tok.substr(s2 + 1));
        }
        if (v < 0) v = static_cast<int>(mesh.vertices.size()) + v + 1;
        if (vn < 0) vn = static_cast<int>(file_normals.size()) + vn + 1;
    };

    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag.empty() || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v[0] >> v[1] >> v[2])) throw FormatError("malformed vertex in " + path);
            mesh.vertices.push_back(v);
            vertex_normal.push_back(-1);
        } else if (tag == "vn") {
            Vec3 n;
            if (!(ls >> n[0] >> n[1] >> n[2])) throw FormatError("malformed normal in " + path);
            file_normals.push_back(n);
        } else if (tag == "f") {
            std::vector<std::pair<int, int>> refs;
            std::string tok;
            while (ls >> tok) {
                int v, vn;
                parse_face_ref(tok, v, vn);
                if (v < 1 || v > static_cast<int>(mesh.vertices.size()))
                    throw FormatError("face vertex index out of range in " + path);
                if (vn > static_cast<int>(file_normals.size()))
                    throw FormatError("face normal index out of range in " + path);
                refs.emplace_back(v - 1, vn - 1);
            }
            if (refs.size() < 3) throw FormatError("face with fewer than 3 vertices in " + path);
            for (size_t k = 1; k + 1 < refs.size(); ++k) {
                mesh.triangles.push_back({refs[0].first, refs[k].first, refs[k + 1].first});
            }
            for (const auto& [v, vn] : refs)
                if (vn >= 0) vertex_normal[v] = vn;
        }
        // Other records (o, g, s, usemtl, vt, ...) are ignored.
    }

    mesh.normals.assign(mesh.vertices.size(), {0.0, 0.0, 0.0});
    bool all_assigned = !mesh.vertices.empty();
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        if (vertex_normal[i] >= 0) {
            mesh.normals[i] = file_normals[vertex_normal[i]];
        } else {
            all_assigned = false;
        }
    }
    if (!all_assigned) {
        // Recompute area-weighted normals for vertices the file left bare.
        std::vector<Vec3> acc(mesh.vertices.size(), {0.0, 0.0, 0.0});
        for (const auto& t : mesh.triangles) {
            const Vec3 an = area_normal(mesh, t);
            for (int i : t) {
                acc[i][0] += an[0];
                acc[i][1] += an[1];
                acc[i][2] += an[2];
            }
        }
        for (size_t i = 0; i < mesh.vertices.size(); ++i)
            if (vertex_normal[i] < 0) mesh.normals[i] = acc[i];
    }
    for (Vec3& n : mesh.normals) {
        const double len = norm(n);
        n = len > 0.0 ? Vec3{n[0] / len, n[1] / len, n[2] / len} : Vec3{0.0, 0.0, 1.0};
    }
    return mesh;
}

} // namespace geomvd
