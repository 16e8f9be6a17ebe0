#pragma once

#include <cstdint>
#include <vector>

namespace geomvd {

// Raster grids use (row, col) indexing with row 0 at the top of the image.
// Payloads are stored row-major.

/// Per-pixel unit normals in camera space: +x right, +y up, +z toward the
/// viewer, so surfaces facing the input camera have nz > 0. Background
/// pixels may carry zero vectors or NaN; foreground normals are unit-length
/// after load-time renormalization.
struct NormalMap {
    int width = 0;
    int height = 0;
    std::vector<double> data; // 3 per pixel: nx, ny, nz

    NormalMap() = default;
    NormalMap(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0.0) {}

    double* at(int row, int col) { return &data[(static_cast<size_t>(row) * width + col) * 3]; }
    const double* at(int row, int col) const {
        return &data[(static_cast<size_t>(row) * width + col) * 3];
    }
};

/// Scalar depth per pixel in scene units. Background pixels carry NaN.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    DepthMap() = default;
    DepthMap(int w, int h, double fill) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    double& at(int row, int col) { return data[static_cast<size_t>(row) * width + col]; }
    double at(int row, int col) const { return data[static_cast<size_t>(row) * width + col]; }
};

struct ForegroundMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;

    ForegroundMask() = default;
    ForegroundMask(int w, int h, bool fill = false)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill ? 1 : 0) {}

    bool at(int row, int col) const { return data[static_cast<size_t>(row) * width + col] != 0; }
    void set(int row, int col, bool v) { data[static_cast<size_t>(row) * width + col] = v ? 1 : 0; }

    int count_foreground() const {
        int n = 0;
        for (uint8_t v : data) n += (v != 0);
        return n;
    }
};

/// RGB raster with channel values in [0, 1].
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<double> data; // 3 per pixel

    RgbImage() = default;
    RgbImage(int w, int h, double r = 0.0, double g = 0.0, double b = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h * 3) {
        for (size_t i = 0; i < data.size(); i += 3) {
            data[i] = r;
            data[i + 1] = g;
            data[i + 2] = b;
        }
    }

    double* at(int row, int col) { return &data[(static_cast<size_t>(row) * width + col) * 3]; }
    const double* at(int row, int col) const {
        return &data[(static_cast<size_t>(row) * width + col) * 3];
    }
};

} // namespace geomvd
