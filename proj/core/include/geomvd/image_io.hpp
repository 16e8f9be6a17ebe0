#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geomvd/image.hpp"

namespace geomvd {

// PFM carries float32 payloads. Header: "PF" (3-channel) or "Pf" (1-channel),
// then "<width> <height>", then a scale whose sign encodes endianness
// (negative = little-endian). Rows are stored bottom-up in the file and
// normalized to top-down on load. Doubles are converted to float32 on save,
// so a save/load round trip is bit-exact for float32-representable values.

/// Raw PFM payload, rows already normalized to top-down.
struct PfmImage {
    int width = 0;
    int height = 0;
    int channels = 0; // 1 or 3
    std::vector<float> data;
};

PfmImage load_pfm(const std::string& path);
void save_pfm(const PfmImage& img, const std::string& path);

/// Loads a 3-channel PFM as a normal map. Finite nonzero vectors are
/// renormalized to unit length; all-NaN or all-zero pixels pass through as
/// background sentinels. A pixel mixing finite and non-finite components is
/// a validation error.
NormalMap load_pfm_normals(const std::string& path);

/// Loads a 1-channel PFM as a depth map (NaN = background).
DepthMap load_pfm_depth(const std::string& path);

void save_pfm_normals(const NormalMap& n, const std::string& path);
void save_pfm_depth(const DepthMap& z, const std::string& path);

// ---- PNG ----------------------------------------------------------------

/// Decoded 8-bit PNG. channels: 1=gray, 2=gray+alpha, 3=rgb, 4=rgba.
/// Palette and sub-8-bit images are expanded, 16-bit is stripped to 8.
struct Png8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> data;
};

Png8 load_png(const std::string& path);
void save_png(const Png8& img, const std::string& path);

/// Writes an 8-bit RGB PNG; each channel is round(255 * clamp(v, 0, 1))
/// with halves rounding up.
void save_png(const RgbImage& img, const std::string& path);

/// Reads a PNG as an RGB image in [0,1]. An alpha channel, when present,
/// is composited over a white background.
RgbImage load_png_rgb(const std::string& path);

/// Foreground mask from a PNG: uses the alpha channel when present, else
/// per-pixel luminance. A pixel is foreground iff normalized value exceeds
/// `threshold`. An all-background result is a validation error.
ForegroundMask load_mask(const std::string& path, double threshold = 0.5);

} // namespace geomvd
