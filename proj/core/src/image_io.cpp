#include "geomvd/image_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "geomvd/errors.hpp"

namespace geomvd {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads one whitespace-delimited token, skipping PFM comment lines.
std::string next_token(std::FILE* f) {
    std::string tok;
    int c;
    while ((c = std::fgetc(f)) != EOF) {
        if (c == '#') {
            while ((c = std::fgetc(f)) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

float byteswap_float(float v) {
    uint32_t u = std::bit_cast<uint32_t>(v);
    u = ((u & 0x000000FFu) << 24) | ((u & 0x0000FF00u) << 8) | ((u & 0x00FF0000u) >> 8) |
        ((u & 0xFF000000u) >> 24);
    return std::bit_cast<float>(u);
}

} // namespace

PfmImage load_pfm(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open PFM file: " + path);

    const std::string magic = next_token(f.get());
    PfmImage img;
    if (magic == "PF") {
        img.channels = 3;
    } else if (magic == "Pf") {
        img.channels = 1;
    } else {
        throw FormatError("not a PFM file (bad magic '" + magic + "'): " + path);
    }

    const std::string ws = next_token(f.get());
    const std::string hs = next_token(f.get());
    const std::string ss = next_token(f.get());
    try {
        img.width = std::stoi(ws);
        img.height = std::stoi(hs);
    } catch (const std::exception&) {
        throw FormatError("malformed PFM dimensions in " + path);
    }
    if (img.width <= 0 || img.height <= 0) throw FormatError("non-positive PFM dimensions in " + path);

    double scale = 0.0;
    try {
        scale = std::stod(ss);
    } catch (const std::exception&) {
        throw FormatError("malformed PFM scale in " + path);
    }
    if (scale == 0.0) throw FormatError("PFM scale must be nonzero in " + path);
    const bool little_endian = scale < 0.0;

    const size_t count = static_cast<size_t>(img.width) * img.height * img.channels;
    std::vector<float> raw(count);
    if (std::fread(raw.data(), sizeof(float), count, f.get()) != count)
        throw FormatError("truncated PFM payload in " + path);

    if (little_endian != (std::endian::native == std::endian::little)) {
        for (float& v : raw) v = byteswap_float(v);
    }

    // File rows run bottom-up; flip to top-down.
    img.data.resize(count);
    const size_t row_elems = static_cast<size_t>(img.width) * img.channels;
    for (int r = 0; r < img.height; ++r) {
        std::memcpy(&img.data[static_cast<size_t>(r) * row_elems],
                    &raw[static_cast<size_t>(img.height - 1 - r) * row_elems],
                    row_elems * sizeof(float));
    }
    return img;
}

void save_pfm(const PfmImage& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw ValidationError("PFM supports 1 or 3 channels");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot write PFM file: " + path);

    std::fprintf(f.get(), "%s\n%d %d\n-1.0\n", img.channels == 3 ? "PF" : "Pf", img.width,
                 img.height);

    std::vector<float> row(static_cast<size_t>(img.width) * img.channels);
    const size_t row_elems = row.size();
    for (int r = img.height - 1; r >= 0; --r) {
        const float* src = &img.data[static_cast<size_t>(r) * row_elems];
        std::memcpy(row.data(), src, row_elems * sizeof(float));
        if constexpr (std::endian::native != std::endian::little) {
            for (float& v : row) v = byteswap_float(v);
        }
        if (std::fwrite(row.data(), sizeof(float), row_elems, f.get()) != row_elems)
            throw IoError("short write to PFM file: " + path);
    }
}

NormalMap load_pfm_normals(const std::string& path) {
    const PfmImage img = load_pfm(path);
    if (img.channels != 3) throw FormatError("expected 3-channel PFM for normals: " + path);

    NormalMap n(img.width, img.height);
    for (size_t i = 0; i < img.data.size(); i += 3) {
        const double x = img.data[i], y = img.data[i + 1], z = img.data[i + 2];
        const int finite = std::isfinite(x) + std::isfinite(y) + std::isfinite(z);
        if (finite == 0) {
            n.data[i] = n.data[i + 1] = n.data[i + 2] = std::nan("");
            continue;
        }
        if (finite != 3)
            throw ValidationError("normal map pixel mixes finite and non-finite components: " + path);
        const double norm = std::sqrt(x * x + y * y + z * z);
        if (norm < 1e-8) continue; // zero vector: background sentinel
        n.data[i] = x / norm;
        n.data[i + 1] = y / norm;
        n.data[i + 2] = z / norm;
    }
    return n;
}

DepthMap load_pfm_depth(const std::string& path) {
    const PfmImage img = load_pfm(path);
    if (img.channels != 1) throw FormatError("expected 1-channel PFM for depth: " + path);
    DepthMap z(img.width, img.height, 0.0);
    for (size_t i = 0; i < img.data.size(); ++i) z.data[i] = img.data[i];
    return z;
}

void save_pfm_normals(const NormalMap& n, const std::string& path) {
    PfmImage img;
    img.width = n.width;
    img.height = n.height;
    img.channels = 3;
    img.data.assign(n.data.begin(), n.data.end());
    save_pfm(img, path);
}

void save_pfm_depth(const DepthMap& z, const std::string& path) {
    PfmImage img;
    img.width = z.width;
    img.height = z.height;
    img.channels = 1;
    img.data.assign(z.data.begin(), z.data.end());
    save_pfm(img, path);
}

// ---- PNG ------------------------------------------------------------------

Png8 load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open PNG file: " + path);

    uint8_t sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw FormatError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }

    Png8 out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG file: " + path);
    }

    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_16(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = static_cast<int>(png_get_channels(png, info));
    out.data.resize(static_cast<size_t>(out.width) * out.height * out.channels);

    rows.resize(out.height);
    const size_t stride = static_cast<size_t>(out.width) * out.channels;
    for (int r = 0; r < out.height; ++r) rows[r] = out.data.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void save_png(const Png8& img, const std::string& path) {
    int color_type;
    switch (img.channels) {
        case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
        case 2: color_type = PNG_COLOR_TYPE_GRAY_ALPHA; break;
        case 3: color_type = PNG_COLOR_TYPE_RGB; break;
        case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
        default: throw ValidationError("PNG writer supports 1..4 channels");
    }

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot write PNG file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path);
    }

    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width, img.height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    for (int r = 0; r < img.height; ++r)
        png_write_row(png, const_cast<png_bytep>(img.data.data() + r * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_png(const RgbImage& img, const std::string& path) {
    Png8 out;
    out.width = img.width;
    out.height = img.height;
    out.channels = 3;
    out.data.resize(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        double v = img.data[i];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out.data[i] = static_cast<uint8_t>(std::lround(255.0 * v));
    }
    save_png(out, path);
}

RgbImage load_png_rgb(const std::string& path) {
    const Png8 png = load_png(path);
    RgbImage img(png.width, png.height);
    const int c = png.channels;
    for (size_t p = 0, n = static_cast<size_t>(png.width) * png.height; p < n; ++p) {
        const uint8_t* px = &png.data[p * c];
        double r, g, b, a = 1.0;
        switch (c) {
            case 1: r = g = b = px[0] / 255.0; break;
            case 2: r = g = b = px[0] / 255.0; a = px[1] / 255.0; break;
            case 3: r = px[0] / 255.0; g = px[1] / 255.0; b = px[2] / 255.0; break;
            default: r = px[0] / 255.0; g = px[1] / 255.0; b = px[2] / 255.0; a = px[3] / 255.0;
        }
        // Composite over white.
        img.data[p * 3] = r * a + (1.0 - a);
        img.data[p * 3 + 1] = g * a + (1.0 - a);
        img.data[p * 3 + 2] = b * a + (1.0 - a);
    }
    return img;
}

ForegroundMask load_mask(const std::string& path, double threshold) {
    const Png8 png = load_png(path);
    ForegroundMask mask(png.width, png.height);
    const int c = png.channels;
    const bool has_alpha = (c == 2 || c == 4);
    for (size_t p = 0, n = static_cast<size_t>(png.width) * png.height; p < n; ++p) {
        const uint8_t* px = &png.data[p * c];
        double v;
        if (has_alpha) {
            v = px[c - 1] / 255.0;
        } else if (c == 3) {
            v = (0.2126 * px[0] + 0.7152 * px[1] + 0.0722 * px[2]) / 255.0;
        } else {
            v = px[0] / 255.0;
        }
        mask.data[p] = v > threshold ? 1 : 0;
    }
    if (mask.count_foreground() == 0)
        throw ValidationError("mask has no foreground pixels: " + path);
    return mask;
}

} // namespace geomvd
