#pragma once

// Shared fixtures and independent oracles for the test and acceptance
// suites. Oracles here deliberately avoid the library's optimized code
// paths: attention is re-derived with plain triple loops, quad counting by
// brute-force enumeration, OBJ parsing with a separate minimal reader.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "geomvd/attention.hpp"
#include "geomvd/image.hpp"
#include "geomvd/surface.hpp"
#include "geomvd/tensor.hpp"

namespace testutil {

inline std::filesystem::path make_temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("geomvd_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- analytic integration fixtures ----------------------------------------

struct NormalFixture {
    geomvd::NormalMap normals;
    geomvd::ForegroundMask mask;
    geomvd::DepthMap analytic; // zero-mean over the mask
};

/// Uniformly tilted plane z = -(x - x_mean): normals (1,0,1)/sqrt(2).
inline NormalFixture plane_fixture(int size) {
    NormalFixture f{geomvd::NormalMap(size, size), geomvd::ForegroundMask(size, size, true),
                    geomvd::DepthMap(size, size, 0.0)};
    const double inv = 1.0 / std::sqrt(2.0);
    const double x_mean = (size - 1) / 2.0;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            double* n = f.normals.at(r, c);
            n[0] = inv;
            n[1] = 0.0;
            n[2] = inv;
            f.analytic.at(r, c) = -(c - x_mean);
        }
    return f;
}

/// Hemisphere cap of radius R on a centered disk mask. Normals follow the
/// camera-space convention (+y up, so ny = (center_row - row)/R).
inline NormalFixture hemisphere_fixture(int size, double R) {
    NormalFixture f{geomvd::NormalMap(size, size), geomvd::ForegroundMask(size, size),
                    geomvd::DepthMap(size, size, std::nan(""))};
    const double cx = (size - 1) / 2.0, cy = (size - 1) / 2.0;
    double zsum = 0.0;
    int count = 0;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const double x = c - cx;
            const double y = cy - r; // y up
            const double r2 = x * x + y * y;
            if (r2 > R * R - 1e-9) continue;
            const double z = std::sqrt(R * R - r2);
            f.mask.set(r, c, true);
            double* n = f.normals.at(r, c);
            n[0] = x / R;
            n[1] = y / R;
            n[2] = z / R;
            f.analytic.at(r, c) = z;
            zsum += z;
            ++count;
        }
    const double mean = zsum / count;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            if (f.mask.at(r, c)) f.analytic.at(r, c) -= mean;
    return f;
}

/// RMSE between depth maps over pixels passing `keep`, after aligning means
/// on that subset.
template <typename Keep>
double aligned_rmse(const geomvd::DepthMap& got, const geomvd::DepthMap& want,
                    const geomvd::ForegroundMask& mask, Keep keep) {
    double mg = 0.0, mw = 0.0;
    int n = 0;
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(r, c) && keep(r, c)) {
                mg += got.at(r, c);
                mw += want.at(r, c);
                ++n;
            }
    mg /= n;
    mw /= n;
    double acc = 0.0;
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(r, c) && keep(r, c)) {
                const double d = (got.at(r, c) - mg) - (want.at(r, c) - mw);
                acc += d * d;
            }
    return std::sqrt(acc / n);
}

// ---- attention oracle -------------------------------------------------------

/// Naive double-loop multi-head attention reference: explicit matrix
/// products, per-row softmax via direct exp, no shared code with the
/// library implementation.
inline geomvd::FeatureTensor naive_attention(const geomvd::FeatureTensor& f_q,
                                             const geomvd::FeatureTensor& f_kv,
                                             const geomvd::Matrix& wq, const geomvd::Matrix& wk,
                                             const geomvd::Matrix& wv, int heads) {
    const int C = wq.cols;
    const int hd = C / heads;
    geomvd::FeatureTensor out(f_q.batch, f_q.tokens, C);

    auto proj_row = [C](const geomvd::FeatureTensor& f, int b, int t, const geomvd::Matrix& m,
                        std::vector<double>& row) {
        row.assign(C, 0.0);
        for (int j = 0; j < C; ++j)
            for (int k = 0; k < f.channels; ++k) row[j] += f.at(b, t, k) * m.at(k, j);
    };

    std::vector<double> qrow, krow, vrow;
    for (int b = 0; b < f_q.batch; ++b) {
        for (int qi = 0; qi < f_q.tokens; ++qi) {
            proj_row(f_q, b, qi, wq, qrow);
            for (int h = 0; h < heads; ++h) {
                std::vector<double> weights(f_kv.tokens);
                double denom = 0.0;
                for (int ki = 0; ki < f_kv.tokens; ++ki) {
                    proj_row(f_kv, b, ki, wk, krow);
                    double logit = 0.0;
                    for (int c = 0; c < hd; ++c) logit += qrow[h * hd + c] * krow[h * hd + c];
                    weights[ki] = std::exp(logit / std::sqrt(static_cast<double>(hd)));
                    denom += weights[ki];
                }
                for (int ki = 0; ki < f_kv.tokens; ++ki) {
                    proj_row(f_kv, b, ki, wv, vrow);
                    for (int c = 0; c < hd; ++c)
                        out.at(b, qi, h * hd + c) += weights[ki] / denom * vrow[h * hd + c];
                }
            }
        }
    }
    return out;
}

inline geomvd::FeatureTensor concat_tokens_naive(const geomvd::FeatureTensor& a,
                                                 const geomvd::FeatureTensor& b) {
    geomvd::FeatureTensor out(a.batch, a.tokens + b.tokens, a.channels);
    for (int bi = 0; bi < a.batch; ++bi) {
        for (int t = 0; t < a.tokens; ++t)
            for (int c = 0; c < a.channels; ++c) out.at(bi, t, c) = a.at(bi, t, c);
        for (int t = 0; t < b.tokens; ++t)
            for (int c = 0; c < b.channels; ++c) out.at(bi, a.tokens + t, c) = b.at(bi, t, c);
    }
    return out;
}

inline double max_abs_diff(const geomvd::FeatureTensor& a, const geomvd::FeatureTensor& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

inline geomvd::Matrix random_test_matrix(std::mt19937& rng, int rows, int cols) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    geomvd::Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

inline geomvd::FeatureTensor random_test_tensor(std::mt19937& rng, int b, int t, int c) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    geomvd::FeatureTensor f(b, t, c);
    for (double& v : f.data) v = dist(rng);
    return f;
}

// ---- mesh oracles -------------------------------------------------------------

/// Brute-force count of 2x2 all-foreground quads.
inline int count_complete_quads(const geomvd::ForegroundMask& mask) {
    int quads = 0;
    for (int r = 0; r + 1 < mask.height; ++r)
        for (int c = 0; c + 1 < mask.width; ++c)
            if (mask.at(r, c) && mask.at(r, c + 1) && mask.at(r + 1, c) && mask.at(r + 1, c + 1))
                ++quads;
    return quads;
}

/// Minimal OBJ reader used as a reparse oracle (independent of load_obj).
struct ParsedObj {
    std::vector<std::array<double, 3>> v, vn;
    std::vector<std::array<int, 3>> f; // 0-based vertex indices
};

inline ParsedObj parse_obj_oracle(const std::string& path) {
    ParsedObj out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v" || tag == "vn") {
            std::array<double, 3> vec{};
            ls >> vec[0] >> vec[1] >> vec[2];
            (tag == "v" ? out.v : out.vn).push_back(vec);
        } else if (tag == "f") {
            std::array<int, 3> idx{};
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                ls >> tok;
                idx[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            out.f.push_back(idx);
        }
    }
    return out;
}

} // namespace testutil
