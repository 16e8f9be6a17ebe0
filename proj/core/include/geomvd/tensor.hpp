#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace geomvd {

/// Dense row-major matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    static Matrix identity(int n);
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// Rank-3 feature array: batch x tokens x channels, row-major.
struct FeatureTensor {
    int batch = 0;
    int tokens = 0;
    int channels = 0;
    std::vector<double> data;

    FeatureTensor() = default;
    FeatureTensor(int b, int t, int c, double fill = 0.0)
        : batch(b), tokens(t), channels(c), data(static_cast<size_t>(b) * t * c, fill) {}

    double& at(int b, int t, int c) {
        return data[(static_cast<size_t>(b) * tokens + t) * channels + c];
    }
    double at(int b, int t, int c) const {
        return data[(static_cast<size_t>(b) * tokens + t) * channels + c];
    }
};

/// Applies a channels x C' matrix to every token: out[b,t,:] = in[b,t,:] * m.
FeatureTensor project(const FeatureTensor& in, const Matrix& m);

/// Concatenates along the token axis (batch and channels must agree; either
/// side may have zero tokens).
FeatureTensor concat_tokens(const FeatureTensor& a, const FeatureTensor& b);

// ---- Deterministic seeding ------------------------------------------------

/// FNV-1a over bytes.
uint64_t hash64(std::string_view bytes);

/// SplitMix64 finalizer-based combine; used to derive substream seeds.
uint64_t mix64(uint64_t a, uint64_t b);

/// Deterministic standard-normal stream: mt19937_64 + Box-Muller, fully
/// pinned by the seed (no reliance on std::normal_distribution, whose
/// algorithm is implementation-defined).
class GaussianStream {
public:
    explicit GaussianStream(uint64_t seed) : gen_(seed) {}

    double next();
    void fill(std::vector<double>& out);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Checksum of a double array's bit patterns (FNV-1a over the raw bytes).
uint64_t checksum_doubles(const std::vector<double>& values);

} // namespace geomvd
