#include "geomvd/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "geomvd/errors.hpp"

namespace geomvd {

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
    Matrix out(a.rows, b.cols);
    // ikj order keeps the inner loop contiguous.
    for (int i = 0; i < a.rows; ++i) {
        double* orow = &out.data[static_cast<size_t>(i) * out.cols];
        const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out.at(c, r) = m.at(r, c);
    return out;
}

FeatureTensor project(const FeatureTensor& in, const Matrix& m) {
    if (in.channels != m.rows) throw ShapeError("project: channel count does not match matrix rows");
    FeatureTensor out(in.batch, in.tokens, m.cols);
    const size_t n_rows = static_cast<size_t>(in.batch) * in.tokens;
    for (size_t r = 0; r < n_rows; ++r) {
        const double* irow = &in.data[r * in.channels];
        double* orow = &out.data[r * m.cols];
        for (int k = 0; k < in.channels; ++k) {
            const double v = irow[k];
            if (v == 0.0) continue;
            const double* mrow = &m.data[static_cast<size_t>(k) * m.cols];
            for (int j = 0; j < m.cols; ++j) orow[j] += v * mrow[j];
        }
    }
    return out;
}

FeatureTensor concat_tokens(const FeatureTensor& a, const FeatureTensor& b) {
    if (a.tokens == 0 && a.batch == 0) return b;
    if (b.tokens == 0 && b.batch == 0) return a;
    if (a.batch != b.batch) throw ShapeError("concat_tokens: batch sizes differ");
    if (a.channels != b.channels) throw ShapeError("concat_tokens: channel counts differ");

    FeatureTensor out(a.batch, a.tokens + b.tokens, a.channels);
    const size_t arow = static_cast<size_t>(a.tokens) * a.channels;
    const size_t brow = static_cast<size_t>(b.tokens) * b.channels;
    for (int bi = 0; bi < a.batch; ++bi) {
        std::memcpy(&out.data[static_cast<size_t>(bi) * (arow + brow)], &a.data[bi * arow],
                    arow * sizeof(double));
        std::memcpy(&out.data[static_cast<size_t>(bi) * (arow + brow) + arow], &b.data[bi * brow],
                    brow * sizeof(double));
    }
    return out;
}

uint64_t hash64(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ull + (b << 1 | b >> 63);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

double GaussianStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller on uniforms with 53 random bits; u1 in (0, 1].
    const double u1 = 1.0 - (gen_() >> 11) * 0x1.0p-53;
    const double u2 = (gen_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

void GaussianStream::fill(std::vector<double>& out) {
    for (double& v : out) v = next();
}

uint64_t checksum_doubles(const std::vector<double>& values) {
    return hash64(std::string_view(reinterpret_cast<const char*>(values.data()),
                                   values.size() * sizeof(double)));
}

} // namespace geomvd
