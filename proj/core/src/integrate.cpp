#include "geomvd/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "geomvd/errors.hpp"

namespace geomvd {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Sparse SPD system in CSR form with a fixed 5-point structure; only the
// values change across IRLS iterations.
struct SparseSystem {
    int n = 0;
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;
    std::vector<double> rhs;

    void matvec(const std::vector<double>& x, std::vector<double>& y) const {
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) acc += val[k] * x[col[k]];
            y[i] = acc;
        }
    }
};

struct CgOutcome {
    int iterations = 0;
    double relative_residual = 0.0;
};

// Jacobi-preconditioned conjugate gradients, warm-started from x.
CgOutcome solve_pcg(const SparseSystem& sys, std::vector<double>& x, double tol, int max_iters) {
    const int n = sys.n;
    std::vector<double> r(n), zv(n), p(n), Ap(n), inv_diag(n, 1.0);

    for (int i = 0; i < n; ++i) {
        for (int k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k) {
            if (sys.col[k] == i && sys.val[k] > 0.0) inv_diag[i] = 1.0 / sys.val[k];
        }
    }

    double b_norm2 = 0.0;
    for (int i = 0; i < n; ++i) b_norm2 += sys.rhs[i] * sys.rhs[i];
    const double b_norm = std::sqrt(b_norm2);

    sys.matvec(x, Ap);
    for (int i = 0; i < n; ++i) r[i] = sys.rhs[i] - Ap[i];

    double r_norm2 = 0.0;
    for (int i = 0; i < n; ++i) r_norm2 += r[i] * r[i];
    if (b_norm == 0.0 || std::sqrt(r_norm2) <= tol * b_norm)
        return {0, b_norm == 0.0 ? 0.0 : std::sqrt(r_norm2) / b_norm};

    for (int i = 0; i < n; ++i) zv[i] = inv_diag[i] * r[i];
    p = zv;
    double rz = 0.0;
    for (int i = 0; i < n; ++i) rz += r[i] * zv[i];

    for (int it = 1; it <= max_iters; ++it) {
        sys.matvec(p, Ap);
        double pAp = 0.0;
        for (int i = 0; i < n; ++i) pAp += p[i] * Ap[i];
        if (pAp <= 0.0) {
            // Hit the nullspace (constant shift) direction; residual decides.
            const double rel = std::sqrt(r_norm2) / b_norm;
            if (rel <= tol) return {it, rel};
            throw SolverError("conjugate gradient broke down, relative residual " +
                                  std::to_string(rel),
                              rel);
        }
        const double alpha = rz / pAp;
        for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (int i = 0; i < n; ++i) r[i] -= alpha * Ap[i];

        r_norm2 = 0.0;
        for (int i = 0; i < n; ++i) r_norm2 += r[i] * r[i];
        if (std::sqrt(r_norm2) <= tol * b_norm) return {it, std::sqrt(r_norm2) / b_norm};

        for (int i = 0; i < n; ++i) zv[i] = inv_diag[i] * r[i];
        double rz_next = 0.0;
        for (int i = 0; i < n; ++i) rz_next += r[i] * zv[i];
        const double beta = rz_next / rz;
        rz = rz_next;
        for (int i = 0; i < n; ++i) p[i] = zv[i] + beta * p[i];
    }

    const double rel = std::sqrt(r_norm2) / b_norm;
    throw SolverError("conjugate gradient did not converge: relative residual " +
                          std::to_string(rel) + " after " + std::to_string(max_iters) +
                          " iterations",
                      rel);
}

// Index map between mask-foreground pixels and solver unknowns.
struct PixelIndex {
    int width = 0, height = 0;
    std::vector<int> index;   // -1 off foreground
    std::vector<int> pixels;  // unknown -> row*width+col

    PixelIndex(const ForegroundMask& mask)
        : width(mask.width), height(mask.height), index(mask.data.size(), -1) {
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                if (mask.at(r, c)) {
                    index[static_cast<size_t>(r) * width + c] = static_cast<int>(pixels.size());
                    pixels.push_back(r * width + c);
                }
    }

    int at(int r, int c) const {
        if (r < 0 || r >= height || c < 0 || c >= width) return -1;
        return index[static_cast<size_t>(r) * width + c];
    }
};

// One-sided difference term w * (z[hi] - z[lo] - g)^2.
struct DiffTerm {
    int lo, hi;
    double g;
    double w;
};

// Terms in fixed pixel order; y differences follow the y-up convention
// (forward y neighbor is the row above).
void collect_terms(const PixelIndex& px, const GradientField& g, const BilateralWeights& w,
                   std::vector<DiffTerm>& terms) {
    terms.clear();
    for (int r = 0; r < px.height; ++r) {
        for (int c = 0; c < px.width; ++c) {
            const int u = px.at(r, c);
            if (u < 0) continue;
            const size_t i = g.idx(r, c);
            const int right = px.at(r, c + 1);
            const int left = px.at(r, c - 1);
            const int up = px.at(r - 1, c);
            const int down = px.at(r + 1, c);
            if (right >= 0 && w.wx_pos[i] > 0.0) terms.push_back({u, right, g.p[i], w.wx_pos[i]});
            if (left >= 0 && w.wx_neg[i] > 0.0) terms.push_back({left, u, g.p[i], w.wx_neg[i]});
            if (up >= 0 && w.wy_pos[i] > 0.0) terms.push_back({u, up, g.q[i], w.wy_pos[i]});
            if (down >= 0 && w.wy_neg[i] > 0.0) terms.push_back({down, u, g.q[i], w.wy_neg[i]});
        }
    }
}

void subtract_mean(std::vector<double>& z) {
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(z.size());
    for (double& v : z) v -= mean;
}

} // namespace

void IntegrationConfig::validate() const {
    if (outer_tol <= 0.0 || cg_tol <= 0.0) throw ValidationError("tolerances must be positive");
    if (max_outer_iters <= 0 || cg_max_iters <= 0)
        throw ValidationError("iteration limits must be positive");
    if (!(nz_floor > 0.0 && nz_floor < 0.5)) throw ValidationError("nz_floor must lie in (0, 0.5)");
    if (stiffness_k <= 0.0) throw ValidationError("stiffness_k must be positive");
}

GradientField normals_to_gradients(const NormalMap& n, const ForegroundMask& mask,
                                   const IntegrationConfig& cfg) {
    cfg.validate();
    if (n.width != mask.width || n.height != mask.height)
        throw ShapeError("normal map and mask dimensions differ");
    if (mask.count_foreground() == 0) throw ValidationError("mask has no foreground pixels");

    GradientField g(n.width, n.height);
    for (int r = 0; r < n.height; ++r) {
        for (int c = 0; c < n.width; ++c) {
            if (!mask.at(r, c)) continue;
            const double* v = n.at(r, c);
            if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2]))
                throw ValidationError("non-finite normal on foreground pixel");
            const double denom = std::max(v[2], cfg.nz_floor);
            const size_t i = g.idx(r, c);
            g.p[i] = -v[0] / denom;
            g.q[i] = -v[1] / denom;
        }
    }
    return g;
}

BilateralWeights compute_bilateral_weights(const DepthMap& z, const GradientField& g,
                                           const ForegroundMask& mask,
                                           const IntegrationConfig& cfg) {
    const int w = mask.width, h = mask.height;
    BilateralWeights out;
    out.width = w;
    out.height = h;
    const size_t n = static_cast<size_t>(w) * h;
    out.wx_pos.assign(n, 0.0);
    out.wx_neg.assign(n, 0.0);
    out.wy_pos.assign(n, 0.0);
    out.wy_neg.assign(n, 0.0);

    auto fg = [&](int r, int c) { return r >= 0 && r < h && c >= 0 && c < w && mask.at(r, c); };

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!fg(r, c)) continue;
            const size_t i = g.idx(r, c);
            const double zu = z.at(r, c);

            // A dropped one-sided difference enters the sigmoid as a zero
            // residual, so lone boundary terms self-attenuate when their
            // target is inconsistent with the surface.

            // x axis: forward = right neighbor, backward = left neighbor.
            {
                const bool has_f = fg(r, c + 1);
                const bool has_b = fg(r, c - 1);
                const double rp = has_f ? z.at(r, c + 1) - zu - g.p[i] : 0.0;
                const double rm = has_b ? zu - z.at(r, c - 1) - g.p[i] : 0.0;
                const double wp = sigmoid(cfg.stiffness_k * (rm * rm - rp * rp));
                if (has_f) out.wx_pos[i] = wp;
                if (has_b) out.wx_neg[i] = 1.0 - wp;
            }
            // y axis points up: forward = row above, backward = row below.
            {
                const bool has_f = fg(r - 1, c);
                const bool has_b = fg(r + 1, c);
                const double rp = has_f ? z.at(r - 1, c) - zu - g.q[i] : 0.0;
                const double rm = has_b ? zu - z.at(r + 1, c) - g.q[i] : 0.0;
                const double wp = sigmoid(cfg.stiffness_k * (rm * rm - rp * rp));
                if (has_f) out.wy_pos[i] = wp;
                if (has_b) out.wy_neg[i] = 1.0 - wp;
            }
        }
    }
    return out;
}

double energy(const DepthMap& z, const GradientField& g, const ForegroundMask& mask,
              const IntegrationConfig& cfg) {
    cfg.validate();
    if (z.width != mask.width || z.height != mask.height)
        throw ShapeError("depth map and mask dimensions differ");

    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(r, c) && !std::isfinite(z.at(r, c)))
                throw ValidationError("non-finite depth on foreground pixel");

    const BilateralWeights w = compute_bilateral_weights(z, g, mask, cfg);
    auto fg = [&](int r, int c) {
        return r >= 0 && r < mask.height && c >= 0 && c < mask.width && mask.at(r, c);
    };

    double e = 0.0;
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (!fg(r, c)) continue;
            const size_t i = g.idx(r, c);
            const double zu = z.at(r, c);
            if (fg(r, c + 1)) {
                const double rp = z.at(r, c + 1) - zu - g.p[i];
                e += w.wx_pos[i] * rp * rp;
            }
            if (fg(r, c - 1)) {
                const double rm = zu - z.at(r, c - 1) - g.p[i];
                e += w.wx_neg[i] * rm * rm;
            }
            if (fg(r - 1, c)) {
                const double rp = z.at(r - 1, c) - zu - g.q[i];
                e += w.wy_pos[i] * rp * rp;
            }
            if (fg(r + 1, c)) {
                const double rm = zu - z.at(r + 1, c) - g.q[i];
                e += w.wy_neg[i] * rm * rm;
            }
        }
    }
    return e;
}

IntegrationResult integrate_normals_detailed(const NormalMap& n, const ForegroundMask& mask,
                                             const IntegrationConfig& cfg,
                                             const DepthMap* warm_start) {
    cfg.validate();
    const GradientField g = normals_to_gradients(n, mask, cfg);
    const PixelIndex px(mask);
    const int num = static_cast<int>(px.pixels.size());

    // Require at least one adjacent foreground pair.
    bool has_pair = false;
    for (int r = 0; r < mask.height && !has_pair; ++r)
        for (int c = 0; c < mask.width && !has_pair; ++c)
            if (px.at(r, c) >= 0 && (px.at(r, c + 1) >= 0 || px.at(r + 1, c) >= 0)) has_pair = true;
    if (!has_pair) throw ValidationError("mask has no 2-pixel-connected region");

    std::vector<double> z(num, 0.0);
    if (warm_start) {
        if (warm_start->width != mask.width || warm_start->height != mask.height)
            throw ShapeError("warm-start depth and mask dimensions differ");
        for (int u = 0; u < num; ++u) {
            const double v = warm_start->data[px.pixels[u]];
            if (!std::isfinite(v)) throw ValidationError("non-finite warm-start depth on foreground");
            z[u] = v;
        }
    }
    subtract_mean(z);

    // CSR structure over the 5-point stencil, built once.
    SparseSystem sys;
    sys.n = num;
    sys.row_ptr.assign(num + 1, 0);
    {
        std::vector<std::vector<int>> cols(num);
        for (int u = 0; u < num; ++u) {
            const int r = px.pixels[u] / mask.width;
            const int c = px.pixels[u] % mask.width;
            for (int v : {px.at(r, c - 1), px.at(r - 1, c), u, px.at(r + 1, c), px.at(r, c + 1)})
                if (v >= 0) cols[u].push_back(v);
            std::sort(cols[u].begin(), cols[u].end());
        }
        for (int u = 0; u < num; ++u) sys.row_ptr[u + 1] = sys.row_ptr[u] + static_cast<int>(cols[u].size());
        sys.col.reserve(sys.row_ptr[num]);
        for (int u = 0; u < num; ++u) sys.col.insert(sys.col.end(), cols[u].begin(), cols[u].end());
    }
    sys.val.assign(sys.col.size(), 0.0);
    sys.rhs.assign(num, 0.0);

    auto entry = [&](int row, int column) -> double& {
        for (int k = sys.row_ptr[row]; k < sys.row_ptr[row + 1]; ++k)
            if (sys.col[k] == column) return sys.val[k];
        throw Error("internal: CSR entry missing");
    };

    auto depth_view = [&](const std::vector<double>& zz) {
        DepthMap d(mask.width, mask.height, std::nan(""));
        for (int u = 0; u < num; ++u) d.data[px.pixels[u]] = zz[u];
        return d;
    };

    IntegrationResult res;
    std::vector<DiffTerm> terms;
    DepthMap zmap = depth_view(z);
    res.energy_history.push_back(energy(zmap, g, mask, cfg));

    for (int outer = 1; outer <= cfg.max_outer_iters; ++outer) {
        const BilateralWeights w = compute_bilateral_weights(zmap, g, mask, cfg);
        collect_terms(px, g, w, terms);

        std::fill(sys.val.begin(), sys.val.end(), 0.0);
        std::fill(sys.rhs.begin(), sys.rhs.end(), 0.0);
        for (const DiffTerm& t : terms) {
            entry(t.lo, t.lo) += t.w;
            entry(t.hi, t.hi) += t.w;
            entry(t.lo, t.hi) -= t.w;
            entry(t.hi, t.lo) -= t.w;
            sys.rhs[t.hi] += t.w * t.g;
            sys.rhs[t.lo] -= t.w * t.g;
        }

        std::vector<double> z_trial = z;
        const CgOutcome cg = solve_pcg(sys, z_trial, cfg.cg_tol, cfg.cg_max_iters);
        res.total_cg_iterations += cg.iterations;
        res.final_cg_residual = cg.relative_residual;
        subtract_mean(z_trial);

        // Safeguard: the frozen-weight minimizer does not always decrease
        // the reweighted energy; backtrack toward the current iterate and
        // keep only steps that do.
        const double e_prev = res.energy_history.back();
        double step = 1.0;
        double e_now = e_prev;
        bool accepted = false;
        std::vector<double> z_next(z.size());
        for (int probe = 0; probe < 9; ++probe) {
            for (size_t i = 0; i < z.size(); ++i)
                z_next[i] = z[i] + step * (z_trial[i] - z[i]);
            const double e_probe = energy(depth_view(z_next), g, mask, cfg);
            if (e_probe <= e_prev * (1.0 + 1e-15) + 1e-30) {
                e_now = e_probe;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // no step length improves the energy

        z = z_next;
        zmap = depth_view(z);
        res.energy_history.push_back(e_now);
        res.outer_iterations = outer;

        if (e_now < 1e-24) break;
        if (std::abs(e_now - e_prev) <= cfg.outer_tol * std::max(e_prev, 1e-30)) break;
    }

    res.depth = std::move(zmap);
    return res;
}

DepthMap integrate_normals(const NormalMap& n, const ForegroundMask& mask,
                           const IntegrationConfig& cfg, const DepthMap* warm_start) {
    return integrate_normals_detailed(n, mask, cfg, warm_start).depth;
}

} // namespace geomvd
