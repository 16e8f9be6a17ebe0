#pragma once

#include <vector>

#include "geomvd/image.hpp"

namespace geomvd {

struct IntegrationConfig {
    double stiffness_k = 2.0;  // sigmoid sharpness of the bilateral weights
    int max_outer_iters = 100; // IRLS outer iterations
    double outer_tol = 1e-5;   // relative energy change stopping criterion
    double cg_tol = 1e-7;      // relative residual for the inner CG solve
    int cg_max_iters = 5000;
    double nz_floor = 1e-4; // denominator floor for near-silhouette normals

    void validate() const;
};

/// Surface gradients per foreground pixel under an orthographic camera:
/// p = dz/dx (x = column, rightward), q = dz/dy (y pointing up, i.e.
/// against the row direction). Zero outside the mask.
struct GradientField {
    int width = 0;
    int height = 0;
    std::vector<double> p;
    std::vector<double> q;

    GradientField() = default;
    GradientField(int w, int h)
        : width(w), height(h), p(static_cast<size_t>(w) * h, 0.0), q(static_cast<size_t>(w) * h, 0.0) {}

    size_t idx(int row, int col) const { return static_cast<size_t>(row) * width + col; }
};

/// p = -nx / max(nz, nz_floor), q = -ny / max(nz, nz_floor).
/// Non-finite normals on foreground are a validation error.
GradientField normals_to_gradients(const NormalMap& n, const ForegroundMask& mask,
                                   const IntegrationConfig& cfg);

/// One bilateral weight pair per pixel per axis. Weights lie in [0,1]; where
/// both one-sided differences exist they sum to 1. A difference whose
/// neighbor is background is dropped and enters the sigmoid as a zero
/// residual, so a lone boundary difference keeps weight sigmoid(-k r^2).
struct BilateralWeights {
    int width = 0;
    int height = 0;
    std::vector<double> wx_pos, wx_neg; // forward/backward along x (columns)
    std::vector<double> wy_pos, wy_neg; // forward/backward along y (up)
};

BilateralWeights compute_bilateral_weights(const DepthMap& z, const GradientField& g,
                                           const ForegroundMask& mask,
                                           const IntegrationConfig& cfg);

/// Bilateral one-sided-difference energy
///   E(z) = sum_u sum_axis [ w+ (D+ z - g)^2 + w- (D- z - g)^2 ]
/// with w+ = sigmoid(k ((r-)^2 - (r+)^2)), w- = 1 - w+.
double energy(const DepthMap& z, const GradientField& g, const ForegroundMask& mask,
              const IntegrationConfig& cfg);

struct IntegrationResult {
    DepthMap depth;                     // NaN on background, zero-mean on foreground
    std::vector<double> energy_history; // energy after each outer iteration (entry 0 = initial)
    int outer_iterations = 0;
    int total_cg_iterations = 0;
    double final_cg_residual = 0.0; // relative residual of the last CG solve
};

/// Recovers depth from normals by discontinuity-preserving normal
/// integration: iteratively reweighted least squares where each IRLS step
/// freezes the bilateral weights and solves the sparse SPD normal equations
/// with Jacobi-preconditioned conjugate gradients. The gauge is fixed by a
/// zero foreground mean. `warm_start`, when given, seeds the solve with the
/// input depth normalized to zero mean.
IntegrationResult integrate_normals_detailed(const NormalMap& n, const ForegroundMask& mask,
                                             const IntegrationConfig& cfg,
                                             const DepthMap* warm_start = nullptr);

DepthMap integrate_normals(const NormalMap& n, const ForegroundMask& mask,
                           const IntegrationConfig& cfg, const DepthMap* warm_start = nullptr);

} // namespace geomvd
