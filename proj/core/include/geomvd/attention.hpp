#pragma once

#include <optional>

#include "geomvd/tensor.hpp"

namespace geomvd {

/// Projection matrices of one self-attention layer.
struct SelfAttentionWeights {
    Matrix q, k, v, o; // each channels x channels
};

/// Parameters of the decoupled geometry-enhanced attention block: a
/// self-attention branch and a geometry branch that shares the query
/// projection with the self branch. `w_ga_q`, normally unset, switches the
/// geometry branch to an independent query projection.
struct AttentionParams {
    Matrix w_sa_q, w_sa_k, w_sa_v, w_sa_o;
    Matrix w_ga_k, w_ga_v, w_ga_o;
    std::optional<Matrix> w_ga_q;
    int heads = 1;

    int channels() const { return w_sa_q.rows; }
    double head_dim() const { return static_cast<double>(channels()) / heads; }

    void validate() const;
};

/// Geometry-branch weights start as copies of the self-attention weights
/// (independent copies: later mutation of either side leaves the other
/// untouched).
AttentionParams init_geo_from_self(const SelfAttentionWeights& w_sa, int heads = 1);

/// Self branch: Q from f_unet, K/V from concat(f_img, f_unet) along the
/// token axis, multi-head scaled-dot-product attention with a numerically
/// stable softmax. Returns the pre-output-projection result A_SA. f_img may
/// have zero tokens, which reduces to plain self attention over f_unet.
FeatureTensor self_branch(const FeatureTensor& f_unet, const FeatureTensor& f_img,
                          const AttentionParams& p);

/// Geometry branch: Q from f_unet through the (shared) query projection,
/// K/V from f_geo. f_geo must have at least one token. Returns A_GA before
/// the output projection.
FeatureTensor geo_branch(const FeatureTensor& f_unet, const FeatureTensor& f_geo,
                         const AttentionParams& p);

struct GeoAttentionOutput {
    FeatureTensor fused; // (1 - lambda) A_SA W_SA^O + lambda A_GA W_GA^O
    FeatureTensor a_sa;  // pre-projection self branch
    FeatureTensor a_ga;  // pre-projection geometry branch
};

/// Runs both branches and fuses their projected outputs with weight
/// lambda_geo in [0, 1]. The endpoints are exact: lambda 0 returns the
/// projected self branch bitwise and lambda 1 the projected geometry branch.
GeoAttentionOutput fused_attention(const FeatureTensor& f_unet, const FeatureTensor& f_img,
                                   const FeatureTensor& f_geo, const AttentionParams& p,
                                   double lambda_geo);

} // namespace geomvd
