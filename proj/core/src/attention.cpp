#include "geomvd/attention.hpp"

#include <cmath>
#include <limits>

#include "geomvd/errors.hpp"

namespace geomvd {

namespace {

void check_square(const Matrix& m, int channels, const char* name) {
    if (m.rows != channels || m.cols != channels)
        throw ShapeError(std::string("attention parameter ") + name + " must be channels x channels");
}

// Multi-head scaled dot-product attention; Q, K, V are already projected.
FeatureTensor attend(const FeatureTensor& q, const FeatureTensor& k, const FeatureTensor& v,
                     int heads, double d_k) {
    const int C = q.channels;
    const int hd = C / heads;
    const double scale = 1.0 / std::sqrt(d_k);

    FeatureTensor out(q.batch, q.tokens, C);
    std::vector<double> logits(k.tokens);

    for (int b = 0; b < q.batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * hd;
            for (int qi = 0; qi < q.tokens; ++qi) {
                double max_logit = -std::numeric_limits<double>::infinity();
                for (int ki = 0; ki < k.tokens; ++ki) {
                    double acc = 0.0;
                    for (int c = 0; c < hd; ++c) acc += q.at(b, qi, c0 + c) * k.at(b, ki, c0 + c);
                    logits[ki] = acc * scale;
                    if (logits[ki] > max_logit) max_logit = logits[ki];
                }
                double denom = 0.0;
                for (int ki = 0; ki < k.tokens; ++ki) {
                    logits[ki] = std::exp(logits[ki] - max_logit);
                    denom += logits[ki];
                }
                for (int ki = 0; ki < k.tokens; ++ki) {
                    const double w = logits[ki] / denom;
                    if (w == 0.0) continue;
                    for (int c = 0; c < hd; ++c) out.at(b, qi, c0 + c) += w * v.at(b, ki, c0 + c);
                }
            }
        }
    }
    return out;
}

void check_pair(const FeatureTensor& a, const FeatureTensor& b, const char* what) {
    if (a.batch != b.batch) throw ShapeError(std::string(what) + ": batch sizes differ");
    if (a.channels != b.channels) throw ShapeError(std::string(what) + ": channel counts differ");
}

} // namespace

void AttentionParams::validate() const {
    const int C = channels();
    if (C <= 0) throw ShapeError("attention channels must be positive");
    if (heads <= 0 || C % heads != 0) throw ShapeError("channels must be divisible by heads");
    check_square(w_sa_q, C, "w_sa_q");
    check_square(w_sa_k, C, "w_sa_k");
    check_square(w_sa_v, C, "w_sa_v");
    check_square(w_sa_o, C, "w_sa_o");
    check_square(w_ga_k, C, "w_ga_k");
    check_square(w_ga_v, C, "w_ga_v");
    check_square(w_ga_o, C, "w_ga_o");
    if (w_ga_q) check_square(*w_ga_q, C, "w_ga_q");
}

AttentionParams init_geo_from_self(const SelfAttentionWeights& w_sa, int heads) {
    AttentionParams p;
    p.w_sa_q = w_sa.q;
    p.w_sa_k = w_sa.k;
    p.w_sa_v = w_sa.v;
    p.w_sa_o = w_sa.o;
    p.w_ga_k = w_sa.k;
    p.w_ga_v = w_sa.v;
    p.w_ga_o = w_sa.o;
    p.heads = heads;
    p.validate();
    return p;
}

FeatureTensor self_branch(const FeatureTensor& f_unet, const FeatureTensor& f_img,
                          const AttentionParams& p) {
    p.validate();
    if (f_unet.channels != p.channels()) throw ShapeError("f_unet channels do not match parameters");
    if (f_img.tokens > 0) check_pair(f_unet, f_img, "self_branch");

    const FeatureTensor q = project(f_unet, p.w_sa_q);
    const FeatureTensor kv_in =
        f_img.tokens > 0 ? concat_tokens(f_img, f_unet) : f_unet; // order: F_img then F_unet
    const FeatureTensor k = project(kv_in, p.w_sa_k);
    const FeatureTensor v = project(kv_in, p.w_sa_v);
    return attend(q, k, v, p.heads, p.head_dim());
}

FeatureTensor geo_branch(const FeatureTensor& f_unet, const FeatureTensor& f_geo,
                         const AttentionParams& p) {
    p.validate();
    if (f_unet.channels != p.channels()) throw ShapeError("f_unet channels do not match parameters");
    if (f_geo.tokens == 0) throw ValidationError("geo branch requires at least one geometry token");
    check_pair(f_unet, f_geo, "geo_branch");

    const FeatureTensor q = project(f_unet, p.w_ga_q ? *p.w_ga_q : p.w_sa_q);
    const FeatureTensor k = project(f_geo, p.w_ga_k);
    const FeatureTensor v = project(f_geo, p.w_ga_v);
    return attend(q, k, v, p.heads, p.head_dim());
}

GeoAttentionOutput fused_attention(const FeatureTensor& f_unet, const FeatureTensor& f_img,
                                   const FeatureTensor& f_geo, const AttentionParams& p,
                                   double lambda_geo) {
    if (!(lambda_geo >= 0.0 && lambda_geo <= 1.0))
        throw ValidationError("lambda_geo must lie in [0, 1]");

    GeoAttentionOutput out;
    out.a_sa = self_branch(f_unet, f_img, p);
    out.a_ga = geo_branch(f_unet, f_geo, p);

    const FeatureTensor proj_sa = project(out.a_sa, p.w_sa_o);
    const FeatureTensor proj_ga = project(out.a_ga, p.w_ga_o);

    // Exact endpoints keep lambda = 0 bitwise independent of the geometry
    // inputs (and symmetrically at lambda = 1).
    if (lambda_geo == 0.0) {
        out.fused = proj_sa;
    } else if (lambda_geo == 1.0) {
        out.fused = proj_ga;
    } else {
        out.fused = proj_sa;
        for (size_t i = 0; i < out.fused.data.size(); ++i)
            out.fused.data[i] = (1.0 - lambda_geo) * proj_sa.data[i] + lambda_geo * proj_ga.data[i];
    }
    return out;
}

} // namespace geomvd
