#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fifa/error.hpp"
#include "fifa/mask.hpp"
#include "fifa/tensor.hpp"

namespace fifa {

// Forward-only reference kernels for the model math. Weights come from files
// or a seeded initializer; there is no training path.

// Normalized box in [0,1]^4.
struct NormBox {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

    void validate() const {
        if (!(x0 >= 0.0 && y0 >= 0.0 && x1 <= 1.0 && y1 <= 1.0 && x0 < x1 &&
              y0 < y1))
            throw make_error("DegenerateBox", "normalized box out of range");
    }
};

namespace detail {

// Bilinear sample of channel plane (H x W) at continuous (x, y); pixel (i, j)
// has its value at center (j + 0.5, i + 0.5). Coordinates clamp to the border.
inline double bilinear(const Tensor& feature, size_t channel, double x, double y) {
    const size_t h = feature.shape[1], w = feature.shape[2];
    double u = x - 0.5, v = y - 0.5;
    u = std::min(std::max(u, 0.0), static_cast<double>(w - 1));
    v = std::min(std::max(v, 0.0), static_cast<double>(h - 1));
    size_t x0 = static_cast<size_t>(u), y0 = static_cast<size_t>(v);
    size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    double fx = u - static_cast<double>(x0), fy = v - static_cast<double>(y0);
    return feature.at3(channel, y0, x0) * (1 - fx) * (1 - fy) +
           feature.at3(channel, y0, x1) * fx * (1 - fy) +
           feature.at3(channel, y1, x0) * (1 - fx) * fy +
           feature.at3(channel, y1, x1) * fx * fy;
}

}  // namespace detail

// RoIAlign: average of samples_per_bin^2 regularly spaced bilinear samples per
// output bin. feature is C x H x W; result is C x out_h x out_w.
inline Tensor roi_align(const Tensor& feature, const NormBox& box, size_t out_h,
                        size_t out_w, int samples_per_bin = 2) {
    if (feature.shape.size() != 3)
        throw make_error("DimMismatch", "roi_align expects C x H x W");
    box.validate();
    if (samples_per_bin < 1)
        throw make_error("DegenerateBox", "samples_per_bin must be >= 1");
    const size_t channels = feature.shape[0];
    const double fh = static_cast<double>(feature.shape[1]);
    const double fw = static_cast<double>(feature.shape[2]);
    const double rx0 = box.x0 * fw, ry0 = box.y0 * fh;
    const double bin_w = (box.x1 - box.x0) * fw / static_cast<double>(out_w);
    const double bin_h = (box.y1 - box.y0) * fh / static_cast<double>(out_h);

    Tensor out({channels, out_h, out_w});
    const int s = samples_per_bin;
    for (size_t c = 0; c < channels; ++c)
        for (size_t by = 0; by < out_h; ++by)
            for (size_t bx = 0; bx < out_w; ++bx) {
                double acc = 0.0;
                for (int iy = 0; iy < s; ++iy)
                    for (int ix = 0; ix < s; ++ix) {
                        double x = rx0 + (static_cast<double>(bx) +
                                          (ix + 0.5) / s) * bin_w;
                        double y = ry0 + (static_cast<double>(by) +
                                          (iy + 0.5) / s) * bin_h;
                        acc += detail::bilinear(feature, c, x, y);
                    }
                out.at3(c, by, bx) = acc / static_cast<double>(s * s);
            }
    return out;
}

// ---------------------------------------------------------------------------
// Box encoder
// ---------------------------------------------------------------------------

struct BoxEncoderParams {
    Tensor projection;  // D_B x sum(C_l)
    Tensor bias;        // D_B
};

// Hierarchical pyramid -> per-level RoIAlign to 7x7 -> mean pool -> concat ->
// linear projection. Result is 1 x D_B.
inline Tensor box_encode(const std::vector<Tensor>& pyramid, const NormBox& box,
                         const BoxEncoderParams& params) {
    if (pyramid.size() != 4)
        throw make_error("WrongLevelCount", "box encoder expects 4 levels");
    std::vector<double> pooled;
    for (const auto& level : pyramid) {
        Tensor roi = roi_align(level, box, 7, 7);
        for (size_t c = 0; c < roi.shape[0]; ++c) {
            double sum = 0.0;
            for (size_t y = 0; y < 7; ++y)
                for (size_t x = 0; x < 7; ++x) sum += roi.at3(c, y, x);
            pooled.push_back(sum / 49.0);
        }
    }
    if (params.projection.shape.size() != 2 ||
        params.projection.shape[1] != pooled.size() ||
        params.bias.numel() != params.projection.shape[0])
        throw make_error("DimMismatch", "box encoder projection shape");
    Tensor out({1, params.projection.shape[0]});
    for (size_t i = 0; i < params.projection.shape[0]; ++i) {
        double acc = params.bias.data[i];
        for (size_t j = 0; j < pooled.size(); ++j)
            acc += params.projection.at2(i, j) * pooled[j];
        out.at2(0, i) = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Interleaved sequence splicing
// ---------------------------------------------------------------------------

struct TokenItem {
    enum class Kind { Text, ImagePlaceholder, BoxPlaceholder };
    Kind kind = Kind::Text;
    std::vector<double> embedding;  // Text only, length D_llm
};

inline TokenItem text_token(std::vector<double> embedding) {
    return {TokenItem::Kind::Text, std::move(embedding)};
}
inline TokenItem image_placeholder() {
    return {TokenItem::Kind::ImagePlaceholder, {}};
}
inline TokenItem box_placeholder() {
    return {TokenItem::Kind::BoxPlaceholder, {}};
}

// Replace exactly one image placeholder with the L_I rows of image_embeds and
// each box placeholder with the matching row of box_embeds, in order.
inline Tensor splice_sequence(const std::vector<TokenItem>& tokens,
                              const Tensor& image_embeds,
                              const std::optional<Tensor>& box_embeds = {}) {
    if (image_embeds.shape.size() != 2)
        throw make_error("DimMismatch", "image embeds must be L_I x D");
    const size_t d = image_embeds.shape[1];
    size_t image_count = 0, box_count = 0;
    for (const auto& t : tokens) {
        if (t.kind == TokenItem::Kind::ImagePlaceholder) ++image_count;
        if (t.kind == TokenItem::Kind::BoxPlaceholder) ++box_count;
        if (t.kind == TokenItem::Kind::Text && t.embedding.size() != d)
            throw make_error("DimMismatch", "text token embedding width");
    }
    if (image_count != 1)
        throw make_error("PlaceholderMismatch", "expected exactly one <image>");
    size_t boxes_given = box_embeds ? box_embeds->shape[0] : 0;
    if (box_count != boxes_given)
        throw make_error("PlaceholderMismatch",
                         "<bbox> count does not match provided box embeds");
    if (box_embeds && box_embeds->shape[1] != d)
        throw make_error("DimMismatch", "box embed width");

    const size_t out_len = tokens.size() - 1 - box_count +
                           image_embeds.shape[0] + boxes_given;
    Tensor out({out_len, d});
    size_t row = 0, next_box = 0;
    for (const auto& t : tokens) {
        switch (t.kind) {
            case TokenItem::Kind::Text:
                for (size_t j = 0; j < d; ++j) out.at2(row, j) = t.embedding[j];
                ++row;
                break;
            case TokenItem::Kind::ImagePlaceholder:
                for (size_t i = 0; i < image_embeds.shape[0]; ++i, ++row)
                    for (size_t j = 0; j < d; ++j)
                        out.at2(row, j) = image_embeds.at2(i, j);
                break;
            case TokenItem::Kind::BoxPlaceholder:
                for (size_t j = 0; j < d; ++j)
                    out.at2(row, j) = box_embeds->at2(next_box, j);
                ++next_box;
                ++row;
                break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Two-way transformer decoder
// ---------------------------------------------------------------------------

struct AttentionParams {
    Tensor wq, wk, wv, wo;  // each D x D
};

struct MlpParams {
    Tensor w1;  // D x D_ff
    Tensor b1;  // D_ff
    Tensor w2;  // D_ff x D
    Tensor b2;  // D
};

struct DecoderLayerParams {
    AttentionParams query_self_attn;
    AttentionParams query_to_image;
    MlpParams query_mlp;
    AttentionParams image_to_query;
};

struct DecoderParams {
    std::vector<DecoderLayerParams> layers;
    int heads = 1;
};

namespace detail {

// Multi-head scaled dot-product attention; q is Lq x D, kv is Lk x D.
inline Tensor attention(const Tensor& q_in, const Tensor& kv_in,
                        const AttentionParams& p, int heads) {
    const size_t d = q_in.shape[1];
    if (heads < 1 || d % static_cast<size_t>(heads) != 0)
        throw make_error("DimMismatch", "head count must divide D");
    const size_t dh = d / static_cast<size_t>(heads);
    Tensor q = matmul(q_in, p.wq), k = matmul(kv_in, p.wk),
           v = matmul(kv_in, p.wv);
    Tensor mixed({q.shape[0], d});
    for (int h = 0; h < heads; ++h) {
        const size_t off = static_cast<size_t>(h) * dh;
        Tensor scores({q.shape[0], k.shape[0]});
        for (size_t i = 0; i < q.shape[0]; ++i)
            for (size_t j = 0; j < k.shape[0]; ++j) {
                double dot = 0.0;
                for (size_t t = 0; t < dh; ++t)
                    dot += q.at2(i, off + t) * k.at2(j, off + t);
                scores.at2(i, j) = dot / std::sqrt(static_cast<double>(dh));
            }
        softmax_rows(scores);
        for (size_t i = 0; i < q.shape[0]; ++i)
            for (size_t t = 0; t < dh; ++t) {
                double acc = 0.0;
                for (size_t j = 0; j < k.shape[0]; ++j)
                    acc += scores.at2(i, j) * v.at2(j, off + t);
                mixed.at2(i, off + t) = acc;
            }
    }
    return matmul(mixed, p.wo);
}

inline Tensor mlp(const Tensor& x, const MlpParams& p) {
    Tensor h = matmul(x, p.w1);
    for (size_t i = 0; i < h.shape[0]; ++i)
        for (size_t j = 0; j < h.shape[1]; ++j)
            h.at2(i, j) = gelu(h.at2(i, j) + p.b1.data[j]);
    Tensor out = matmul(h, p.w2);
    for (size_t i = 0; i < out.shape[0]; ++i)
        for (size_t j = 0; j < out.shape[1]; ++j) out.at2(i, j) += p.b2.data[j];
    return out;
}

}  // namespace detail

struct DecoderOutput {
    Tensor image;    // L_I x D_de
    Tensor queries;  // q x D_de
};

// Two-way decoder layer order: query self-attention, query->image cross
// attention, pointwise MLP on queries, image->query cross attention. Pre-norm
// residual form, so all-zero weights make the decoder an exact identity.
inline DecoderOutput two_way_decoder(const Tensor& image_in,
                                     const Tensor& queries_in,
                                     const DecoderParams& params) {
    if (image_in.shape.size() != 2 || queries_in.shape.size() != 2 ||
        image_in.shape[1] != queries_in.shape[1])
        throw make_error("DimMismatch", "decoder inputs must share D_de");
    if (queries_in.shape[0] < 1)
        throw make_error("DimMismatch", "need at least one query token");
    Tensor img = image_in, q = queries_in;
    for (const auto& layer : params.layers) {
        q = add(q, detail::attention(layer_norm(q), layer_norm(q),
                                     layer.query_self_attn, params.heads));
        q = add(q, detail::attention(layer_norm(q), layer_norm(img),
                                     layer.query_to_image, params.heads));
        q = add(q, detail::mlp(layer_norm(q), layer.query_mlp));
        img = add(img, detail::attention(layer_norm(img), layer_norm(q),
                                         layer.image_to_query, params.heads));
    }
    return {std::move(img), std::move(q)};
}

// ---------------------------------------------------------------------------
// Pixel decoder
// ---------------------------------------------------------------------------

struct DeconvParams {
    Tensor weight;  // C_in x C_out x 2 x 2
    Tensor bias;    // C_out, may be empty for no bias
};

namespace detail {

inline Tensor deconv2x2_stride2(const Tensor& x, const DeconvParams& p) {
    if (x.shape.size() != 3 || p.weight.shape.size() != 4 ||
        p.weight.shape[0] != x.shape[0] || p.weight.shape[2] != 2 ||
        p.weight.shape[3] != 2)
        throw make_error("DimMismatch", "deconv weight must be C_in x C_out x 2 x 2");
    const size_t cin = x.shape[0], cout = p.weight.shape[1];
    const size_t h = x.shape[1], w = x.shape[2];
    if (p.bias.numel() != 0 && p.bias.numel() != cout)
        throw make_error("DimMismatch", "deconv bias length");
    Tensor out({cout, 2 * h, 2 * w});
    if (p.bias.numel() == cout)
        for (size_t o = 0; o < cout; ++o)
            for (size_t i = 0; i < 4 * h * w; ++i)
                out.data[o * 4 * h * w + i] = p.bias.data[o];
    for (size_t c = 0; c < cin; ++c)
        for (size_t y = 0; y < h; ++y)
            for (size_t xx = 0; xx < w; ++xx) {
                double v = x.at3(c, y, xx);
                if (v == 0.0) continue;
                for (size_t o = 0; o < cout; ++o)
                    for (size_t ky = 0; ky < 2; ++ky)
                        for (size_t kx = 0; kx < 2; ++kx)
                            out.at3(o, 2 * y + ky, 2 * xx + kx) +=
                                v * p.weight.data[((c * cout + o) * 2 + ky) * 2 + kx];
            }
    return out;
}

}  // namespace detail

// Two consecutive 2x2 stride-2 transposed convolutions: D x h x w ->
// D x 4h x 4w.
inline Tensor pixel_decode(const Tensor& image_features,
                           const DeconvParams& deconv1,
                           const DeconvParams& deconv2) {
    return detail::deconv2x2_stride2(
        detail::deconv2x2_stride2(image_features, deconv1), deconv2);
}

// ---------------------------------------------------------------------------
// Mask prediction
// ---------------------------------------------------------------------------

enum class SemanticCombine { Artifact, Region };
enum class CombineStrategy { Add, ConcatProject };

struct QueryEmbeddingSet {
    Tensor detection;       // 1 x D_de
    Tensor classification;  // 1 x D_de
    Tensor mask;            // 1 x D_de
    Tensor region;          // 1 x D_de
    Tensor artifact;        // 1 x D_de
};

struct PredictMasksConfig {
    CombineStrategy strategy = CombineStrategy::Add;
    Tensor concat_projection;  // 2*D_de x D_de, ConcatProject only
};

struct PredictedMasks {
    std::vector<BitMask> artifact;
    std::vector<BitMask> region;  // filled only when auxiliary enabled
};

namespace detail {

inline Tensor combine_semantic(const Tensor& concept_row, const Tensor& embed,
                               const PredictMasksConfig& cfg) {
    if (cfg.strategy == CombineStrategy::Add) return add(concept_row, embed);
    const size_t d = concept_row.shape[1];
    Tensor cat({1, 2 * d});
    for (size_t j = 0; j < d; ++j) {
        cat.at2(0, j) = concept_row.at2(0, j);
        cat.at2(0, d + j) = embed.at2(0, j);
    }
    return matmul(cat, cfg.concat_projection);
}

inline BitMask dot_product_mask(const Tensor& pixel_features,
                                const Tensor& mask_embed) {
    const size_t d = pixel_features.shape[0], h = pixel_features.shape[1],
                 w = pixel_features.shape[2];
    if (mask_embed.shape[1] != d)
        throw make_error("DimMismatch", "mask embedding width");
    BitMask m(static_cast<int>(w), static_cast<int>(h));
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            double logit = 0.0;
            for (size_t c = 0; c < d; ++c)
                logit += mask_embed.at2(0, c) * pixel_features.at3(c, y, x);
            m.set(static_cast<int>(x), static_cast<int>(y), logit > 0.0);
        }
    return m;
}

}  // namespace detail

// One mask per [SEG] occurrence. For concept i the semantic embedding is the
// concept row combined with the Artifact (or Region) embedding; the decoder
// runs on a duplicate of image_in with queries [mask; semantic], and the
// logits are the dot product of pixel features with the mask query output.
inline PredictedMasks predict_masks(const Tensor& pixel_features,  // D x H x W
                                    const Tensor& concept_embeds,  // k x D
                                    const QueryEmbeddingSet& embeds,
                                    const Tensor& image_in,  // L_I x D
                                    const DecoderParams& decoder,
                                    bool auxiliary_region = false,
                                    const PredictMasksConfig& cfg = {}) {
    if (pixel_features.shape.size() != 3 || concept_embeds.shape.size() != 2)
        throw make_error("DimMismatch", "predict_masks inputs");
    const size_t d = pixel_features.shape[0];
    if (concept_embeds.shape[0] > 0 && concept_embeds.shape[1] != d)
        throw make_error("DimMismatch", "concept embedding width");

    PredictedMasks out;
    for (size_t i = 0; i < concept_embeds.shape[0]; ++i) {
        Tensor row({1, d});
        for (size_t j = 0; j < d; ++j) row.at2(0, j) = concept_embeds.at2(i, j);
        auto run = [&](const Tensor& semantic_base) {
            Tensor semantic = detail::combine_semantic(row, semantic_base, cfg);
            Tensor queries({2, d});
            for (size_t j = 0; j < d; ++j) {
                queries.at2(0, j) = embeds.mask.at2(0, j);
                queries.at2(1, j) = semantic.at2(0, j);
            }
            DecoderOutput dec = two_way_decoder(image_in, queries, decoder);
            Tensor mask_out({1, d});
            for (size_t j = 0; j < d; ++j) mask_out.at2(0, j) = dec.queries.at2(0, j);
            return detail::dot_product_mask(pixel_features, mask_out);
        };
        out.artifact.push_back(run(embeds.artifact));
        if (auxiliary_region) out.region.push_back(run(embeds.region));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossWeights {
    double aux = 0.2;
    double text = 1.0;
    double bce = 0.5;
    double dice = 2.0;
};

struct LossTerms {
    double bce = 0.0;
    double dice = 0.0;
    std::optional<double> aux_ce;
    std::optional<double> text_nll;
    double total = 0.0;
};

// Mean per-pixel logistic loss on logits.
inline double binary_cross_entropy(const Tensor& logits, const BitMask& gt) {
    if (logits.numel() != gt.size())
        throw make_error("DimMismatch", "bce logits vs gt");
    double sum = 0.0;
    for (size_t i = 0; i < logits.numel(); ++i) {
        double z = logits.data[i];
        double target = gt.at(i) ? 1.0 : 0.0;
        // Numerically stable log(1 + e^-|z|) form.
        sum += std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
    }
    return sum / static_cast<double>(logits.numel());
}

// Soft dice on sigmoid probabilities: 1 - 2*sum(p*g) / (sum(p) + sum(g)).
// Defined as 0 when both sums are zero.
inline double dice_loss(const Tensor& logits, const BitMask& gt) {
    if (logits.numel() != gt.size())
        throw make_error("DimMismatch", "dice logits vs gt");
    double inter = 0.0, denom = 0.0;
    for (size_t i = 0; i < logits.numel(); ++i) {
        double p = sigmoid(logits.data[i]);
        double g = gt.at(i) ? 1.0 : 0.0;
        inter += p * g;
        denom += p + g;
    }
    if (denom == 0.0) return 0.0;
    return 1.0 - 2.0 * inter / denom;
}

// Weighted total over the provided terms; absent terms contribute nothing.
inline LossTerms mask_losses(const Tensor& pred_logits, const BitMask& gt,
                             std::optional<double> aux_ce = {},
                             std::optional<double> text_nll = {},
                             const LossWeights& w = {}) {
    LossTerms t;
    t.bce = binary_cross_entropy(pred_logits, gt);
    t.dice = dice_loss(pred_logits, gt);
    t.aux_ce = aux_ce;
    t.text_nll = text_nll;
    t.total = w.bce * t.bce + w.dice * t.dice;
    if (aux_ce) t.total += w.aux * *aux_ce;
    if (text_nll) t.total += w.text * *text_nll;
    return t;
}

}  // namespace fifa
