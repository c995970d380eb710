#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "nie/document.hpp"
#include "nie/encoder.hpp"
#include "nie/labels.hpp"
#include "nie/rng.hpp"
#include "nie/tensor.hpp"

namespace nie {

/// Raw per-token visual signals before projection: font size relative to
/// the document median token font, and block top y relative to page height.
struct VisualFeatureVector {
    double rel_font = 1.0;
    double rel_y = 0.0;
};

inline double median_token_font(const VisualDocument& doc) {
    std::vector<double> fonts;
    for (const auto& block : doc.blocks)
        for (const auto& tok : block.tokens) fonts.push_back(tok.font_size);
    if (fonts.empty()) return 1.0;
    std::sort(fonts.begin(), fonts.end());
    std::size_t n = fonts.size();
    return n % 2 == 1 ? fonts[n / 2] : 0.5 * (fonts[n / 2 - 1] + fonts[n / 2]);
}

inline VisualFeatureVector visual_features(const VisualDocument& doc, const TextBlock& block,
                                           std::size_t token_index, double doc_median_font) {
    if (token_index >= block.tokens.size())
        throw std::invalid_argument("visual_features: token index out of range");
    VisualFeatureVector f;
    f.rel_font = doc_median_font > 0.0 ? block.tokens[token_index].font_size / doc_median_font : 1.0;
    f.rel_y = doc.page_height > 0 ? static_cast<double>(block.bbox.y) / static_cast<double>(doc.page_height)
                                  : 0.0;
    return f;
}

inline VisualFeatureVector visual_features(const VisualDocument& doc, const TextBlock& block,
                                           std::size_t token_index) {
    return visual_features(doc, block, token_index, median_token_font(doc));
}

/// Feature projection (2 -> d3) and the linear IOB classifier
/// ((d1+d2+d3) -> 2*eta+1).
struct HeadParams {
    Tensor feat_w;  // 2 x d3
    Tensor feat_b;  // d3
    Tensor cls_w;   // (d1+d2+d3) x l
    Tensor cls_b;   // l

    static HeadParams shaped(const EncoderConfig& cfg, const EntityClassSet& classes) {
        HeadParams h;
        h.feat_w = Tensor{2, cfg.d3};
        h.feat_b = Tensor{cfg.d3};
        h.cls_w = Tensor{cfg.fused_dim(), classes.label_count()};
        h.cls_b = Tensor{classes.label_count()};
        return h;
    }

    static HeadParams init(const EncoderConfig& cfg, const EntityClassSet& classes, DetRng& rng) {
        HeadParams h = shaped(cfg, classes);
        for (double& v : h.feat_w.data) v = 0.02 * rng.gaussian();
        for (double& v : h.cls_w.data) v = 0.02 * rng.gaussian();
        return h;
    }

    template <typename F>
    void visit(F&& f) {
        f("feat_w", feat_w);
        f("feat_b", feat_b);
        f("cls_w", cls_w);
        f("cls_b", cls_b);
    }

    template <typename F>
    void visit(F&& f) const {
        const_cast<HeadParams*>(this)->visit(
            [&f](const std::string& name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
    }
};

/// Affine map of the raw feature pair into the d3-dimensional space.
inline Tensor project_features(const HeadParams& head, const VisualFeatureVector& raw) {
    const std::size_t d3 = head.feat_b.size();
    Tensor out{d3};
    for (std::size_t j = 0; j < d3; ++j)
        out[j] = raw.rel_font * head.feat_w.at(0, j) + raw.rel_y * head.feat_w.at(1, j) + head.feat_b[j];
    return out;
}

/// Concatenation in the fixed order token embedding, context, features.
inline Tensor fuse(const Tensor& token_embedding, const Tensor& context, const Tensor& features) {
    Tensor out{token_embedding.size() + context.size() + features.size()};
    std::size_t o = 0;
    for (double v : token_embedding.data) out[o++] = v;
    for (double v : context.data) out[o++] = v;
    for (double v : features.data) out[o++] = v;
    return out;
}

/// Logits plus argmax with lowest-index tie-break.
inline std::pair<Tensor, std::size_t> classify(const HeadParams& head, const Tensor& fused) {
    if (fused.size() != head.cls_w.rows())
        throw std::invalid_argument("classify: fused vector length does not match classifier");
    const std::size_t l = head.cls_b.size();
    Tensor logits{l};
    for (std::size_t j = 0; j < l; ++j) {
        double acc = head.cls_b[j];
        for (std::size_t i = 0; i < fused.size(); ++i) acc += fused[i] * head.cls_w.at(i, j);
        logits[j] = acc;
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < l; ++j)
        if (logits[j] > logits[best]) best = j;
    return {std::move(logits), best};
}

}  // namespace nie
