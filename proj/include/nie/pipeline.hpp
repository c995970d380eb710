#pragma once

#include <string>
#include <vector>

#include "nie/document.hpp"
#include "nie/encoder.hpp"
#include "nie/head.hpp"
#include "nie/labels.hpp"
#include "nie/model.hpp"
#include "nie/neighborhood.hpp"

namespace nie {

/// Encoder-ready view of one target block: CLS-prefixed target ids,
/// neighborhood ids (already truncated, no CLS), and raw visual features
/// for the kept target tokens.
struct BlockInputs {
    std::size_t block_pos = 0;  // position in reading order
    std::vector<int> target_ids;
    std::vector<char> target_mask;
    std::vector<int> neighbor_ids;
    std::vector<VisualFeatureVector> features;
    std::size_t kept_tokens = 0;
};

inline std::vector<int> encode_block_tokens(const Vocabulary& vocab, const TextBlock& block,
                                            std::size_t budget) {
    std::vector<int> ids;
    std::size_t n = std::min(block.tokens.size(), budget);
    ids.reserve(n);
    for (std::size_t t = 0; t < n; ++t) ids.push_back(vocab.id_of(block.tokens[t].text));
    return ids;
}

inline BlockInputs build_block_inputs(const ModelBundle& model, const VisualDocument& doc,
                                      std::size_t block_pos, double doc_median_font) {
    const TextBlock& block = doc.blocks[block_pos];
    BlockInputs in;
    in.block_pos = block_pos;
    in.kept_tokens = std::min(block.tokens.size(), model.pipe.target_budget);

    in.target_ids.reserve(in.kept_tokens + 1);
    in.target_ids.push_back(Vocabulary::kCls);
    for (std::size_t t = 0; t < in.kept_tokens; ++t)
        in.target_ids.push_back(model.vocab.id_of(block.tokens[t].text));
    in.target_mask.assign(in.target_ids.size(), 0);

    if (model.pipe.baseline == Baseline::Nie && model.pipe.neighborhood.mode != ContextMode::None) {
        auto indices = neighbor_indices(block_pos, doc.blocks.size(), model.pipe.neighborhood);
        auto words = build_neighborhood_text(doc, indices, model.pipe.neighbor_budget);
        in.neighbor_ids = model.vocab.encode(words);
    }

    if (model.pipe.use_visual_features) {
        in.features.reserve(in.kept_tokens);
        for (std::size_t t = 0; t < in.kept_tokens; ++t)
            in.features.push_back(visual_features(doc, block, t, doc_median_font));
    }
    return in;
}

/// Block-merging pre-processing with the model's threshold ratio.
inline VisualDocument prepare_document(const ModelBundle& model, VisualDocument doc) {
    return merge_blocks(std::move(doc), model.pipe.merge_alpha);
}

/// Mean of all blocks' CLS vectors; the simplified stand-in for the global
/// context baseline.
inline Tensor global_context_vector(const EncoderParams& params, const EncoderConfig& cfg,
                                    const Vocabulary& vocab, const VisualDocument& doc,
                                    std::size_t token_budget) {
    if (doc.blocks.empty()) throw std::invalid_argument("global_context_vector: document has no blocks");
    Tensor mean{cfg.d2()};
    for (const auto& block : doc.blocks) {
        std::vector<int> ids = encode_block_tokens(vocab, block, token_budget);
        Tensor c = context_vector(params, cfg, ids);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += c[i];
    }
    for (double& v : mean.data) v /= static_cast<double>(doc.blocks.size());
    return mean;
}

/// Predict entity spans for a document that already went through
/// prepare_document. Spans reference the prepared document's block ids.
inline std::vector<EntitySpan> predict_prepared(const ModelBundle& model, const VisualDocument& doc) {
    const double median_font = median_token_font(doc);
    const std::size_t d1 = model.enc_cfg.d1, d2 = model.enc_cfg.d2(), d3 = model.enc_cfg.d3;

    Tensor global_ctx;
    if (model.pipe.baseline == Baseline::GlobalContext)
        global_ctx = global_context_vector(model.enc, model.enc_cfg, model.vocab, doc,
                                           model.pipe.neighbor_budget);

    std::vector<EntitySpan> all_spans;
    const Tensor zero_features{d3};
    for (std::size_t p = 0; p < doc.blocks.size(); ++p) {
        BlockInputs in = build_block_inputs(model, doc, p, median_font);

        Tensor target = encode(model.enc, model.enc_cfg, in.target_ids, in.target_mask);

        Tensor context{d2};
        if (model.pipe.baseline == Baseline::GlobalContext) {
            context = global_ctx;
        } else if (model.pipe.baseline == Baseline::Nie) {
            context = context_vector(model.enc, model.enc_cfg, in.neighbor_ids);
        }

        std::vector<int> labels(in.kept_tokens, EntityClassSet::kOutside);
        Tensor token_vec{d1};
        for (std::size_t t = 0; t < in.kept_tokens; ++t) {
            for (std::size_t c = 0; c < d1; ++c) token_vec[c] = target.at(t + 1, c);
            Tensor feats = model.pipe.use_visual_features ? project_features(model.head, in.features[t])
                                                          : zero_features;
            Tensor fused = fuse(token_vec, context, feats);
            labels[t] = static_cast<int>(classify(model.head, fused).second);
        }

        for (EntitySpan& span : decode_iob(labels, model.classes, doc.blocks[p].id))
            all_spans.push_back(std::move(span));
    }
    return all_spans;
}

inline std::vector<EntitySpan> predict_document(const ModelBundle& model, VisualDocument doc) {
    return predict_prepared(model, prepare_document(model, std::move(doc)));
}

}  // namespace nie
