#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nie/eval.hpp"
#include "nie/log.hpp"
#include "nie/model.hpp"
#include "nie/pipeline.hpp"
#include "nie/rng.hpp"

namespace nie {

struct TrainConfig {
    std::size_t epochs = 8;
    std::size_t batch_size = 16;  // in blocks
    double learning_rate = 3e-4;
    std::uint64_t seed = 42;
    NeighborhoodSpec neighborhood{ContextMode::Bottom, 4};
    bool use_visual_features = true;
    Baseline baseline = Baseline::Nie;
    double merge_alpha = 0.5;
    std::size_t target_budget = 64;
    std::size_t neighbor_budget = 127;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (baseline == Baseline::NoContext && neighborhood.mode != ContextMode::None)
            throw std::invalid_argument("TrainConfig: no_context baseline conflicts with a context mode");
    }
};

struct Corpus {
    std::vector<VisualDocument> train, dev, test;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_micro_f1 = 0.0;
};

struct TrainResult {
    ModelBundle model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
};

/// Gradient buffers shaped like the trainable parameters.
struct ModelGrads {
    EncoderParams enc;
    HeadParams head;

    static ModelGrads shaped(const EncoderConfig& cfg, const EntityClassSet& classes) {
        return {EncoderParams::shaped(cfg), HeadParams::shaped(cfg, classes)};
    }
    void zero() {
        enc.visit([](const std::string&, Tensor& t) { t.zero(); });
        head.visit([](const std::string&, Tensor& t) { t.zero(); });
    }
};

namespace detail {

inline std::vector<Tensor*> tensor_list(EncoderParams& e, HeadParams& h) {
    std::vector<Tensor*> out;
    e.visit([&out](const std::string&, Tensor& t) { out.push_back(&t); });
    h.visit([&out](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

}  // namespace detail

/// Adam with linear warmup over the first 10% of steps, then constant lr.
class AdamOptimizer {
public:
    AdamOptimizer(const EncoderConfig& cfg, const EntityClassSet& classes, double lr,
                  std::size_t total_steps)
        : lr_(lr),
          warmup_steps_(std::max<std::size_t>(1, total_steps / 10)),
          m_(ModelGrads::shaped(cfg, classes)),
          v_(ModelGrads::shaped(cfg, classes)) {}

    /// Applies grads scaled by grad_scale (1 / token count of the batch).
    void step(ModelBundle& model, ModelGrads& grads, double grad_scale) {
        ++step_;
        const double lr_t =
            lr_ * std::min(1.0, static_cast<double>(step_) / static_cast<double>(warmup_steps_));
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));

        auto params = detail::tensor_list(model.enc, model.head);
        auto gs = detail::tensor_list(grads.enc, grads.head);
        auto ms = detail::tensor_list(m_.enc, m_.head);
        auto vs = detail::tensor_list(v_.enc, v_.head);
        for (std::size_t ti = 0; ti < params.size(); ++ti) {
            Tensor& p = *params[ti];
            const Tensor& g = *gs[ti];
            Tensor& m = *ms[ti];
            Tensor& v = *vs[ti];
            for (std::size_t i = 0; i < p.size(); ++i) {
                double gi = g[i] * grad_scale;
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
                double mhat = m[i] / bc1;
                double vhat = v[i] / bc2;
                p[i] -= lr_t * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::size_t warmup_steps_;
    std::size_t step_ = 0;
    ModelGrads m_, v_;
};

namespace detail {

struct BlockExample {
    std::size_t doc_index = 0;
    BlockInputs inputs;
    std::vector<int> labels;  // truncated to kept_tokens
};

inline std::vector<EntitySpan> spans_of_block(const VisualDocument& doc, int block_id) {
    std::vector<EntitySpan> out;
    if (doc.gold_spans)
        for (const auto& s : *doc.gold_spans)
            if (s.block_id == block_id) out.push_back(s);
    return out;
}

/// Cross-entropy and gradients for one target block given a precomputed
/// context vector. Returns summed CE; token gradients for the context go to
/// d_context (accumulated), everything else straight into grads.
inline double block_token_loss(const ModelBundle& model, const BlockExample& ex, const Tensor& context,
                               const Tensor& target_out, ModelGrads& grads, Tensor& d_target_out,
                               Tensor& d_context) {
    const std::size_t d1 = model.enc_cfg.d1, d2 = model.enc_cfg.d2(), d3 = model.enc_cfg.d3;
    const std::size_t l = model.classes.label_count();
    const bool features_on = model.pipe.use_visual_features;

    double loss = 0.0;
    Tensor fused{model.enc_cfg.fused_dim()};
    std::vector<double> probs(l);
    for (std::size_t t = 0; t < ex.inputs.kept_tokens; ++t) {
        const VisualFeatureVector raw =
            features_on ? ex.inputs.features[t] : VisualFeatureVector{0.0, 0.0};
        for (std::size_t c = 0; c < d1; ++c) fused[c] = target_out.at(t + 1, c);
        for (std::size_t c = 0; c < d2; ++c) fused[d1 + c] = context[c];
        if (features_on) {
            for (std::size_t c = 0; c < d3; ++c)
                fused[d1 + d2 + c] =
                    raw.rel_font * model.head.feat_w.at(0, c) + raw.rel_y * model.head.feat_w.at(1, c) +
                    model.head.feat_b[c];
        } else {
            for (std::size_t c = 0; c < d3; ++c) fused[d1 + d2 + c] = 0.0;
        }

        // log-softmax cross entropy
        double mx = -1e300;
        for (std::size_t j = 0; j < l; ++j) {
            double acc = model.head.cls_b[j];
            for (std::size_t i = 0; i < fused.size(); ++i) acc += fused[i] * model.head.cls_w.at(i, j);
            probs[j] = acc;
            mx = std::max(mx, acc);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
            probs[j] = std::exp(probs[j] - mx);
            denom += probs[j];
        }
        const int gold = ex.labels[t];
        loss += -(std::log(probs[static_cast<std::size_t>(gold)] / denom));

        // dlogits = softmax - onehot
        for (std::size_t j = 0; j < l; ++j) probs[j] = probs[j] / denom;
        probs[static_cast<std::size_t>(gold)] -= 1.0;

        for (std::size_t j = 0; j < l; ++j) {
            const double dj = probs[j];
            grads.head.cls_b[j] += dj;
            for (std::size_t i = 0; i < fused.size(); ++i) grads.head.cls_w.at(i, j) += fused[i] * dj;
        }
        // d_fused = cls_w * dlogits
        for (std::size_t i = 0; i < fused.size(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < l; ++j) acc += model.head.cls_w.at(i, j) * probs[j];
            if (i < d1) {
                d_target_out.at(t + 1, i) += acc;
            } else if (i < d1 + d2) {
                d_context[i - d1] += acc;
            } else if (features_on) {
                const std::size_t c = i - d1 - d2;
                grads.head.feat_w.at(0, c) += raw.rel_font * acc;
                grads.head.feat_w.at(1, c) += raw.rel_y * acc;
                grads.head.feat_b[c] += acc;
            }
        }
    }
    return loss;
}

/// Forward + backward for one block in the nie / no-context arms.
inline double block_forward_backward(const ModelBundle& model, const BlockExample& ex, ModelGrads& grads) {
    EncodeTrace target_trace;
    Tensor target_out = encode(model.enc, model.enc_cfg, ex.inputs.target_ids, ex.inputs.target_mask,
                               &target_trace);

    const bool has_neighborhood =
        model.pipe.baseline == Baseline::Nie && !ex.inputs.neighbor_ids.empty();
    EncodeTrace nb_trace;
    Tensor context{model.enc_cfg.d2()};
    if (has_neighborhood) {
        std::vector<int> ids;
        ids.reserve(ex.inputs.neighbor_ids.size() + 1);
        ids.push_back(Vocabulary::kCls);
        ids.insert(ids.end(), ex.inputs.neighbor_ids.begin(), ex.inputs.neighbor_ids.end());
        std::vector<char> mask(ids.size(), 0);
        Tensor nb_out = encode(model.enc, model.enc_cfg, ids, mask, &nb_trace);
        for (std::size_t c = 0; c < context.size(); ++c) context[c] = nb_out.at(0, c);
    }

    Tensor d_target_out{target_out.rows(), target_out.cols()};
    Tensor d_context{model.enc_cfg.d2()};
    double loss = block_token_loss(model, ex, context, target_out, grads, d_target_out, d_context);

    encode_backward(model.enc, model.enc_cfg, target_trace, d_target_out, grads.enc);
    if (has_neighborhood) {
        Tensor d_nb{static_cast<std::size_t>(nb_trace.ids.size()), model.enc_cfg.d1};
        for (std::size_t c = 0; c < model.enc_cfg.d2(); ++c) d_nb.at(0, c) = d_context[c];
        encode_backward(model.enc, model.enc_cfg, nb_trace, d_nb, grads.enc);
    }
    return loss;
}

/// Forward + backward for all blocks of one document in the global-context
/// arm. The mean-CLS context is shared, so context gradients are pooled and
/// pushed through every block's CLS pass once.
inline double doc_forward_backward_global(const ModelBundle& model, const VisualDocument& doc,
                                          const std::vector<const BlockExample*>& examples,
                                          ModelGrads& grads) {
    const std::size_t B = doc.blocks.size();
    std::vector<EncodeTrace> cls_traces(B);
    Tensor context{model.enc_cfg.d2()};
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<int> ids;
        ids.push_back(Vocabulary::kCls);
        for (int id : encode_block_tokens(model.vocab, doc.blocks[b], model.pipe.neighbor_budget))
            ids.push_back(id);
        std::vector<char> mask(ids.size(), 0);
        Tensor out = encode(model.enc, model.enc_cfg, ids, mask, &cls_traces[b]);
        for (std::size_t c = 0; c < context.size(); ++c) context[c] += out.at(0, c);
    }
    for (double& v : context.data) v /= static_cast<double>(B);

    double loss = 0.0;
    Tensor d_context{model.enc_cfg.d2()};
    for (const BlockExample* ex : examples) {
        EncodeTrace target_trace;
        Tensor target_out = encode(model.enc, model.enc_cfg, ex->inputs.target_ids,
                                   ex->inputs.target_mask, &target_trace);
        Tensor d_target_out{target_out.rows(), target_out.cols()};
        loss += block_token_loss(model, *ex, context, target_out, grads, d_target_out, d_context);
        encode_backward(model.enc, model.enc_cfg, target_trace, d_target_out, grads.enc);
    }

    for (std::size_t b = 0; b < B; ++b) {
        Tensor d_cls{static_cast<std::size_t>(cls_traces[b].ids.size()), model.enc_cfg.d1};
        for (std::size_t c = 0; c < model.enc_cfg.d2(); ++c)
            d_cls.at(0, c) = d_context[c] / static_cast<double>(B);
        encode_backward(model.enc, model.enc_cfg, cls_traces[b], d_cls, grads.enc);
    }
    return loss;
}

}  // namespace detail

/// Mean of all blocks' CLS vectors (inference-side helper, mirrors
/// global_context_vector but under the training module's name).
inline Tensor global_context_baseline(const VisualDocument& doc, const EncoderParams& params,
                                      const EncoderConfig& cfg, const Vocabulary& vocab,
                                      std::size_t token_budget = 127) {
    return global_context_vector(params, cfg, vocab, doc, token_budget);
}

/// End-to-end training. Deterministic given the seed: fixed example order
/// per epoch via the deterministic RNG, single-threaded accumulation.
/// Returns the epoch with the best dev micro-F1 (earliest on ties).
inline TrainResult train(const Corpus& corpus, EncoderConfig enc_cfg, const TrainConfig& cfg) {
    cfg.validate();
    if (corpus.train.empty()) throw std::invalid_argument("train: empty train split");

    // Pre-processing: merge blocks, drop degenerate documents.
    std::vector<VisualDocument> train_docs, dev_docs;
    for (const auto& d : corpus.train) {
        if (d.blocks.empty()) {
            log_warn("skipping document with no blocks: " + d.doc_id);
            continue;
        }
        train_docs.push_back(merge_blocks(d, cfg.merge_alpha));
    }
    for (const auto& d : corpus.dev)
        if (!d.blocks.empty()) dev_docs.push_back(merge_blocks(d, cfg.merge_alpha));
    if (train_docs.empty()) throw std::invalid_argument("train: no usable training documents");

    Vocabulary vocab = Vocabulary::build(train_docs);

    EntityClassSet classes = [&corpus]() {
        // Classes come from the gold annotations across the whole corpus.
        std::vector<std::string> names;
        auto add_from = [&names](const std::vector<VisualDocument>& docs) {
            for (const auto& d : docs)
                if (d.gold_spans)
                    for (const auto& s : *d.gold_spans)
                        if (std::find(names.begin(), names.end(), s.cls) == names.end())
                            names.push_back(s.cls);
        };
        add_from(corpus.train);
        add_from(corpus.dev);
        add_from(corpus.test);
        if (names.empty()) names.push_back("entity");
        std::sort(names.begin(), names.end());
        return EntityClassSet(names);
    }();

    ModelBundle model;
    model.enc_cfg = enc_cfg;
    model.enc_cfg.vocab_size = vocab.size();
    model.enc_cfg.validate();
    model.pipe.neighborhood = cfg.neighborhood;
    model.pipe.use_visual_features = cfg.use_visual_features;
    model.pipe.baseline = cfg.baseline;
    model.pipe.merge_alpha = cfg.merge_alpha;
    model.pipe.target_budget = cfg.target_budget;
    model.pipe.neighbor_budget = cfg.neighbor_budget;
    model.pipe.canonicalize(model.enc_cfg.max_len);
    model.seed = cfg.seed;
    model.vocab = std::move(vocab);
    model.classes = classes;

    DetRng init_rng(cfg.seed);
    model.enc = EncoderParams::init(model.enc_cfg, init_rng);
    model.head = HeadParams::init(model.enc_cfg, model.classes, init_rng);

    // Examples are static across epochs: ids, features and labels per block.
    std::vector<detail::BlockExample> examples;
    for (std::size_t di = 0; di < train_docs.size(); ++di) {
        const auto& doc = train_docs[di];
        const double median_font = median_token_font(doc);
        for (std::size_t p = 0; p < doc.blocks.size(); ++p) {
            detail::BlockExample ex;
            ex.doc_index = di;
            ex.inputs = build_block_inputs(model, doc, p, median_font);
            auto spans = detail::spans_of_block(doc, doc.blocks[p].id);
            auto full = encode_iob(spans, doc.blocks[p].tokens.size(), model.classes);
            ex.labels.assign(full.begin(), full.begin() + static_cast<long>(ex.inputs.kept_tokens));
            examples.push_back(std::move(ex));
        }
    }

    const std::size_t steps_per_epoch = (examples.size() + cfg.batch_size - 1) / cfg.batch_size;
    AdamOptimizer opt(model.enc_cfg, model.classes, cfg.learning_rate, cfg.epochs * steps_per_epoch);
    ModelGrads grads = ModelGrads::shaped(model.enc_cfg, model.classes);

    std::vector<std::vector<EntitySpan>> dev_gold;
    dev_gold.reserve(dev_docs.size());
    for (const auto& d : dev_docs)
        dev_gold.push_back(d.gold_spans.value_or(std::vector<EntitySpan>{}));

    TrainResult result;
    double best_f1 = -1.0;
    EncoderParams best_enc;
    HeadParams best_head;

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const bool global_arm = cfg.baseline == Baseline::GlobalContext;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        DetRng shuffle_rng(cfg.seed, 0x1000 + epoch);
        double epoch_loss = 0.0;
        std::size_t epoch_tokens = 0;

        if (!global_arm) {
            shuffle_rng.shuffle(order);
            std::size_t i = 0;
            while (i < order.size()) {
                grads.zero();
                double batch_loss = 0.0;
                std::size_t batch_tokens = 0;
                std::size_t end = std::min(order.size(), i + cfg.batch_size);
                for (; i < end; ++i) {
                    const auto& ex = examples[order[i]];
                    batch_loss += detail::block_forward_backward(model, ex, grads);
                    batch_tokens += ex.inputs.kept_tokens;
                }
                if (batch_tokens == 0) continue;
                if (!std::isfinite(batch_loss))
                    throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
                opt.step(model, grads, 1.0 / static_cast<double>(batch_tokens));
                epoch_loss += batch_loss;
                epoch_tokens += batch_tokens;
            }
        } else {
            // Whole documents are the work unit; batches gather documents
            // until batch_size blocks are covered.
            std::vector<std::size_t> doc_order(train_docs.size());
            for (std::size_t i = 0; i < doc_order.size(); ++i) doc_order[i] = i;
            shuffle_rng.shuffle(doc_order);

            std::vector<std::vector<const detail::BlockExample*>> by_doc(train_docs.size());
            for (const auto& ex : examples) by_doc[ex.doc_index].push_back(&ex);

            std::size_t i = 0;
            while (i < doc_order.size()) {
                grads.zero();
                double batch_loss = 0.0;
                std::size_t batch_tokens = 0;
                while (i < doc_order.size() && batch_tokens < cfg.batch_size * 4) {
                    std::size_t di = doc_order[i++];
                    batch_loss += detail::doc_forward_backward_global(model, train_docs[di], by_doc[di],
                                                                      grads);
                    for (const auto* ex : by_doc[di]) batch_tokens += ex->inputs.kept_tokens;
                    if (by_doc[di].size() >= cfg.batch_size) break;
                }
                if (batch_tokens == 0) continue;
                if (!std::isfinite(batch_loss))
                    throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
                opt.step(model, grads, 1.0 / static_cast<double>(batch_tokens));
                epoch_loss += batch_loss;
                epoch_tokens += batch_tokens;
            }
        }

        // Dev selection on span-level micro F1.
        std::vector<std::vector<EntitySpan>> dev_pred;
        dev_pred.reserve(dev_docs.size());
        for (const auto& d : dev_docs) dev_pred.push_back(predict_prepared(model, d));
        double dev_f1 = dev_docs.empty() ? 0.0 : score(dev_gold, dev_pred, model.classes).micro_f1;

        EpochLog logrec;
        logrec.epoch = epoch;
        logrec.train_loss = epoch_tokens == 0 ? 0.0 : epoch_loss / static_cast<double>(epoch_tokens);
        logrec.dev_micro_f1 = dev_f1;
        result.log.push_back(logrec);
        log_info("epoch " + std::to_string(epoch) + " train_loss " + std::to_string(logrec.train_loss) +
                 " dev_micro_f1 " + std::to_string(dev_f1));

        if (dev_f1 > best_f1) {
            best_f1 = dev_f1;
            best_enc = model.enc;
            best_head = model.head;
            result.best_epoch = epoch;
        }
    }

    model.enc = std::move(best_enc);
    model.head = std::move(best_head);
    result.model = std::move(model);
    return result;
}

/// One fine-tuning epoch with quantization in the forward pass
/// (straight-through estimator): gradients are computed at the
/// quantize-dequantized weights and applied to the float master weights.
inline void qat_finetune(ModelBundle& model, const std::vector<VisualDocument>& train_docs_raw,
                         std::size_t batch_size = 16, double lr = 1e-4) {
    std::vector<VisualDocument> docs;
    for (const auto& d : train_docs_raw)
        if (!d.blocks.empty()) docs.push_back(merge_blocks(d, model.pipe.merge_alpha));
    if (docs.empty()) throw std::invalid_argument("qat_finetune: no usable documents");

    std::vector<detail::BlockExample> examples;
    for (std::size_t di = 0; di < docs.size(); ++di) {
        const double median_font = median_token_font(docs[di]);
        for (std::size_t p = 0; p < docs[di].blocks.size(); ++p) {
            detail::BlockExample ex;
            ex.doc_index = di;
            ex.inputs = build_block_inputs(model, docs[di], p, median_font);
            auto spans = detail::spans_of_block(docs[di], docs[di].blocks[p].id);
            auto full = encode_iob(spans, docs[di].blocks[p].tokens.size(), model.classes);
            ex.labels.assign(full.begin(), full.begin() + static_cast<long>(ex.inputs.kept_tokens));
            examples.push_back(std::move(ex));
        }
    }

    const std::size_t steps = (examples.size() + batch_size - 1) / batch_size;
    AdamOptimizer opt(model.enc_cfg, model.classes, lr, steps);
    ModelGrads grads = ModelGrads::shaped(model.enc_cfg, model.classes);

    DetRng rng(model.seed, 0x9a7f);
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::size_t i = 0;
    while (i < order.size()) {
        // Quantize-dequantize snapshot for the forward/backward pass.
        ModelBundle qdq = model;
        qdq.visit_tensors([](const std::string&, Tensor& t) { t = dequantize_tensor(quantize_tensor(t)); });

        grads.zero();
        double batch_loss = 0.0;
        std::size_t batch_tokens = 0;
        std::size_t end = std::min(order.size(), i + batch_size);
        for (; i < end; ++i) {
            const auto& ex = examples[order[i]];
            batch_loss += detail::block_forward_backward(qdq, ex, grads);
            batch_tokens += ex.inputs.kept_tokens;
        }
        if (batch_tokens == 0) continue;
        if (!std::isfinite(batch_loss)) throw std::runtime_error("qat_finetune: non-finite loss");
        opt.step(model, grads, 1.0 / static_cast<double>(batch_tokens));
    }
}

}  // namespace nie
