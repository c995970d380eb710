#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nie/rng.hpp"
#include "nie/tensor.hpp"
#include "nie/vocab.hpp"

namespace nie {

/// Encoder hyperparameters. d2 (context dimension) equals d1 because the
/// same encoder produces both token and neighborhood embeddings.
struct EncoderConfig {
    std::size_t d1 = 128;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t max_len = 128;   // context budget incl. the CLS position
    std::size_t d3 = 16;         // visual feature embedding dimension
    std::size_t vocab_size = 4;  // set after vocabulary construction

    std::size_t d2() const { return d1; }
    std::size_t d_ff() const { return 4 * d1; }
    std::size_t head_dim() const { return d1 / heads; }
    std::size_t fused_dim() const { return d1 + d2() + d3; }

    void validate() const {
        if (d1 == 0 || heads == 0 || d1 % heads != 0)
            throw std::invalid_argument("EncoderConfig: d1 must be a positive multiple of heads");
        if (max_len < 2) throw std::invalid_argument("EncoderConfig: max_len must be >= 2");
        if (layers == 0) throw std::invalid_argument("EncoderConfig: needs at least one layer");
        if (vocab_size < 4) throw std::invalid_argument("EncoderConfig: vocab_size must cover special ids");
    }

    static EncoderConfig preset(const std::string& name) {
        EncoderConfig c;
        if (name == "micro") {
            c.d1 = 32; c.layers = 2; c.heads = 2; c.max_len = 64; c.d3 = 8;
        } else if (name == "tiny") {
            c.d1 = 128; c.layers = 2; c.heads = 4; c.max_len = 128; c.d3 = 16;
        } else if (name == "small") {
            c.d1 = 256; c.layers = 4; c.heads = 8; c.max_len = 128; c.d3 = 16;
        } else {
            throw std::invalid_argument("unknown encoder preset: " + name);
        }
        return c;
    }

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct EncoderLayerParams {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor w1, b1, w2, b2;
};

/// All trainable encoder tensors. visit() enumerates them in a fixed order;
/// that order defines the model file layout and the optimizer state layout.
struct EncoderParams {
    Tensor tok_embed;  // vocab_size x d1
    Tensor pos_embed;  // max_len x d1
    std::vector<EncoderLayerParams> layers;
    Tensor lnf_g, lnf_b;

    static EncoderParams shaped(const EncoderConfig& cfg) {
        cfg.validate();
        EncoderParams p;
        p.tok_embed = Tensor{cfg.vocab_size, cfg.d1};
        p.pos_embed = Tensor{cfg.max_len, cfg.d1};
        p.layers.resize(cfg.layers);
        for (auto& l : p.layers) {
            l.ln1_g = Tensor{cfg.d1};
            l.ln1_b = Tensor{cfg.d1};
            l.wq = Tensor{cfg.d1, cfg.d1};
            l.bq = Tensor{cfg.d1};
            l.wk = Tensor{cfg.d1, cfg.d1};
            l.bk = Tensor{cfg.d1};
            l.wv = Tensor{cfg.d1, cfg.d1};
            l.bv = Tensor{cfg.d1};
            l.wo = Tensor{cfg.d1, cfg.d1};
            l.bo = Tensor{cfg.d1};
            l.ln2_g = Tensor{cfg.d1};
            l.ln2_b = Tensor{cfg.d1};
            l.w1 = Tensor{cfg.d1, cfg.d_ff()};
            l.b1 = Tensor{cfg.d_ff()};
            l.w2 = Tensor{cfg.d_ff(), cfg.d1};
            l.b2 = Tensor{cfg.d1};
        }
        p.lnf_g = Tensor{cfg.d1};
        p.lnf_b = Tensor{cfg.d1};
        return p;
    }

    static EncoderParams init(const EncoderConfig& cfg, DetRng& rng) {
        EncoderParams p = shaped(cfg);
        auto gauss = [&rng](Tensor& t, double std_dev) {
            for (double& v : t.data) v = std_dev * rng.gaussian();
        };
        gauss(p.tok_embed, 0.02);
        gauss(p.pos_embed, 0.02);
        for (auto& l : p.layers) {
            std::fill(l.ln1_g.data.begin(), l.ln1_g.data.end(), 1.0);
            gauss(l.wq, 0.02);
            gauss(l.wk, 0.02);
            gauss(l.wv, 0.02);
            gauss(l.wo, 0.02);
            std::fill(l.ln2_g.data.begin(), l.ln2_g.data.end(), 1.0);
            gauss(l.w1, 0.02);
            gauss(l.w2, 0.02);
        }
        std::fill(p.lnf_g.data.begin(), p.lnf_g.data.end(), 1.0);
        return p;
    }

    template <typename F>
    void visit(F&& f) {
        f("tok_embed", tok_embed);
        f("pos_embed", pos_embed);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto& l = layers[i];
            const std::string p = "layer" + std::to_string(i) + ".";
            f(p + "ln1_g", l.ln1_g);
            f(p + "ln1_b", l.ln1_b);
            f(p + "wq", l.wq);
            f(p + "bq", l.bq);
            f(p + "wk", l.wk);
            f(p + "bk", l.bk);
            f(p + "wv", l.wv);
            f(p + "bv", l.bv);
            f(p + "wo", l.wo);
            f(p + "bo", l.bo);
            f(p + "ln2_g", l.ln2_g);
            f(p + "ln2_b", l.ln2_b);
            f(p + "w1", l.w1);
            f(p + "b1", l.b1);
            f(p + "w2", l.w2);
            f(p + "b2", l.b2);
        }
        f("lnf_g", lnf_g);
        f("lnf_b", lnf_b);
    }

    template <typename F>
    void visit(F&& f) const {
        const_cast<EncoderParams*>(this)->visit(
            [&f](const std::string& name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
    }
};

namespace nn {

constexpr double kLayerNormEps = 1e-5;
constexpr double kMaskFill = -1e30;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244)); }

inline double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * 0.7071067811865475244)) +
           x * std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

/// Row-wise layer norm. Caches mean and reciprocal std per row.
inline void layernorm_forward(const Tensor& x, const Tensor& g, const Tensor& b, Tensor& y, Tensor& mean,
                              Tensor& rstd) {
    const std::size_t rows = x.rows(), cols = x.cols();
    y = Tensor{rows, cols};
    mean = Tensor{rows};
    rstd = Tensor{rows};
    for (std::size_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mu += x.at(r, c);
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            double d = x.at(r, c) - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        double rs = 1.0 / std::sqrt(var + kLayerNormEps);
        mean[r] = mu;
        rstd[r] = rs;
        for (std::size_t c = 0; c < cols; ++c)
            y.at(r, c) = g[c] * ((x.at(r, c) - mu) * rs) + b[c];
    }
}

/// dx accumulated into dst (+=); dg/db accumulated into their grads.
inline void layernorm_backward(const Tensor& x, const Tensor& g, const Tensor& mean, const Tensor& rstd,
                               const Tensor& dy, Tensor& dx, Tensor& dg, Tensor& db) {
    const std::size_t rows = x.rows(), cols = x.cols();
    const double inv_n = 1.0 / static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            double xh = (x.at(r, c) - mean[r]) * rstd[r];
            double dxh = dy.at(r, c) * g[c];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh;
            dg[c] += dy.at(r, c) * xh;
            db[c] += dy.at(r, c);
        }
        for (std::size_t c = 0; c < cols; ++c) {
            double xh = (x.at(r, c) - mean[r]) * rstd[r];
            double dxh = dy.at(r, c) * g[c];
            dx.at(r, c) += rstd[r] * (dxh - inv_n * sum_dxh - xh * inv_n * sum_dxh_xh);
        }
    }
}

}  // namespace nn

struct EncoderLayerTrace {
    Tensor x_in;                      // S x d1
    Tensor ln1_out, ln1_mean, ln1_rstd;
    Tensor q, k, v;                   // S x d1
    Tensor att;                       // heads x S x S softmax probabilities
    Tensor head_mix;                  // S x d1
    Tensor x_mid;                     // after attention residual
    Tensor ln2_out, ln2_mean, ln2_rstd;
    Tensor ffn_pre, ffn_act;          // S x d_ff
};

struct EncodeTrace {
    std::vector<int> ids;
    std::vector<char> pad_mask;
    Tensor x0;
    std::vector<EncoderLayerTrace> layers;
    Tensor x_final;                   // input to the final layer norm
    Tensor lnf_mean, lnf_rstd;
    Tensor out;                       // S x d1
};

/// Forward pass over a CLS-prefixed token id sequence. pad_mask[i] true
/// marks a PAD position; masked positions are excluded from attention as
/// keys, so appending PAD never changes other rows. Returns S x d1.
inline Tensor encode(const EncoderParams& params, const EncoderConfig& cfg, const std::vector<int>& ids,
                     const std::vector<char>& pad_mask, EncodeTrace* trace = nullptr) {
    const std::size_t S = ids.size();
    if (S == 0 || S > cfg.max_len)
        throw std::invalid_argument("encode: sequence length must be in [1, max_len]");
    if (pad_mask.size() != S) throw std::invalid_argument("encode: pad mask length mismatch");
    if (ids[0] != Vocabulary::kCls || pad_mask[0])
        throw std::invalid_argument("encode: position 0 must be a non-pad CLS");
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
            throw std::invalid_argument("encode: token id out of vocabulary range");

    const std::size_t d1 = cfg.d1, H = cfg.heads, dh = cfg.head_dim(), dff = cfg.d_ff();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor x{S, d1};
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t c = 0; c < d1; ++c)
            x.at(i, c) = params.tok_embed.at(static_cast<std::size_t>(ids[i]), c) + params.pos_embed.at(i, c);

    if (trace) {
        trace->ids = ids;
        trace->pad_mask = pad_mask;
        trace->x0 = x;
        trace->layers.assign(cfg.layers, {});
    }

    for (std::size_t li = 0; li < cfg.layers; ++li) {
        const auto& L = params.layers[li];
        EncoderLayerTrace local;
        EncoderLayerTrace& t = trace ? trace->layers[li] : local;
        t.x_in = x;

        nn::layernorm_forward(t.x_in, L.ln1_g, L.ln1_b, t.ln1_out, t.ln1_mean, t.ln1_rstd);

        t.q = Tensor{S, d1};
        t.k = Tensor{S, d1};
        t.v = Tensor{S, d1};
        mat(t.q).noalias() = mat(t.ln1_out) * mat(L.wq);
        mat(t.k).noalias() = mat(t.ln1_out) * mat(L.wk);
        mat(t.v).noalias() = mat(t.ln1_out) * mat(L.wv);
        mat(t.q).rowwise() += vec(L.bq).transpose();
        mat(t.k).rowwise() += vec(L.bk).transpose();
        mat(t.v).rowwise() += vec(L.bv).transpose();

        t.att = Tensor{H, S, S};
        t.head_mix = Tensor{S, d1};
        for (std::size_t h = 0; h < H; ++h) {
            auto qh = mat(t.q).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
            auto kh = mat(t.k).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
            auto vh = mat(t.v).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
            EMap ah(t.att.data.data() + h * S * S, static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
            ah.noalias() = qh * kh.transpose() * scale;
            for (std::size_t col = 0; col < S; ++col)
                if (pad_mask[col]) ah.col(static_cast<Eigen::Index>(col)).setConstant(nn::kMaskFill);
            for (std::size_t row = 0; row < S; ++row) {
                double mx = ah.row(static_cast<Eigen::Index>(row)).maxCoeff();
                double denom = 0.0;
                for (std::size_t col = 0; col < S; ++col) {
                    double e = std::exp(ah(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) - mx);
                    ah(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = e;
                    denom += e;
                }
                ah.row(static_cast<Eigen::Index>(row)) /= denom;
            }
            mat(t.head_mix).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh)).noalias() =
                ah * vh;
        }

        t.x_mid = Tensor{S, d1};
        mat(t.x_mid).noalias() = mat(t.x_in) + mat(t.head_mix) * mat(L.wo);
        mat(t.x_mid).rowwise() += vec(L.bo).transpose();

        nn::layernorm_forward(t.x_mid, L.ln2_g, L.ln2_b, t.ln2_out, t.ln2_mean, t.ln2_rstd);

        t.ffn_pre = Tensor{S, dff};
        mat(t.ffn_pre).noalias() = mat(t.ln2_out) * mat(L.w1);
        mat(t.ffn_pre).rowwise() += vec(L.b1).transpose();
        t.ffn_act = Tensor{S, dff};
        for (std::size_t i = 0; i < t.ffn_pre.size(); ++i) t.ffn_act[i] = nn::gelu(t.ffn_pre[i]);

        x = Tensor{S, d1};
        mat(x).noalias() = mat(t.x_mid) + mat(t.ffn_act) * mat(L.w2);
        mat(x).rowwise() += vec(L.b2).transpose();
    }

    Tensor out, lnf_mean, lnf_rstd;
    nn::layernorm_forward(x, params.lnf_g, params.lnf_b, out, lnf_mean, lnf_rstd);
    if (trace) {
        trace->x_final = std::move(x);
        trace->lnf_mean = std::move(lnf_mean);
        trace->lnf_rstd = std::move(lnf_rstd);
        trace->out = out;
    }
    return out;
}

/// Backward pass matching encode(). Accumulates (+=) parameter gradients
/// into grads, which must be shaped like params.
inline void encode_backward(const EncoderParams& params, const EncoderConfig& cfg, const EncodeTrace& trace,
                            const Tensor& d_out, EncoderParams& grads) {
    const std::size_t S = trace.ids.size();
    const std::size_t d1 = cfg.d1, H = cfg.heads, dh = cfg.head_dim(), dff = cfg.d_ff();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor dx{S, d1};
    nn::layernorm_backward(trace.x_final, params.lnf_g, trace.lnf_mean, trace.lnf_rstd, d_out, dx,
                           grads.lnf_g, grads.lnf_b);

    for (std::size_t li = cfg.layers; li-- > 0;) {
        const auto& L = params.layers[li];
        auto& G = grads.layers[li];
        const auto& t = trace.layers[li];

        // FFN block: x_out = x_mid + gelu(ln2_out*w1 + b1)*w2 + b2
        Tensor d_act{S, dff};
        mat(d_act).noalias() = mat(dx) * mat(L.w2).transpose();
        mat(G.w2).noalias() += mat(t.ffn_act).transpose() * mat(dx);
        vec(G.b2).noalias() += mat(dx).colwise().sum().transpose();

        Tensor d_pre{S, dff};
        for (std::size_t i = 0; i < d_pre.size(); ++i) d_pre[i] = d_act[i] * nn::gelu_grad(t.ffn_pre[i]);

        mat(G.w1).noalias() += mat(t.ln2_out).transpose() * mat(d_pre);
        vec(G.b1).noalias() += mat(d_pre).colwise().sum().transpose();

        Tensor d_ln2_out{S, d1};
        mat(d_ln2_out).noalias() = mat(d_pre) * mat(L.w1).transpose();

        Tensor d_x_mid = dx;  // residual branch
        nn::layernorm_backward(t.x_mid, L.ln2_g, t.ln2_mean, t.ln2_rstd, d_ln2_out, d_x_mid, G.ln2_g,
                               G.ln2_b);

        // Attention block: x_mid = x_in + head_mix*wo + bo
        mat(G.wo).noalias() += mat(t.head_mix).transpose() * mat(d_x_mid);
        vec(G.bo).noalias() += mat(d_x_mid).colwise().sum().transpose();
        Tensor d_head_mix{S, d1};
        mat(d_head_mix).noalias() = mat(d_x_mid) * mat(L.wo).transpose();

        Tensor dq{S, d1}, dk{S, d1}, dv{S, d1};
        for (std::size_t h = 0; h < H; ++h) {
            auto qh = mat(t.q).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
            auto kh = mat(t.k).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
            auto vh = mat(t.v).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
            ECMap ah(t.att.data.data() + h * S * S, static_cast<Eigen::Index>(S),
                     static_cast<Eigen::Index>(S));
            auto d_out_h = mat(d_head_mix).middleCols(static_cast<Eigen::Index>(h * dh),
                                                      static_cast<Eigen::Index>(dh));

            EMat dA(S, S);
            dA.noalias() = d_out_h * vh.transpose();
            mat(dv).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh)).noalias() =
                ah.transpose() * d_out_h;

            // softmax backward: dS = A .* (dA - rowsum(dA .* A))
            EMat dS(S, S);
            for (std::size_t row = 0; row < S; ++row) {
                auto r = static_cast<Eigen::Index>(row);
                double dot = ah.row(r).cwiseProduct(dA.row(r)).sum();
                dS.row(r) = ah.row(r).cwiseProduct((dA.row(r).array() - dot).matrix());
            }

            mat(dq).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh)).noalias() =
                dS * kh * scale;
            mat(dk).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh)).noalias() =
                dS.transpose() * qh * scale;
        }

        mat(G.wq).noalias() += mat(t.ln1_out).transpose() * mat(dq);
        vec(G.bq).noalias() += mat(dq).colwise().sum().transpose();
        mat(G.wk).noalias() += mat(t.ln1_out).transpose() * mat(dk);
        vec(G.bk).noalias() += mat(dk).colwise().sum().transpose();
        mat(G.wv).noalias() += mat(t.ln1_out).transpose() * mat(dv);
        vec(G.bv).noalias() += mat(dv).colwise().sum().transpose();

        Tensor d_ln1_out{S, d1};
        mat(d_ln1_out).noalias() = mat(dq) * mat(L.wq).transpose() + mat(dk) * mat(L.wk).transpose() +
                                   mat(dv) * mat(L.wv).transpose();

        Tensor d_x_in = d_x_mid;  // residual branch
        nn::layernorm_backward(t.x_in, L.ln1_g, t.ln1_mean, t.ln1_rstd, d_ln1_out, d_x_in, G.ln1_g,
                               G.ln1_b);
        dx = std::move(d_x_in);
    }

    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t c = 0; c < d1; ++c) {
            grads.tok_embed.at(static_cast<std::size_t>(trace.ids[i]), c) += dx.at(i, c);
            grads.pos_embed.at(i, c) += dx.at(i, c);
        }
}

/// CLS embedding of [CLS] + neighborhood tokens; the d2-dimensional zero
/// vector for an empty neighborhood.
inline Tensor context_vector(const EncoderParams& params, const EncoderConfig& cfg,
                             const std::vector<int>& neighborhood_ids) {
    if (neighborhood_ids.empty()) return Tensor{cfg.d2()};
    std::vector<int> ids;
    ids.reserve(neighborhood_ids.size() + 1);
    ids.push_back(Vocabulary::kCls);
    ids.insert(ids.end(), neighborhood_ids.begin(), neighborhood_ids.end());
    std::vector<char> mask(ids.size(), 0);
    Tensor out = encode(params, cfg, ids, mask);
    Tensor c{cfg.d2()};
    for (std::size_t i = 0; i < cfg.d2(); ++i) c[i] = out.at(0, i);
    return c;
}

}  // namespace nie
