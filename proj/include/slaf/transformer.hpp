#pragma once

#include "slaf/autodiff.hpp"
#include "slaf/params.hpp"
#include "slaf/pe.hpp"

#include <cmath>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

namespace slaf {

struct ModelConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int d_ffn = 128;
    int max_positions = 256;   // N_max: also the number of length classes
    int src_vocab_size = 0;
    int tgt_vocab_size = 0;
    double dropout = 0.1;
    bool unidirectional_encoder = true;
    bool length_predictor = false;

    int d_k() const { return d_model / n_heads; }

    void validate() const {
        SLAF_CHECK(d_model % n_heads == 0, "config: d_model ", d_model,
                   " not divisible by n_heads ", n_heads);
        SLAF_CHECK(d_model % 2 == 0, "config: d_model must be even for sinusoidal PE");
        SLAF_CHECK(src_vocab_size > 0 && tgt_vocab_size > 0, "config: vocab sizes unset");
        SLAF_CHECK(max_positions >= 2, "config: max_positions too small");
    }
};

template <typename S>
struct AttentionWeights {
    Var<S> wq, wk, wv, wo; // each d_model x d_model
};

// Multi-head scaled dot-product attention. The additive mask (0 / -1e9) has
// one row per query and one column per key; fully masked rows raise an
// empty-context error inside softmax. Returns per-head weights plus their
// head average (what diagnostics consume).
template <typename S>
struct AttentionResult {
    Var<S> out;
    std::vector<Mat<S>> head_weights;
    Mat<S> head_avg;
};

template <typename S>
AttentionResult<S> multi_head_attention(const Var<S>& queries, const Var<S>& keys,
                                        const Var<S>& values,
                                        std::type_identity_t<const Mat<S>*> additive_mask,
                                        const AttentionWeights<S>& w, int n_heads,
                                        double attn_dropout = 0.0, Rng* rng = nullptr) {
    SLAF_CHECK(keys.rows() >= 1, "attention: empty context, key sequence length 0");
    SLAF_CHECK(keys.rows() == values.rows(), "attention: ", keys.rows(), " keys vs ",
               values.rows(), " values");
    Index d_model = queries.cols();
    SLAF_CHECK(d_model % n_heads == 0, "attention: width ", d_model,
               " not divisible by ", n_heads, " heads");
    Index dk = d_model / n_heads;
    S inv_sqrt_dk = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dk)));

    Var<S> q = matmul(queries, w.wq);
    Var<S> k = matmul(keys, w.wk);
    Var<S> v = matmul(values, w.wv);

    AttentionResult<S> res;
    std::vector<Var<S>> head_outs;
    res.head_avg = Mat<S>::Zero(queries.rows(), keys.rows());
    for (int h = 0; h < n_heads; ++h) {
        Var<S> qh = slice_cols(q, h * dk, dk);
        Var<S> kh = slice_cols(k, h * dk, dk);
        Var<S> vh = slice_cols(v, h * dk, dk);
        Var<S> scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dk);
        Var<S> weights = softmax_rows(scores, additive_mask);
        res.head_weights.push_back(weights.value());
        res.head_avg += weights.value();
        if (attn_dropout > 0.0 && rng) weights = dropout(weights, attn_dropout, *rng);
        head_outs.push_back(matmul(weights, vh));
    }
    res.head_avg /= S(n_heads);
    res.out = matmul(concat_cols(head_outs), w.wo);
    return res;
}

// additive causal mask: row i may attend to columns <= i
template <typename S>
Mat<S> causal_mask(Index n) {
    Mat<S> m = Mat<S>::Zero(n, n);
    for (Index r = 0; r < n; ++r)
        for (Index c = r + 1; c < n; ++c)
            m(r, c) = kMaskValue<S>;
    return m;
}

template <typename S>
struct EncoderLayer {
    Var<S> ln1_g, ln1_b;
    AttentionWeights<S> attn;
    Var<S> ln2_g, ln2_b;
    Var<S> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

template <typename S>
struct DecoderLayer {
    Var<S> ln_self_g, ln_self_b;
    AttentionWeights<S> self_attn;
    Var<S> ln_cross_g, ln_cross_b;
    AttentionWeights<S> cross_attn;
    Var<S> ln_ffn_g, ln_ffn_b;
    Var<S> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

template <typename S>
struct EncoderStates {
    Var<S> h;       // J x d_model
    int length = 0; // J
};

// Per-step cross-attention trace of one decoded sentence.
struct AttentionTrace {
    // one row per target step; row i has the key-sequence length of step i
    std::vector<std::vector<double>> rows;
    std::vector<int> key_lengths;
    std::vector<int> fill_starts; // columns >= fill_start are PE fill
};

// Pre-norm encoder-decoder transformer with step-dependent cross-attention
// key/value sequences: the decoder takes one source-state matrix per target
// step, which is how both the prefix-to-prefix baseline and the pseudo
// full-sentence variant are driven.
template <typename S>
class Model {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), pe_(cfg.max_positions, cfg.d_model),
                                                        dropout_rng_(Rng::derive(seed, 7)) {
        cfg_.validate();
        Rng init = Rng::derive(seed, 3);
        src_embed_ = params_.add_embedding("src_embed", cfg_.src_vocab_size, cfg_.d_model, init);
        tgt_embed_ = params_.add_embedding("tgt_embed", cfg_.tgt_vocab_size, cfg_.d_model, init);
        for (int l = 0; l < cfg_.n_enc_layers; ++l) {
            std::string p = "enc" + std::to_string(l) + ".";
            EncoderLayer<S> layer;
            layer.ln1_g = params_.add_ones(p + "ln1_g", 1, cfg_.d_model);
            layer.ln1_b = params_.add_zeros(p + "ln1_b", 1, cfg_.d_model);
            layer.attn = make_attn(p + "attn.", init);
            layer.ln2_g = params_.add_ones(p + "ln2_g", 1, cfg_.d_model);
            layer.ln2_b = params_.add_zeros(p + "ln2_b", 1, cfg_.d_model);
            layer.ffn_w1 = params_.add_glorot(p + "ffn_w1", cfg_.d_model, cfg_.d_ffn, init);
            layer.ffn_b1 = params_.add_zeros(p + "ffn_b1", 1, cfg_.d_ffn);
            layer.ffn_w2 = params_.add_glorot(p + "ffn_w2", cfg_.d_ffn, cfg_.d_model, init);
            layer.ffn_b2 = params_.add_zeros(p + "ffn_b2", 1, cfg_.d_model);
            enc_layers_.push_back(layer);
        }
        enc_ln_g_ = params_.add_ones("enc_ln_g", 1, cfg_.d_model);
        enc_ln_b_ = params_.add_zeros("enc_ln_b", 1, cfg_.d_model);
        for (int l = 0; l < cfg_.n_dec_layers; ++l) {
            std::string p = "dec" + std::to_string(l) + ".";
            DecoderLayer<S> layer;
            layer.ln_self_g = params_.add_ones(p + "ln_self_g", 1, cfg_.d_model);
            layer.ln_self_b = params_.add_zeros(p + "ln_self_b", 1, cfg_.d_model);
            layer.self_attn = make_attn(p + "self.", init);
            layer.ln_cross_g = params_.add_ones(p + "ln_cross_g", 1, cfg_.d_model);
            layer.ln_cross_b = params_.add_zeros(p + "ln_cross_b", 1, cfg_.d_model);
            layer.cross_attn = make_attn(p + "cross.", init);
            layer.ln_ffn_g = params_.add_ones(p + "ln_ffn_g", 1, cfg_.d_model);
            layer.ln_ffn_b = params_.add_zeros(p + "ln_ffn_b", 1, cfg_.d_model);
            layer.ffn_w1 = params_.add_glorot(p + "ffn_w1", cfg_.d_model, cfg_.d_ffn, init);
            layer.ffn_b1 = params_.add_zeros(p + "ffn_b1", 1, cfg_.d_ffn);
            layer.ffn_w2 = params_.add_glorot(p + "ffn_w2", cfg_.d_ffn, cfg_.d_model, init);
            layer.ffn_b2 = params_.add_zeros(p + "ffn_b2", 1, cfg_.d_model);
            dec_layers_.push_back(layer);
        }
        dec_ln_g_ = params_.add_ones("dec_ln_g", 1, cfg_.d_model);
        dec_ln_b_ = params_.add_zeros("dec_ln_b", 1, cfg_.d_model);
        out_w_ = params_.add_glorot("out_w", cfg_.d_model, cfg_.tgt_vocab_size, init);
        out_b_ = params_.add_zeros("out_b", 1, cfg_.tgt_vocab_size);
        if (cfg_.length_predictor) {
            len_v_ = params_.add_glorot("len_v", cfg_.d_model, cfg_.d_model, init);
            len_w_ = params_.add_glorot("len_w", cfg_.max_positions, cfg_.d_model, init);
        }
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<S>& params() { return params_; }
    const PETable<S>& pe() const { return pe_; }
    Rng& dropout_rng() { return dropout_rng_; }
    long overlong_truncations() const { return overlong_truncations_; }

    // ---- encoder ----

    EncoderStates<S> encode(const std::vector<int>& tokens, bool train = false) {
        SLAF_CHECK(!tokens.empty(), "encode: empty source");
        std::vector<int> ids = tokens;
        if (static_cast<int>(ids.size()) > cfg_.max_positions) {
            ids.resize(cfg_.max_positions);
            ++overlong_truncations_;
        }
        Index n = static_cast<Index>(ids.size());
        Var<S> x = embed(src_embed_, ids, train);
        std::optional<Mat<S>> mask;
        if (cfg_.unidirectional_encoder) mask = causal_mask<S>(n);
        for (auto& layer : enc_layers_) {
            Var<S> normed = layer_norm(x, layer.ln1_g, layer.ln1_b);
            auto attn = multi_head_attention(normed, normed, normed,
                                             mask ? &*mask : nullptr, layer.attn,
                                             cfg_.n_heads, train ? cfg_.dropout : 0.0, &dropout_rng_);
            x = add(x, maybe_dropout(attn.out, train));
            Var<S> f = ffn(layer_norm(x, layer.ln2_g, layer.ln2_b),
                           layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2, train);
            x = add(x, f);
        }
        EncoderStates<S> st;
        st.h = layer_norm(x, enc_ln_g_, enc_ln_b_);
        st.length = static_cast<int>(n);
        return st;
    }

    // ---- decoder ----
    //
    // step_kv[i] is the source key/value matrix for target step i (0-based):
    // the received prefix for plain SiMT, the pseudo full-sentence for LAF,
    // or all of h for the full-sentence model.

    struct DecodeResult {
        Var<S> logits; // I x tgt_vocab
        AttentionTrace trace;
    };

    DecodeResult decode(const std::vector<int>& tgt_in, const std::vector<Var<S>>& step_kv,
                        bool train = false, const std::vector<int>* fill_starts = nullptr) {
        Index n = static_cast<Index>(tgt_in.size());
        SLAF_CHECK(n >= 1, "decode: empty target input");
        SLAF_CHECK(step_kv.size() == tgt_in.size(), "decode: ", step_kv.size(),
                   " kv sequences for ", tgt_in.size(), " steps");
        for (const auto& kv : step_kv)
            SLAF_CHECK(kv.rows() >= 1, "decode: empty context, key sequence length 0");
        Var<S> x = embed(tgt_embed_, tgt_in, train);
        Mat<S> self_mask = causal_mask<S>(n);
        DecodeResult res;
        for (size_t l = 0; l < dec_layers_.size(); ++l) {
            auto& layer = dec_layers_[l];
            Var<S> normed = layer_norm(x, layer.ln_self_g, layer.ln_self_b);
            auto self = multi_head_attention(normed, normed, normed, &self_mask, layer.self_attn,
                                             cfg_.n_heads, train ? cfg_.dropout : 0.0, &dropout_rng_);
            x = add(x, maybe_dropout(self.out, train));

            Var<S> cross_in = layer_norm(x, layer.ln_cross_g, layer.ln_cross_b);
            std::vector<Var<S>> cross_rows;
            bool last_layer = l + 1 == dec_layers_.size();
            if (last_layer) res.trace.rows.clear();
            for (Index i = 0; i < n; ++i) {
                Var<S> q = slice_rows(cross_in, i, 1);
                auto cr = multi_head_attention(q, step_kv[i], step_kv[i], nullptr, layer.cross_attn,
                                               cfg_.n_heads, train ? cfg_.dropout : 0.0, &dropout_rng_);
                cross_rows.push_back(cr.out);
                if (last_layer) {
                    std::vector<double> row(cr.head_avg.cols());
                    for (Index c = 0; c < cr.head_avg.cols(); ++c)
                        row[c] = static_cast<double>(cr.head_avg(0, c));
                    res.trace.rows.push_back(std::move(row));
                    res.trace.key_lengths.push_back(static_cast<int>(step_kv[i].rows()));
                    res.trace.fill_starts.push_back(fill_starts ? (*fill_starts)[i]
                                                                : static_cast<int>(step_kv[i].rows()));
                }
            }
            x = add(x, maybe_dropout(concat_rows(cross_rows), train));
            Var<S> f = ffn(layer_norm(x, layer.ln_ffn_g, layer.ln_ffn_b),
                           layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2, train);
            x = add(x, f);
        }
        Var<S> final = layer_norm(x, dec_ln_g_, dec_ln_b_);
        res.logits = add(matmul(final, out_w_), out_b_);
        return res;
    }

    // length-prediction logits over max_positions classes (class c = length c+1)
    Var<S> length_logits(const Var<S>& h_prefix) {
        SLAF_CHECK(cfg_.length_predictor, "length_logits: model built without length predictor");
        SLAF_CHECK(h_prefix.rows() >= 1, "length_logits: empty prefix");
        Var<S> mean = mean_rows(h_prefix);                       // 1 x d
        Var<S> hidden = tanh_op(matmul(mean, transpose(len_v_))); // 1 x d
        return matmul(hidden, transpose(len_w_));                 // 1 x N_max
    }

private:
    AttentionWeights<S> make_attn(const std::string& prefix, Rng& init) {
        AttentionWeights<S> w;
        w.wq = params_.add_glorot(prefix + "wq", cfg_.d_model, cfg_.d_model, init);
        w.wk = params_.add_glorot(prefix + "wk", cfg_.d_model, cfg_.d_model, init);
        w.wv = params_.add_glorot(prefix + "wv", cfg_.d_model, cfg_.d_model, init);
        w.wo = params_.add_glorot(prefix + "wo", cfg_.d_model, cfg_.d_model, init);
        return w;
    }

    Var<S> embed(const Var<S>& table, const std::vector<int>& ids, bool train) {
        Var<S> e = embedding(table, ids);
        S scale_factor = static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model)));
        Var<S> x = scale(e, scale_factor);
        Var<S> pe_rows = Var<S>::constant(pe_.rows(0, static_cast<int>(ids.size())));
        x = add(x, pe_rows);
        return maybe_dropout(x, train);
    }

    Var<S> ffn(const Var<S>& x, const Var<S>& w1, const Var<S>& b1,
               const Var<S>& w2, const Var<S>& b2, bool train) {
        Var<S> hidden = relu(add(matmul(x, w1), b1));
        hidden = maybe_dropout(hidden, train);
        return maybe_dropout(add(matmul(hidden, w2), b2), train);
    }

    Var<S> maybe_dropout(const Var<S>& x, bool train) {
        return train && cfg_.dropout > 0.0 ? dropout(x, cfg_.dropout, dropout_rng_) : x;
    }

    ModelConfig cfg_;
    ParamStore<S> params_;
    PETable<S> pe_;
    Rng dropout_rng_;
    long overlong_truncations_ = 0;

    Var<S> src_embed_, tgt_embed_;
    std::vector<EncoderLayer<S>> enc_layers_;
    Var<S> enc_ln_g_, enc_ln_b_;
    std::vector<DecoderLayer<S>> dec_layers_;
    Var<S> dec_ln_g_, dec_ln_b_;
    Var<S> out_w_, out_b_;
    Var<S> len_v_, len_w_;
};

} // namespace slaf
