#pragma once

#include "slaf/policy.hpp"
#include "slaf/transformer.hpp"

#include <vector>

namespace slaf {

// Length-Aware Framework: per-step full-sentence length prediction and
// positional-encoding infill of the unread source positions.

struct LengthDistribution {
    std::vector<double> probs; // class c corresponds to length c+1
    int argmax_length = 0;

    static LengthDistribution from_probs(std::vector<double> p) {
        LengthDistribution d;
        d.probs = std::move(p);
        int arg = 0;
        for (size_t c = 1; c < d.probs.size(); ++c)
            if (d.probs[c] > d.probs[arg]) arg = static_cast<int>(c);
        d.argmax_length = arg + 1;
        return d;
    }
};

template <typename S>
LengthDistribution predict_length(Model<S>& model, const Var<S>& h_prefix) {
    Var<S> logits = model.length_logits(h_prefix);
    Mat<S> probs = softmax_rows_value(logits.value());
    std::vector<double> p(probs.cols());
    for (Index c = 0; c < probs.cols(); ++c) p[c] = static_cast<double>(probs(0, c));
    return LengthDistribution::from_probs(std::move(p));
}

// Resolution rule: once <eos> is received the true length is known, so the
// current prefix length wins; otherwise a prediction shorter than what has
// already been read is clamped up to the prefix length.
inline int resolve_length(const LengthDistribution& dist, int g_i, bool eos_seen) {
    SLAF_CHECK(g_i >= 1, "resolve_length: prefix length must be >= 1, got ", g_i);
    if (eos_seen) return g_i;
    return std::max(dist.argmax_length, g_i);
}

template <typename S>
struct PseudoSourceStates {
    Var<S> states;           // L_i x d_model
    int real_prefix_len = 0; // g(i)
    int resolved_len = 0;    // L_i
};

// h_1..h_{g(i)} followed by PE rows for 1-based positions g(i)+1..L_i
// (table rows g(i)..L_i-1). Fill rows are raw PE vectors, inserted without
// scaling or normalization, and carry no gradient.
template <typename S>
PseudoSourceStates<S> build_pseudo_full_sentence(const Var<S>& h_prefix, int resolved_len,
                                                 const PETable<S>& pe) {
    int g = static_cast<int>(h_prefix.rows());
    SLAF_CHECK(g >= 1, "pseudo full-sentence: empty prefix");
    SLAF_CHECK(resolved_len >= g, "pseudo full-sentence: resolved length ", resolved_len,
               " below prefix length ", g);
    SLAF_CHECK(resolved_len <= pe.table.rows(), "pseudo full-sentence: resolved length ",
               resolved_len, " exceeds max positions ", pe.table.rows());
    PseudoSourceStates<S> out;
    out.real_prefix_len = g;
    out.resolved_len = resolved_len;
    if (resolved_len == g) {
        out.states = concat_rows<S>({h_prefix});
        return out;
    }
    Var<S> fill = Var<S>::constant(pe.rows(g, resolved_len - g));
    out.states = concat_rows<S>({h_prefix, fill});
    return out;
}

// ---- training-time loss assembly ----

enum class TrainMode { FullSentence, WaitK, WaitKLAF, PredLAF };

inline std::string train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::FullSentence: return "full";
        case TrainMode::WaitK: return "wait-k";
        case TrainMode::WaitKLAF: return "wait-k-laf";
        case TrainMode::PredLAF: return "pred-laf";
    }
    return "?";
}

inline TrainMode train_mode_from_string(const std::string& s) {
    if (s == "full") return TrainMode::FullSentence;
    if (s == "wait-k") return TrainMode::WaitK;
    if (s == "wait-k-laf") return TrainMode::WaitKLAF;
    if (s == "pred-laf") return TrainMode::PredLAF;
    fail("mode: unknown training mode '", s, "' (full, wait-k, wait-k-laf, pred-laf)");
}

inline bool mode_uses_laf(TrainMode m) {
    return m == TrainMode::WaitKLAF || m == TrainMode::PredLAF;
}

template <typename S>
struct LossBreakdown {
    Var<S> ce;
    Var<S> len;   // undefined for non-LAF modes
    Var<S> total; // ce + len (single addition)
    long target_tokens = 0;
    long length_clamp_warnings = 0;

    double ce_value() const { return static_cast<double>(ce.value()(0, 0)); }
    double len_value() const { return len.defined() ? static_cast<double>(len.value()(0, 0)) : 0.0; }
    double total_value() const { return static_cast<double>(total.value()(0, 0)); }
};

// Per-sentence forward pass and losses for one training mode.
//
// L_ce sums label-smoothed token cross-entropies over the target; in the
// LAF default the fill extends the prefix to the ground-truth length J, in
// Pred-LAF to the (detached) resolved predicted length. L_len sums
// -log p_l(J | x_<=g(i)) over every target step, duplicated prefixes
// included.
template <typename S>
LossBreakdown<S> sentence_losses(Model<S>& model, const TokenizedPair& pair,
                                 TrainMode mode, int wait_k, bool train,
                                 S label_smoothing = S(0.1)) {
    const ModelConfig& cfg = model.config();
    int J = pair.src_len();
    std::vector<int> tgt_in = {kBosId};
    tgt_in.insert(tgt_in.end(), pair.tgt.begin(), pair.tgt.end());
    std::vector<int> tgt_out = pair.tgt;
    tgt_out.push_back(kEosId);
    int I = static_cast<int>(tgt_out.size());

    PolicySchedule sched = mode == TrainMode::FullSentence
        ? full_sentence_schedule(J, I)
        : wait_k_schedule(wait_k, J, I);

    EncoderStates<S> enc = model.encode(pair.src, train);

    LossBreakdown<S> out;
    out.target_tokens = I;

    // length class of the ground-truth source length J (class c = length c+1)
    int len_class = J - 1;
    if (len_class >= cfg.max_positions) {
        len_class = cfg.max_positions - 1;
        ++out.length_clamp_warnings;
    }

    std::vector<Var<S>> step_kv;
    std::vector<int> fill_starts(I);
    std::vector<Var<S>> len_logit_rows;
    Var<S> cached_len_logits;
    int cached_g = -1;

    for (int i = 1; i <= I; ++i) {
        int g = sched.context_at(i);
        Var<S> prefix = slice_rows(enc.h, 0, g);
        fill_starts[i - 1] = g;
        switch (mode) {
            case TrainMode::FullSentence:
            case TrainMode::WaitK:
                step_kv.push_back(prefix);
                break;
            case TrainMode::WaitKLAF: {
                auto pseudo = build_pseudo_full_sentence(prefix, J, model.pe());
                step_kv.push_back(pseudo.states);
                break;
            }
            case TrainMode::PredLAF: {
                // hard length selection; translation loss does not reach the
                // length predictor through this choice
                LengthDistribution dist = predict_length(model, prefix);
                int L = resolve_length(dist, g, g == J);
                L = std::min(L, cfg.max_positions);
                auto pseudo = build_pseudo_full_sentence(prefix, L, model.pe());
                step_kv.push_back(pseudo.states);
                break;
            }
        }
        if (mode_uses_laf(mode)) {
            if (g != cached_g) {
                cached_len_logits = model.length_logits(prefix);
                cached_g = g;
            }
            len_logit_rows.push_back(cached_len_logits);
        }
    }

    auto dec = model.decode(tgt_in, step_kv, train, &fill_starts);
    out.ce = cross_entropy_rows(dec.logits, tgt_out, label_smoothing);

    if (mode_uses_laf(mode)) {
        Var<S> stacked = concat_rows(len_logit_rows);
        std::vector<int> labels(I, len_class);
        out.len = cross_entropy_rows(stacked, labels, S(0));
        out.total = add(out.ce, out.len);
    } else {
        out.total = out.ce;
    }
    return out;
}

} // namespace slaf
