#pragma once

#include "slaf/checkpoint.hpp"
#include "slaf/diagnostics.hpp"
#include "slaf/stream.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace slaf {

struct TrainConfig {
    ModelConfig model;
    TrainMode mode = TrainMode::WaitKLAF;
    int k = 3;
    double peak_lr = 2e-3;
    long warmup_steps = 4000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.98;
    double adam_eps = 1e-9;
    double label_smoothing = 0.1;
    long max_steps = 20000;
    long eval_every = 500;
    long token_budget = 800; // tokens per batch
    std::uint64_t seed = 1;
    double stop_bleu = -1.0; // stop early once validation BLEU reaches this
    bool verbose = false;

    void validate() const {
        if (mode != TrainMode::FullSentence)
            SLAF_CHECK(k >= 1, "train config: wait-k modes require k >= 1");
        SLAF_CHECK(max_steps >= 1 && warmup_steps >= 1, "train config: bad step counts");
    }
};

struct MetricsReport {
    double bleu = 0.0;
    double al_mean = 0.0;
    double length_accuracy = 0.0;
    std::vector<double> duplicate_ngrams; // n = 1..4
    LengthAccuracyCurve length_curve;
    FillCurve fill_curve;
    size_t n_sentences = 0;
};

struct EvalResult {
    MetricsReport metrics;
    std::vector<SentenceTrace> traces;
    std::vector<std::vector<int>> refs;
};

template <typename S>
EvalResult evaluate(Model<S>& model, const std::vector<TokenizedPair>& pairs,
                    const StreamPolicy& policy, bool use_laf, bool oracle_length = false) {
    EvalResult res;
    std::vector<std::vector<int>> hyps;
    double al_sum = 0.0;
    for (size_t n = 0; n < pairs.size(); ++n) {
        StreamSession sess = simulate(model, policy, pairs[n].src, use_laf, -1, oracle_length);
        SentenceTrace t;
        t.sent = static_cast<int>(n);
        t.src_len = sess.src_len;
        t.hyp = sess.hypothesis;
        t.ref = pairs[n].tgt;
        t.steps = sess.steps;
        LatencyReport lat = average_lagging(sess.g_trace(), sess.src_len,
                                            std::max<int>(1, static_cast<int>(sess.steps.size())));
        al_sum += lat.al;
        hyps.push_back(sess.hypothesis);
        res.refs.push_back(pairs[n].tgt);
        res.traces.push_back(std::move(t));
    }
    res.metrics.n_sentences = pairs.size();
    res.metrics.bleu = corpus_bleu(hyps, res.refs);
    res.metrics.al_mean = pairs.empty() ? 0.0 : al_sum / static_cast<double>(pairs.size());
    for (int n = 1; n <= 4; ++n)
        res.metrics.duplicate_ngrams.push_back(corpus_duplicate_proportion(hyps, n));
    if (use_laf) {
        res.metrics.length_curve = length_accuracy_curve(res.traces);
        res.metrics.length_accuracy = res.metrics.length_curve.overall;
        res.metrics.fill_curve = fill_attention_curve(res.traces);
    }
    return res;
}

struct TrainLogRow {
    long step;
    double ce, len, total, lr;
    double val_bleu = -1.0, val_al = 0.0, len_acc = -1.0;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    double best_bleu = 0.0;
    long steps_run = 0;
    bool diverged = false;
    long length_clamp_warnings = 0;
};

inline void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
    std::ofstream os(path);
    SLAF_CHECK(os.good(), "train log: cannot write ", path);
    os << "step,ce,len,total,lr,val_bleu,val_al,len_acc\n";
    for (const auto& r : rows) {
        os << r.step << "," << r.ce << "," << r.len << "," << r.total << "," << r.lr << ",";
        if (r.val_bleu >= 0) os << r.val_bleu;
        os << "," << r.val_al << ",";
        if (r.len_acc >= 0) os << r.len_acc;
        os << "\n";
    }
}

template <typename S>
StreamPolicy eval_policy(const TrainConfig& cfg) {
    StreamPolicy p;
    if (cfg.mode == TrainMode::FullSentence) {
        p.kind = PolicyKind::FullSentence;
    } else {
        p.kind = PolicyKind::WaitK;
        p.k = cfg.k;
    }
    return p;
}

// Training loop: deterministic batch order from (seed, epoch), one backward
// pass per batch over the token-normalized sum of sentence losses, Adam with
// inverse-square-root warmup. The best checkpoint by validation BLEU is kept
// at `ckpt_path`; a non-finite loss aborts, leaving the last good checkpoint.
template <typename S>
TrainResult train(const TrainConfig& cfg, const std::vector<TokenizedPair>& train_pairs,
                  const std::vector<TokenizedPair>& val_pairs, Model<S>& model, Adam<S>& opt,
                  CheckpointMeta& meta, const std::string& ckpt_path, long start_step = 0) {
    cfg.validate();
    SLAF_CHECK(!train_pairs.empty(), "train: empty training corpus");
    BatchPlan plan(train_pairs, cfg.token_budget);
    TrainResult result;
    result.best_bleu = meta.best_bleu;
    bool laf = mode_uses_laf(cfg.mode);
    bool saved_any = false;

    for (long step = start_step + 1; step <= cfg.max_steps; ++step) {
        long epoch = (step - 1) / static_cast<long>(plan.size());
        size_t pos = static_cast<size_t>((step - 1) % static_cast<long>(plan.size()));
        const Batch& batch = plan.at(cfg.seed, epoch, pos);

        model.params().zero_grads();
        Var<S> total_ce, total_len;
        long tokens = 0, clamps = 0;
        for (const auto& pair : batch.pairs) {
            auto losses = sentence_losses(model, pair, cfg.mode, cfg.k, true,
                                          static_cast<S>(cfg.label_smoothing));
            total_ce = total_ce.defined() ? add(total_ce, losses.ce) : losses.ce;
            if (laf)
                total_len = total_len.defined() ? add(total_len, losses.len) : losses.len;
            tokens += losses.target_tokens;
            clamps += losses.length_clamp_warnings;
        }
        result.length_clamp_warnings += clamps;
        Var<S> total = laf ? add(total_ce, total_len) : total_ce;
        Var<S> objective = scale(total, S(1) / static_cast<S>(tokens));
        double loss_val = static_cast<double>(objective.value()(0, 0));
        if (!std::isfinite(loss_val)) {
            result.diverged = true;
            result.steps_run = step - 1;
            return result;
        }
        backpropagate(objective);
        double lr = inv_sqrt_lr(step, cfg.peak_lr, cfg.warmup_steps);
        opt.step(lr);

        TrainLogRow row;
        row.step = step;
        row.ce = static_cast<double>(total_ce.value()(0, 0)) / tokens;
        row.len = laf ? static_cast<double>(total_len.value()(0, 0)) / tokens : 0.0;
        row.total = loss_val;
        row.lr = lr;

        bool do_eval = !val_pairs.empty() &&
                       (step % cfg.eval_every == 0 || step == cfg.max_steps);
        if (do_eval) {
            EvalResult ev = evaluate(model, val_pairs, eval_policy<S>(cfg), laf);
            row.val_bleu = ev.metrics.bleu;
            row.val_al = ev.metrics.al_mean;
            if (laf) row.len_acc = ev.metrics.length_accuracy;
            if (cfg.verbose)
                std::cerr << "step " << step << " loss " << row.total
                          << " val_bleu " << ev.metrics.bleu << " al " << ev.metrics.al_mean << "\n";
            if (ev.metrics.bleu >= result.best_bleu || !saved_any) {
                result.best_bleu = std::max(result.best_bleu, ev.metrics.bleu);
                meta.best_bleu = result.best_bleu;
                meta.step = step;
                if (!ckpt_path.empty()) save_checkpoint(ckpt_path, model, opt, meta);
                saved_any = true;
            }
            result.log.push_back(row);
            result.steps_run = step;
            if (cfg.stop_bleu >= 0.0 && ev.metrics.bleu >= cfg.stop_bleu) break;
        } else {
            result.log.push_back(row);
            result.steps_run = step;
        }
    }
    if (!saved_any && !ckpt_path.empty()) {
        meta.step = result.steps_run;
        save_checkpoint(ckpt_path, model, opt, meta);
    }
    return result;
}

} // namespace slaf
