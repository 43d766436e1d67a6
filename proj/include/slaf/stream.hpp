#pragma once

#include "slaf/data.hpp"
#include "slaf/laf.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace slaf {

// Streaming inference: the model sees source tokens strictly through the
// policy's read schedule. Each step re-encodes only the revealed prefix, so
// unread tokens cannot influence anything by construction.

struct StepRecord {
    int step = 0;        // 1-based decoding step
    int g = 0;           // source words revealed at this step
    int L_resolved = 0;  // key-sequence length (equals g without LAF)
    int emitted_id = 0;
    int fill_start = 0;  // columns >= fill_start (0-based) are PE fill
    std::vector<double> attention_row;
    int predicted_argmax_len = 0; // raw argmax of the length distribution (LAF)
};

struct StreamSession {
    int src_len = 0;
    std::vector<int> hypothesis; // emitted ids, <eos> excluded
    std::vector<StepRecord> steps;
    std::vector<int> g_trace() const {
        std::vector<int> g;
        for (const auto& s : steps) g.push_back(s.g);
        return g;
    }
};

struct LatencyReport {
    std::vector<int> g;
    int tau = 1;
    double al = 0.0;
    int src_len = 0;
    int tgt_len = 0;
};

// AL = (1/tau) * sum_{t<=tau} [ g(t) - (t-1) / (|y|/|x|) ],
// tau = first step with g(t) = J. When decoding halted before the full
// source was read, tau falls back to the hypothesis length.
inline LatencyReport average_lagging(const std::vector<int>& g_trace, int src_len, int tgt_len) {
    SLAF_CHECK(!g_trace.empty(), "average_lagging: empty g trace");
    SLAF_CHECK(src_len >= 1 && tgt_len >= 1, "average_lagging: bad lengths");
    LatencyReport r;
    r.g = g_trace;
    r.src_len = src_len;
    r.tgt_len = tgt_len;
    int tau = static_cast<int>(g_trace.size());
    for (size_t t = 0; t < g_trace.size(); ++t) {
        SLAF_CHECK(g_trace[t] <= src_len, "average_lagging: g exceeds source length");
        if (g_trace[t] == src_len) { tau = static_cast<int>(t) + 1; break; }
    }
    r.tau = tau;
    double gamma = static_cast<double>(tgt_len) / static_cast<double>(src_len);
    double sum = 0.0;
    for (int t = 1; t <= tau; ++t)
        sum += g_trace[t - 1] - (t - 1) / gamma;
    r.al = sum / tau;
    return r;
}

struct StreamPolicy {
    PolicyKind kind = PolicyKind::WaitK;
    int k = 1;
    std::optional<PolicySchedule> schedule; // for FromBeta

    int g_at(int step, int src_len) const {
        switch (kind) {
            case PolicyKind::FullSentence: return src_len;
            case PolicyKind::WaitK: return std::min(k + step - 1, src_len);
            case PolicyKind::FromBeta: {
                SLAF_CHECK(schedule.has_value(), "policy: from-beta without a schedule");
                int n = static_cast<int>(schedule->g.size());
                int g = step <= n ? schedule->g[step - 1] : src_len;
                return std::min(g, src_len);
            }
        }
        return src_len;
    }
};

// With `oracle_length` the resolved key-sequence length is pinned to the true
// source length at every step instead of the predicted one (upper bound for
// the length predictor's contribution).
template <typename S>
StreamSession simulate(Model<S>& model, const StreamPolicy& policy,
                       const std::vector<int>& source, bool use_laf, int max_len = -1,
                       bool oracle_length = false) {
    int J = static_cast<int>(source.size());
    SLAF_CHECK(J >= 1, "simulate: empty source");
    if (max_len < 0) max_len = 2 * J + 10;
    SLAF_CHECK(max_len >= 1, "simulate: max_len must be >= 1");
    // the decoder input <bos> + hypothesis must fit the position table
    max_len = std::min(max_len, model.config().max_positions - 1);
    if (policy.kind == PolicyKind::FromBeta)
        SLAF_CHECK(policy.schedule->src_len == J || policy.schedule->src_len >= J,
                   "simulate: beta schedule covers ", policy.schedule->src_len,
                   " source words but sentence has ", J);

    StreamSession sess;
    sess.src_len = J;

    std::vector<Var<S>> step_kvs;
    std::vector<int> fill_starts;
    std::vector<int> tgt_in = {kBosId};

    // encoder states per distinct revealed prefix length
    std::vector<std::optional<Var<S>>> enc_cache(static_cast<size_t>(J) + 1);
    std::vector<std::optional<LengthDistribution>> len_cache(static_cast<size_t>(J) + 1);

    for (int t = 1; t <= max_len; ++t) {
        int g = policy.g_at(t, J);
        if (!enc_cache[g]) {
            std::vector<int> prefix(source.begin(), source.begin() + g);
            enc_cache[g] = model.encode(prefix, false).h;
        }
        Var<S> h = *enc_cache[g];

        StepRecord rec;
        rec.step = t;
        rec.g = g;
        rec.fill_start = g;
        if (use_laf) {
            if (!len_cache[g]) len_cache[g] = predict_length(model, h);
            const LengthDistribution& dist = *len_cache[g];
            rec.predicted_argmax_len = dist.argmax_length;
            int L = oracle_length ? J : resolve_length(dist, g, g == J);
            L = std::min(L, model.config().max_positions);
            auto pseudo = build_pseudo_full_sentence(h, L, model.pe());
            rec.L_resolved = L;
            step_kvs.push_back(pseudo.states);
        } else {
            rec.L_resolved = g;
            step_kvs.push_back(h);
        }
        fill_starts.push_back(g);

        auto dec = model.decode(tgt_in, step_kvs, false, &fill_starts);
        const Mat<S>& logits = dec.logits.value();
        Index last = logits.rows() - 1;
        int best = 0;
        for (Index c = 1; c < logits.cols(); ++c)
            if (logits(last, c) > logits(last, best)) best = static_cast<int>(c);

        rec.emitted_id = best;
        rec.attention_row = dec.trace.rows.back();
        sess.steps.push_back(std::move(rec));

        if (best == kEosId) break;
        sess.hypothesis.push_back(best);
        tgt_in.push_back(best);
    }
    return sess;
}

// ---- JSON-lines trace serialization (format "slaf-trace", version 1) ----

struct SentenceTrace {
    int sent = 0;
    int src_len = 0;
    std::vector<int> hyp;
    std::vector<int> ref; // optional, empty when unknown
    std::vector<StepRecord> steps;
};

inline void write_trace_header(std::ostream& os) {
    nlohmann::json j;
    j["format"] = "slaf-trace";
    j["version"] = 1;
    os << j.dump() << "\n";
}

inline void write_sentence_trace(std::ostream& os, const SentenceTrace& t) {
    nlohmann::json meta;
    meta["sent"] = t.sent;
    meta["src_len"] = t.src_len;
    meta["hyp"] = t.hyp;
    if (!t.ref.empty()) meta["ref"] = t.ref;
    os << meta.dump() << "\n";
    for (const auto& s : t.steps) {
        nlohmann::json j;
        j["sent"] = t.sent;
        j["step"] = s.step;
        j["g"] = s.g;
        j["L_resolved"] = s.L_resolved;
        j["emitted_id"] = s.emitted_id;
        j["fill_start"] = s.fill_start;
        j["attention_row"] = s.attention_row;
        if (s.predicted_argmax_len > 0) j["pred_len"] = s.predicted_argmax_len;
        os << j.dump() << "\n";
    }
}

inline std::vector<SentenceTrace> read_traces(const std::string& path) {
    std::ifstream in(path);
    SLAF_CHECK(in.good(), "trace: cannot open ", path);
    std::vector<SentenceTrace> out;
    std::string line;
    long line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            fail("trace: malformed line ", line_no, " in ", path, ": ", e.what());
        }
        if (j.contains("format")) {
            SLAF_CHECK(j["format"] == "slaf-trace" && j["version"] == 1,
                       "trace: unsupported format on line ", line_no);
            header_seen = true;
            continue;
        }
        SLAF_CHECK(header_seen, "trace: missing header line in ", path);
        if (j.contains("src_len")) {
            SentenceTrace t;
            t.sent = j.at("sent").get<int>();
            t.src_len = j.at("src_len").get<int>();
            t.hyp = j.at("hyp").get<std::vector<int>>();
            if (j.contains("ref")) t.ref = j.at("ref").get<std::vector<int>>();
            out.push_back(std::move(t));
        } else {
            SLAF_CHECK(!out.empty(), "trace: step record before sentence meta on line ", line_no);
            StepRecord s;
            s.step = j.at("step").get<int>();
            s.g = j.at("g").get<int>();
            s.L_resolved = j.at("L_resolved").get<int>();
            s.emitted_id = j.at("emitted_id").get<int>();
            s.fill_start = j.at("fill_start").get<int>();
            s.attention_row = j.at("attention_row").get<std::vector<double>>();
            if (j.contains("pred_len")) s.predicted_argmax_len = j["pred_len"].get<int>();
            out.back().steps.push_back(std::move(s));
        }
    }
    return out;
}

} // namespace slaf
