#include <doctest.h>

#include "slaf/data.hpp"
#include "slaf/stream.hpp"

#include <cstdio>
#include <fstream>

using namespace slaf;

namespace {

ModelConfig stream_config(bool laf = false) {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_enc_layers = 1;
    cfg.n_dec_layers = 1;
    cfg.d_ffn = 16;
    cfg.max_positions = 32;
    cfg.src_vocab_size = 8;
    cfg.tgt_vocab_size = 8;
    cfg.dropout = 0.0;
    cfg.length_predictor = laf;
    return cfg;
}

StreamPolicy wait_k_policy(int k) {
    StreamPolicy p;
    p.kind = PolicyKind::WaitK;
    p.k = k;
    return p;
}

} // namespace

TEST_CASE("average lagging hand examples") {
    // wait-3, equal lengths 6: AL = (3 + 3 + 3 + 3) / 4 = 3
    LatencyReport r = average_lagging({3, 4, 5, 6, 6, 6}, 6, 6);
    CHECK(r.tau == 4);
    CHECK(r.al == doctest::Approx(3.0).epsilon(1e-12));

    // full-sentence reader: everything before the first word
    r = average_lagging({6, 6, 6, 6, 6, 6}, 6, 6);
    CHECK(r.tau == 1);
    CHECK(r.al == doctest::Approx(6.0).epsilon(1e-12));

    // wait-1 on a 2-word sentence
    r = average_lagging({1, 2}, 2, 2);
    CHECK(r.tau == 2);
    CHECK(r.al == doctest::Approx(1.0).epsilon(1e-12));

    // source never fully read: tau falls back to the hypothesis length
    r = average_lagging({1, 2, 3}, 9, 3);
    CHECK(r.tau == 3);

    CHECK_THROWS_AS(average_lagging({}, 3, 3), Error);
    CHECK_THROWS_AS(average_lagging({4}, 3, 3), Error);
}

TEST_CASE("average lagging of wait-k on equal lengths is exactly k") {
    for (int k = 1; k <= 6; ++k)
        for (int J = k; J <= 12; ++J) {
            PolicySchedule s = wait_k_schedule(k, J, J);
            LatencyReport r = average_lagging(s.g, J, J);
            CHECK(r.al == doctest::Approx(static_cast<double>(k)).epsilon(1e-12));
        }
}

TEST_CASE("policy g_at matches schedule arithmetic, beta extends past its rows") {
    StreamPolicy wk = wait_k_policy(3);
    CHECK(wk.g_at(1, 6) == 3);
    CHECK(wk.g_at(4, 6) == 6);
    CHECK(wk.g_at(9, 6) == 6);

    StreamPolicy full;
    full.kind = PolicyKind::FullSentence;
    CHECK(full.g_at(1, 5) == 5);

    StreamPolicy beta;
    beta.kind = PolicyKind::FromBeta;
    WritingProbMatrix m;
    m.beta = {{0.9, 0.1, 0.0}, {0.1, 0.9, 0.0}};
    beta.schedule = schedule_from_writing_probs(m);
    CHECK(beta.g_at(1, 3) == 1);
    CHECK(beta.g_at(2, 3) == 2);
    CHECK(beta.g_at(3, 3) == 3); // past the schedule: read everything

    StreamPolicy bad;
    bad.kind = PolicyKind::FromBeta;
    CHECK_THROWS_AS(bad.g_at(1, 3), Error);
}

TEST_CASE("streaming decode never looks past the revealed prefix") {
    Model<float> model(stream_config(), 41);
    std::vector<int> a = {4, 5, 6, kEosId};
    std::vector<int> b = {4, 5, 6, 7}; // last word differs
    StreamSession sa = simulate(model, wait_k_policy(1), a, false);
    StreamSession sb = simulate(model, wait_k_policy(1), b, false);
    // with wait-1, steps 1..3 reveal only the common prefix of length 3
    for (int t = 0; t < 3 && t < static_cast<int>(std::min(sa.steps.size(), sb.steps.size())); ++t) {
        CHECK(sa.steps[t].g == sb.steps[t].g);
        CHECK(sa.steps[t].emitted_id == sb.steps[t].emitted_id);
        CHECK(sa.steps[t].attention_row == sb.steps[t].attention_row);
    }
    CHECK_THROWS_AS(simulate(model, wait_k_policy(1), {}, false), Error);
}

TEST_CASE("wait-k with k >= J decodes identically to the full-sentence policy") {
    Model<float> model(stream_config(), 43);
    std::vector<int> src = {4, 5, 6, kEosId};
    StreamPolicy full;
    full.kind = PolicyKind::FullSentence;
    StreamSession a = simulate(model, wait_k_policy(9), src, false);
    StreamSession b = simulate(model, full, src, false);
    CHECK(a.hypothesis == b.hypothesis);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t t = 0; t < a.steps.size(); ++t) {
        CHECK(a.steps[t].g == b.steps[t].g);
        CHECK(a.steps[t].attention_row == b.steps[t].attention_row);
    }
}

TEST_CASE("LAF streaming fills to the resolved length and pins it once <eos> arrives") {
    Model<float> model(stream_config(true), 47);
    std::vector<int> src = {4, 5, 6, 7, kEosId};
    StreamSession sess = simulate(model, wait_k_policy(2), src, true);
    REQUIRE(!sess.steps.empty());
    for (const auto& s : sess.steps) {
        CHECK(s.L_resolved >= s.g);
        CHECK(s.fill_start == s.g);
        CHECK(static_cast<int>(s.attention_row.size()) == s.L_resolved);
        CHECK(s.predicted_argmax_len >= 1);
        if (s.g == sess.src_len) CHECK(s.L_resolved == sess.src_len);
    }
}

TEST_CASE("decoding halts at max_len even without <eos>") {
    Model<float> model(stream_config(), 53);
    std::vector<int> src = {4, 5, 6, kEosId};
    StreamSession sess = simulate(model, wait_k_policy(1), src, false, 3);
    CHECK(sess.steps.size() <= 3);
    CHECK(sess.hypothesis.size() <= 3);
}

TEST_CASE("trace files round-trip through the JSON-lines format") {
    Model<float> model(stream_config(true), 59);
    std::vector<std::vector<int>> sources = {{4, 5, kEosId}, {6, 7, 5, kEosId}};
    std::vector<SentenceTrace> traces;
    for (size_t n = 0; n < sources.size(); ++n) {
        StreamSession sess = simulate(model, wait_k_policy(2), sources[n], true);
        SentenceTrace t;
        t.sent = static_cast<int>(n);
        t.src_len = sess.src_len;
        t.hyp = sess.hypothesis;
        if (n == 0) t.ref = {5, 4};
        t.steps = sess.steps;
        traces.push_back(std::move(t));
    }

    const char* path = "_trace_roundtrip.jsonl";
    {
        std::ofstream os(path);
        write_trace_header(os);
        for (const auto& t : traces) write_sentence_trace(os, t);
    }
    std::vector<SentenceTrace> back = read_traces(path);
    REQUIRE(back.size() == traces.size());
    for (size_t n = 0; n < traces.size(); ++n) {
        CHECK(back[n].sent == traces[n].sent);
        CHECK(back[n].src_len == traces[n].src_len);
        CHECK(back[n].hyp == traces[n].hyp);
        CHECK(back[n].ref == traces[n].ref);
        REQUIRE(back[n].steps.size() == traces[n].steps.size());
        for (size_t s = 0; s < traces[n].steps.size(); ++s) {
            CHECK(back[n].steps[s].g == traces[n].steps[s].g);
            CHECK(back[n].steps[s].L_resolved == traces[n].steps[s].L_resolved);
            CHECK(back[n].steps[s].emitted_id == traces[n].steps[s].emitted_id);
            CHECK(back[n].steps[s].fill_start == traces[n].steps[s].fill_start);
            CHECK(back[n].steps[s].attention_row == traces[n].steps[s].attention_row);
            CHECK(back[n].steps[s].predicted_argmax_len == traces[n].steps[s].predicted_argmax_len);
        }
    }
    std::remove(path);
}

TEST_CASE("trace reader reports malformed lines by number and demands a header") {
    const char* bad = "_trace_bad.jsonl";
    {
        std::ofstream os(bad);
        write_trace_header(os);
        os << "{\"sent\": 0, \"src_len\": 2, \"hyp\": [4]}\n";
        os << "not json at all\n";
    }
    CHECK_THROWS_WITH_AS(read_traces(bad), doctest::Contains("line 3"), Error);
    std::remove(bad);

    const char* headerless = "_trace_headerless.jsonl";
    {
        std::ofstream os(headerless);
        os << "{\"sent\": 0, \"src_len\": 2, \"hyp\": [4]}\n";
    }
    CHECK_THROWS_WITH_AS(read_traces(headerless), doctest::Contains("header"), Error);
    std::remove(headerless);
    CHECK_THROWS_AS(read_traces("no/such/trace.jsonl"), Error);
}
