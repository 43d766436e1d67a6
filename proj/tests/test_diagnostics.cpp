#include <doctest.h>

#include "slaf/diagnostics.hpp"

#include <cmath>

using namespace slaf;

namespace {

// Independent BLEU oracle: no hash maps, no shared helpers. Counts clipped
// n-gram matches by direct subsequence comparison.
double oracle_corpus_bleu(const std::vector<std::vector<int>>& hyps,
                          const std::vector<std::vector<int>>& refs) {
    long hyp_len = 0, ref_len = 0;
    double log_p = 0.0;
    for (int n = 1; n <= 4; ++n) {
        long matched = 0, total = 0;
        for (size_t s = 0; s < hyps.size(); ++s) {
            const auto& h = hyps[s];
            const auto& r = refs[s];
            if (n == 1) {
                hyp_len += static_cast<long>(h.size());
                ref_len += static_cast<long>(r.size());
            }
            if (static_cast<int>(h.size()) < n) continue;
            std::vector<bool> r_used(r.size(), false);
            // greedy clipping: each reference n-gram occurrence matches once
            for (size_t i = 0; i + n <= h.size(); ++i) {
                ++total;
                for (size_t j = 0; r.size() >= static_cast<size_t>(n) && j + n <= r.size(); ++j) {
                    if (r_used[j]) continue;
                    bool eq = true;
                    for (int d = 0; d < n; ++d)
                        if (h[i + d] != r[j + d]) { eq = false; break; }
                    if (eq) {
                        r_used[j] = true;
                        ++matched;
                        break;
                    }
                }
            }
        }
        if (total == 0 || matched == 0) return 0.0;
        log_p += std::log(static_cast<double>(matched) / total);
    }
    if (hyp_len == 0) return 0.0;
    double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
    return bp * std::exp(log_p / 4.0);
}

SentenceTrace one_step_trace(int sent, double first_pos_ratio) {
    SentenceTrace t;
    t.sent = sent;
    t.src_len = 2;
    StepRecord s;
    s.step = 1;
    s.g = 2;
    s.L_resolved = 2;
    s.fill_start = 2;
    s.attention_row = {first_pos_ratio, 1.0 - first_pos_ratio};
    t.steps.push_back(std::move(s));
    return t;
}

} // namespace

TEST_CASE("corpus BLEU matches the brute-force oracle on random corpora") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed + 400);
        std::vector<std::vector<int>> hyps, refs;
        int sentences = 1 + static_cast<int>(rng.next_below(6));
        for (int s = 0; s < sentences; ++s) {
            std::vector<int> h, r;
            int hl = 1 + static_cast<int>(rng.next_below(8));
            int rl = 1 + static_cast<int>(rng.next_below(8));
            for (int i = 0; i < hl; ++i) h.push_back(static_cast<int>(rng.next_below(3)));
            for (int i = 0; i < rl; ++i) r.push_back(static_cast<int>(rng.next_below(3)));
            hyps.push_back(std::move(h));
            refs.push_back(std::move(r));
        }
        CHECK(corpus_bleu(hyps, refs) ==
              doctest::Approx(oracle_corpus_bleu(hyps, refs)).epsilon(1e-12));
    }
}

TEST_CASE("BLEU anchor values") {
    std::vector<std::vector<int>> ref = {{1, 2, 3, 4, 5}};
    CHECK(corpus_bleu(ref, ref) == doctest::Approx(1.0).epsilon(1e-12));

    // shortened perfect prefix: precision 1, only the brevity penalty bites
    std::vector<std::vector<int>> hyp = {{1, 2, 3, 4}};
    CHECK(corpus_bleu(hyp, ref) == doctest::Approx(std::exp(1.0 - 5.0 / 4.0)).epsilon(1e-12));

    // no 4-gram overlap: corpus BLEU collapses to 0, smoothed sentence BLEU does not
    std::vector<int> h = {1, 2, 3, 9, 5, 6};
    std::vector<int> r = {1, 2, 3, 4, 5, 6};
    CHECK(corpus_bleu({h}, {r}) == 0.0);
    CHECK(sentence_bleu(h, r) > 0.0);
    CHECK(sentence_bleu(r, r) > sentence_bleu(h, r));

    CHECK_THROWS_AS(corpus_bleu({{1}}, {}), Error);
}

TEST_CASE("average attention hand example: A = [0.75, 0.5], bias ratio 0.6") {
    SentenceTrace t;
    t.sent = 0;
    t.src_len = 2;
    StepRecord s1;
    s1.step = 1;
    s1.g = 1;
    s1.L_resolved = 1;
    s1.fill_start = 1;
    s1.attention_row = {1.0};
    StepRecord s2;
    s2.step = 2;
    s2.g = 2;
    s2.L_resolved = 2;
    s2.fill_start = 2;
    s2.attention_row = {0.5, 0.5};
    t.steps = {s1, s2};

    auto reports = average_attention({t});
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].bucket == 2);
    CHECK(reports[0].avg_attention[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(reports[0].avg_attention[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(reports[0].counts == std::vector<long>{2, 1});
    CHECK(reports[0].bias_ratio() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(sentence_bias_ratio(t) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("PE-fill columns never enter the attention averages") {
    SentenceTrace t;
    t.src_len = 3;
    StepRecord s;
    s.step = 1;
    s.g = 1;
    s.L_resolved = 3; // two fill columns
    s.fill_start = 1;
    s.attention_row = {0.2, 0.5, 0.3};
    t.steps = {s};
    auto reports = average_attention({t});
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].avg_attention[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(reports[0].counts == std::vector<long>{1, 0, 0});
    CHECK(reports[0].avg_attention[1] == 0.0);
}

TEST_CASE("attention reports bucket by source length and honor the minimum size") {
    std::vector<SentenceTrace> traces = {one_step_trace(0, 0.5), one_step_trace(1, 0.7)};
    SentenceTrace longer = one_step_trace(2, 0.5);
    longer.src_len = 3;
    longer.steps[0].attention_row = {0.3, 0.3, 0.4};
    longer.steps[0].g = 3;
    longer.steps[0].L_resolved = 3;
    longer.steps[0].fill_start = 3;
    traces.push_back(longer);

    auto all = average_attention(traces, 1);
    CHECK(all.size() == 2);
    auto filtered = average_attention(traces, 2);
    REQUIRE(filtered.size() == 1);
    CHECK(filtered[0].bucket == 2);
    CHECK(filtered[0].n_sentences == 2);
    CHECK(filtered[0].avg_attention[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("duplicate n-gram proportions on hand examples") {
    CHECK(duplicate_ngram_proportion({7, 7, 8}, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(duplicate_ngram_proportion({7, 8, 7, 8}, 2) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(duplicate_ngram_proportion({7, 8, 9}, 1) == 0.0);
    CHECK(duplicate_ngram_proportion({7}, 2) == 0.0); // too short
    CHECK_THROWS_AS(duplicate_ngram_proportion({7}, 0), Error);

    // micro-average pools n-gram counts: (1 dup of 3) + (0 dup of 2) = 1/5
    double pooled = corpus_duplicate_proportion({{7, 7, 8}, {8, 9}}, 1);
    CHECK(pooled == doctest::Approx(1.0 / 5).epsilon(1e-12));
    CHECK(corpus_duplicate_proportion({{7}}, 2) == 0.0);
}

TEST_CASE("bias quintiles sort stably and bucket quality from least to most biased") {
    std::vector<SentenceTrace> traces;
    std::vector<std::vector<int>> refs;
    for (int i = 0; i < 10; ++i) {
        SentenceTrace t = one_step_trace(i, 0.05 + 0.09 * i);
        // the two least-biased sentences translate perfectly; the rest share no tokens
        if (i < 2) {
            t.hyp = {1, 2, 3, 4, 5};
            refs.push_back({1, 2, 3, 4, 5});
        } else {
            t.hyp = {8, 9, 8, 9, 8};
            refs.push_back({1, 2, 3, 4, 5});
        }
        traces.push_back(std::move(t));
    }
    BiasQuintiles q = bias_bucketed_quality(traces, refs);
    REQUIRE(q.bleu.size() == 5);
    CHECK(q.bleu[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int part = 1; part < 5; ++part) CHECK(q.bleu[part] == 0.0);
    for (int part = 1; part < 5; ++part) CHECK(q.mean_ratio[part] > q.mean_ratio[part - 1]);
    CHECK_THROWS_AS(bias_bucketed_quality({traces[0]}, {refs[0]}), Error);
    CHECK_THROWS_AS(bias_bucketed_quality(traces, {}), Error);
}

TEST_CASE("fill-attention curve averages the mass on fill columns per step") {
    SentenceTrace t;
    t.src_len = 3;
    StepRecord s1;
    s1.step = 1;
    s1.g = 1;
    s1.L_resolved = 3;
    s1.fill_start = 1;
    s1.attention_row = {0.4, 0.35, 0.25}; // fill mass 0.6
    StepRecord s2;
    s2.step = 2;
    s2.g = 3;
    s2.L_resolved = 3;
    s2.fill_start = 3;
    s2.attention_row = {0.5, 0.3, 0.2}; // no fill columns
    t.steps = {s1, s2};
    FillCurve curve = fill_attention_curve({t, t});
    REQUIRE(curve.mean_fill_attention.size() == 2);
    CHECK(curve.mean_fill_attention[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(curve.mean_fill_attention[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(curve.counts == std::vector<long>{2, 2});
}

TEST_CASE("length accuracy curve is indexed by words received") {
    SentenceTrace t;
    t.src_len = 4;
    StepRecord s1;
    s1.step = 1;
    s1.g = 2;
    s1.L_resolved = 3; // wrong
    StepRecord s2;
    s2.step = 2;
    s2.g = 2;
    s2.L_resolved = 4; // right, same received count
    StepRecord s3;
    s3.step = 3;
    s3.g = 4;
    s3.L_resolved = 4; // right
    t.steps = {s1, s2, s3};
    LengthAccuracyCurve c = length_accuracy_curve({t});
    REQUIRE(c.accuracy.size() == 4);
    CHECK(c.accuracy[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.accuracy[3] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.counts == std::vector<long>{0, 2, 0, 1});
    CHECK(c.overall == doctest::Approx(2.0 / 3).epsilon(1e-12));
}

TEST_CASE("prefix decomposition identities hold on random joints by enumeration") {
    Rng rng(314);
    for (int trial = 0; trial < 20; ++trial) {
        int J = 2 + static_cast<int>(rng.next_below(2)); // 2..3
        int I = 2 + static_cast<int>(rng.next_below(2));
        DiscreteJoint joint = DiscreteJoint::random(2, J, I, rng);
        for (int k = 1; k <= J; ++k) {
            double err = decomposition_check(joint, wait_k_schedule(k, J, I));
            CHECK_MESSAGE(err < 1e-10, "trial ", trial, " k ", k, " err ", err);
        }
        double err_full = decomposition_check(joint, full_sentence_schedule(J, I));
        CHECK(err_full < 1e-10);
    }
}

TEST_CASE("decomposition check rejects an unnormalized joint") {
    Rng rng(1);
    DiscreteJoint joint = DiscreteJoint::random(2, 2, 2, rng);
    joint.p[0] += 0.5;
    CHECK_THROWS_WITH_AS(decomposition_check(joint, wait_k_schedule(1, 2, 2)),
                         doctest::Contains("not normalized"), Error);
}
