#pragma once

#include "slaf/bleu.hpp"
#include "slaf/policy.hpp"
#include "slaf/stream.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

namespace slaf {

// Analysis metrics over decode traces: per-position average attention,
// bias ratio, bias-bucketed quality, duplicate n-grams, fill-column
// attention, and length-prediction accuracy.

// Average attention per source position, one report per source-length
// bucket: A_j = sum_i alpha_ij / sum_i 1[j <= g(i)]. Fill columns are never
// counted, so plain and LAF traces are compared over the same column set.
struct AttentionReport {
    int bucket = 0; // source length
    int n_sentences = 0;
    std::vector<double> avg_attention; // A_j, 1-based position j at index j-1
    std::vector<long> counts;          // times position j was attendable

    double bias_ratio() const {
        SLAF_CHECK(!avg_attention.empty(), "bias_ratio: empty report");
        double total = std::accumulate(avg_attention.begin(), avg_attention.end(), 0.0);
        SLAF_CHECK(total > 0.0, "bias_ratio: zero attention mass");
        return avg_attention[0] / total;
    }
};

inline std::vector<AttentionReport> average_attention(const std::vector<SentenceTrace>& traces,
                                                      int min_bucket_size = 1) {
    std::map<int, std::pair<std::vector<double>, std::vector<long>>> buckets;
    std::map<int, int> bucket_sentences;
    for (const auto& t : traces) {
        auto& [sums, counts] = buckets[t.src_len];
        if (sums.empty()) {
            sums.assign(t.src_len, 0.0);
            counts.assign(t.src_len, 0);
        }
        ++bucket_sentences[t.src_len];
        for (const auto& s : t.steps) {
            int attendable = std::min(s.g, t.src_len);
            for (int j = 0; j < attendable && j < static_cast<int>(s.attention_row.size()); ++j) {
                sums[j] += s.attention_row[j];
                ++counts[j];
            }
        }
    }
    std::vector<AttentionReport> out;
    for (auto& [len, data] : buckets) {
        if (bucket_sentences[len] < min_bucket_size) continue;
        AttentionReport r;
        r.bucket = len;
        r.n_sentences = bucket_sentences[len];
        r.counts = data.second;
        r.avg_attention.resize(len, 0.0);
        for (int j = 0; j < len; ++j)
            if (data.second[j] > 0) r.avg_attention[j] = data.first[j] / data.second[j];
        out.push_back(std::move(r));
    }
    return out;
}

inline double bias_ratio(const AttentionReport& r) { return r.bias_ratio(); }

// Per-sentence bias ratio (same formula over a single sentence's trace).
inline double sentence_bias_ratio(const SentenceTrace& t) {
    std::vector<double> sums(t.src_len, 0.0);
    std::vector<long> counts(t.src_len, 0);
    for (const auto& s : t.steps) {
        int attendable = std::min(s.g, t.src_len);
        for (int j = 0; j < attendable && j < static_cast<int>(s.attention_row.size()); ++j) {
            sums[j] += s.attention_row[j];
            ++counts[j];
        }
    }
    double total = 0.0, first = 0.0;
    for (int j = 0; j < t.src_len; ++j) {
        if (counts[j] == 0) continue;
        double a = sums[j] / counts[j];
        total += a;
        if (j == 0) first = a;
    }
    SLAF_CHECK(total > 0.0, "sentence_bias_ratio: zero attention mass");
    return first / total;
}

// Sentences sorted by bias ratio (stable, ties by sentence index), split
// into 5 equal parts from Bottom (least biased) to Top.
struct BiasQuintiles {
    std::vector<double> bleu;          // Bottom..Top
    std::vector<double> mean_ratio;    // mean bias ratio per part
};

inline BiasQuintiles bias_bucketed_quality(const std::vector<SentenceTrace>& traces,
                                           const std::vector<std::vector<int>>& refs) {
    SLAF_CHECK(traces.size() == refs.size(), "bias quintiles: ", traces.size(),
               " traces vs ", refs.size(), " references");
    SLAF_CHECK(traces.size() >= 5, "bias quintiles: need at least 5 sentences, got ", traces.size());
    std::vector<size_t> order(traces.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> ratio(traces.size());
    for (size_t i = 0; i < traces.size(); ++i) ratio[i] = sentence_bias_ratio(traces[i]);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return ratio[a] < ratio[b]; });
    BiasQuintiles out;
    size_t n = traces.size();
    for (int q = 0; q < 5; ++q) {
        size_t lo = n * q / 5, hi = n * (q + 1) / 5;
        std::vector<std::vector<int>> h, r;
        double mean = 0.0;
        for (size_t i = lo; i < hi; ++i) {
            h.push_back(traces[order[i]].hyp);
            r.push_back(refs[order[i]]);
            mean += ratio[order[i]];
        }
        out.bleu.push_back(corpus_bleu(h, r));
        out.mean_ratio.push_back(hi > lo ? mean / (hi - lo) : 0.0);
    }
    return out;
}

// 1 - distinct/total n-grams; 0 for fewer than n tokens.
inline double duplicate_ngram_proportion(const std::vector<int>& tokens, int n) {
    SLAF_CHECK(n >= 1, "duplicate n-grams: n must be >= 1");
    if (static_cast<int>(tokens.size()) < n) return 0.0;
    long total = static_cast<long>(tokens.size()) - n + 1;
    std::set<std::vector<int>> distinct;
    for (size_t i = 0; i + n <= tokens.size(); ++i)
        distinct.insert(std::vector<int>(tokens.begin() + i, tokens.begin() + i + n));
    return 1.0 - static_cast<double>(distinct.size()) / total;
}

// micro-average: pooled over all sentences, weighted by n-gram count
inline double corpus_duplicate_proportion(const std::vector<std::vector<int>>& sentences, int n) {
    long total = 0;
    double weighted = 0.0;
    for (const auto& s : sentences) {
        if (static_cast<int>(s.size()) < n) continue;
        long t = static_cast<long>(s.size()) - n + 1;
        weighted += duplicate_ngram_proportion(s, n) * t;
        total += t;
    }
    return total == 0 ? 0.0 : weighted / total;
}

// Mean attention mass on PE-fill columns per decoding step index.
struct FillCurve {
    std::vector<double> mean_fill_attention; // index = step - 1
    std::vector<long> counts;
};

inline FillCurve fill_attention_curve(const std::vector<SentenceTrace>& traces) {
    FillCurve out;
    for (const auto& t : traces) {
        for (const auto& s : t.steps) {
            size_t idx = static_cast<size_t>(s.step - 1);
            if (out.mean_fill_attention.size() <= idx) {
                out.mean_fill_attention.resize(idx + 1, 0.0);
                out.counts.resize(idx + 1, 0);
            }
            double mass = 0.0;
            for (size_t j = static_cast<size_t>(s.fill_start); j < s.attention_row.size(); ++j)
                mass += s.attention_row[j];
            out.mean_fill_attention[idx] += mass;
            ++out.counts[idx];
        }
    }
    for (size_t i = 0; i < out.mean_fill_attention.size(); ++i)
        if (out.counts[i] > 0) out.mean_fill_attention[i] /= out.counts[i];
    return out;
}

// accuracy(m) = fraction of steps with m received words whose resolved
// length equals the true source length.
struct LengthAccuracyCurve {
    std::vector<double> accuracy; // index = m - 1 received words
    std::vector<long> counts;
    double overall = 0.0;
};

inline LengthAccuracyCurve length_accuracy_curve(const std::vector<SentenceTrace>& traces) {
    LengthAccuracyCurve out;
    long correct_total = 0, total = 0;
    for (const auto& t : traces) {
        for (const auto& s : t.steps) {
            size_t idx = static_cast<size_t>(s.g - 1);
            if (out.accuracy.size() <= idx) {
                out.accuracy.resize(idx + 1, 0.0);
                out.counts.resize(idx + 1, 0);
            }
            bool correct = s.L_resolved == t.src_len;
            out.accuracy[idx] += correct ? 1.0 : 0.0;
            ++out.counts[idx];
            correct_total += correct ? 1 : 0;
            ++total;
        }
    }
    for (size_t i = 0; i < out.accuracy.size(); ++i)
        if (out.counts[i] > 0) out.accuracy[i] /= out.counts[i];
    out.overall = total ? static_cast<double>(correct_total) / total : 0.0;
    return out;
}

// ---- prefix-decomposition identity over explicit tiny joints ----
//
// A discrete joint p(x, y) over fixed-length sequences. Verifies
// (a) prod_i p(y_i | y_<i, x) = p(x,y) / p(x), and
// (b) prod_i p(y_i | y_<i, x_<=g(i)) =
//       p(y, x_<=g(I)) / [ p(x_<=g(1)) *
//         prod_{i>=2} p(x_{g(i-1)+1..g(i)} | y_<i, x_<=g(i-1)) ],
// by exhaustive enumeration of all conditionals from the joint.

struct DiscreteJoint {
    int alphabet = 2;
    int src_len = 2;
    int tgt_len = 2;
    std::vector<double> p; // index: x-digits (most significant) then y-digits

    size_t size() const {
        size_t n = 1;
        for (int i = 0; i < src_len + tgt_len; ++i) n *= static_cast<size_t>(alphabet);
        return n;
    }

    static DiscreteJoint random(int alphabet, int src_len, int tgt_len, Rng& rng) {
        DiscreteJoint j;
        j.alphabet = alphabet;
        j.src_len = src_len;
        j.tgt_len = tgt_len;
        j.p.resize(j.size());
        double sum = 0.0;
        for (auto& v : j.p) { v = rng.next_double() + 1e-6; sum += v; }
        for (auto& v : j.p) v /= sum;
        return j;
    }

    // marginal probability of x-prefix of length gx and y-prefix of length gy
    double prefix_prob(const std::vector<int>& x, int gx, const std::vector<int>& y, int gy) const {
        double sum = 0.0;
        size_t n = size();
        for (size_t idx = 0; idx < n; ++idx) {
            size_t rem = idx;
            bool match = true;
            // decode digits, x first then y, most significant first
            std::vector<int> digits(src_len + tgt_len);
            for (int d = src_len + tgt_len - 1; d >= 0; --d) {
                digits[d] = static_cast<int>(rem % alphabet);
                rem /= alphabet;
            }
            for (int d = 0; d < gx && match; ++d) match = digits[d] == x[d];
            for (int d = 0; d < gy && match; ++d) match = digits[src_len + d] == y[d];
            if (match) sum += p[idx];
        }
        return sum;
    }

    double joint_prob(const std::vector<int>& x, const std::vector<int>& y) const {
        size_t idx = 0;
        for (int d = 0; d < src_len; ++d) idx = idx * alphabet + x[d];
        for (int d = 0; d < tgt_len; ++d) idx = idx * alphabet + y[d];
        return p[idx];
    }
};

inline double decomposition_check(const DiscreteJoint& joint, const PolicySchedule& schedule) {
    double total = 0.0;
    for (double v : joint.p) total += v;
    SLAF_CHECK(std::abs(total - 1.0) <= 1e-12, "decomposition_check: joint not normalized, sums to ", total);
    SLAF_CHECK(static_cast<int>(schedule.g.size()) == joint.tgt_len,
               "decomposition_check: schedule covers ", schedule.g.size(),
               " steps for target length ", joint.tgt_len);

    int A = joint.alphabet, J = joint.src_len, I = joint.tgt_len;
    double max_err = 0.0;

    std::vector<int> x(J, 0), y(I, 0);
    auto next_seq = [A](std::vector<int>& s) {
        for (int d = static_cast<int>(s.size()) - 1; d >= 0; --d) {
            if (++s[d] < A) return true;
            s[d] = 0;
        }
        return false;
    };

    do {
        std::fill(y.begin(), y.end(), 0);
        do {
            // (a) full-sentence telescoping
            double lhs_full = 1.0;
            bool degenerate = false;
            for (int i = 1; i <= I; ++i) {
                double num = joint.prefix_prob(x, J, y, i);
                double den = joint.prefix_prob(x, J, y, i - 1);
                if (den <= 0.0) { degenerate = true; break; }
                lhs_full *= num / den;
            }
            if (!degenerate) {
                double px = joint.prefix_prob(x, J, y, 0);
                double rhs_full = px > 0.0 ? joint.joint_prob(x, y) / px : 0.0;
                max_err = std::max(max_err, std::abs(lhs_full - rhs_full));
            }

            // (b) SiMT telescoping
            double lhs_sim = 1.0;
            degenerate = false;
            for (int i = 1; i <= I; ++i) {
                int g = schedule.g[i - 1];
                double num = joint.prefix_prob(x, g, y, i);
                double den = joint.prefix_prob(x, g, y, i - 1);
                if (den <= 0.0) { degenerate = true; break; }
                lhs_sim *= num / den;
            }
            if (!degenerate) {
                double den = joint.prefix_prob(x, schedule.g[0], y, 0);
                for (int i = 2; i <= I; ++i) {
                    int g_prev = schedule.g[i - 2], g = schedule.g[i - 1];
                    // p(x segment (g_prev, g] | y_<i, x_<=g_prev)
                    double num_seg = joint.prefix_prob(x, g, y, i - 1);
                    double den_seg = joint.prefix_prob(x, g_prev, y, i - 1);
                    if (den_seg <= 0.0) { degenerate = true; break; }
                    den *= num_seg / den_seg;
                }
                if (!degenerate && den > 0.0) {
                    double rhs_sim = joint.prefix_prob(x, schedule.g[I - 1], y, I) / den;
                    max_err = std::max(max_err, std::abs(lhs_sim - rhs_sim));
                }
            }
        } while (next_seq(y));
    } while (next_seq(x));

    return max_err;
}

} // namespace slaf
