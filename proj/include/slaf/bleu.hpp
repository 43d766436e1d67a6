#pragma once

#include "slaf/common.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace slaf {

// Corpus BLEU-4 on [0,1]: geometric mean of modified n-gram precisions with
// brevity penalty. The sentence-level variant applies add-one smoothing to
// orders n >= 2.

namespace detail {

using Ngram = std::vector<int>;

inline std::map<Ngram, long> ngram_counts(const std::vector<int>& tokens, int n) {
    std::map<Ngram, long> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

} // namespace detail

inline double corpus_bleu(const std::vector<std::vector<int>>& hyps,
                          const std::vector<std::vector<int>>& refs,
                          int max_order = 4) {
    SLAF_CHECK(hyps.size() == refs.size(), "bleu: ", hyps.size(), " hypotheses vs ",
               refs.size(), " references");
    SLAF_CHECK(!refs.empty(), "bleu: empty corpus");
    std::vector<long> matched(max_order, 0), total(max_order, 0);
    long hyp_len = 0, ref_len = 0;
    for (size_t s = 0; s < hyps.size(); ++s) {
        hyp_len += static_cast<long>(hyps[s].size());
        ref_len += static_cast<long>(refs[s].size());
        for (int n = 1; n <= max_order; ++n) {
            auto hc = detail::ngram_counts(hyps[s], n);
            auto rc = detail::ngram_counts(refs[s], n);
            for (const auto& [ng, c] : hc) {
                auto it = rc.find(ng);
                matched[n - 1] += std::min(c, it == rc.end() ? 0L : it->second);
                total[n - 1] += c;
            }
        }
    }
    if (hyp_len == 0) return 0.0;
    double log_precision = 0.0;
    for (int n = 0; n < max_order; ++n) {
        if (total[n] == 0 || matched[n] == 0) return 0.0;
        log_precision += std::log(static_cast<double>(matched[n]) / total[n]);
    }
    double bp = hyp_len >= ref_len ? 1.0
                                   : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
    return bp * std::exp(log_precision / max_order);
}

inline double sentence_bleu(const std::vector<int>& hyp, const std::vector<int>& ref,
                            int max_order = 4) {
    if (hyp.empty()) return 0.0;
    double log_precision = 0.0;
    for (int n = 1; n <= max_order; ++n) {
        auto hc = detail::ngram_counts(hyp, n);
        auto rc = detail::ngram_counts(ref, n);
        long matched = 0, total = 0;
        for (const auto& [ng, c] : hc) {
            auto it = rc.find(ng);
            matched += std::min(c, it == rc.end() ? 0L : it->second);
            total += c;
        }
        double num = static_cast<double>(matched), den = static_cast<double>(total);
        if (n >= 2) { num += 1.0; den += 1.0; } // add-one smoothing
        if (den == 0.0 || num == 0.0) return 0.0;
        log_precision += std::log(num / den);
    }
    double bp = hyp.size() >= ref.size()
        ? 1.0
        : std::exp(1.0 - static_cast<double>(ref.size()) / hyp.size());
    return bp * std::exp(log_precision / max_order);
}

} // namespace slaf
