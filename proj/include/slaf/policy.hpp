#pragma once

#include "slaf/common.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace slaf {

// Read/write schedules. g[i-1] (0-based storage, 1-based semantics) is the
// number of source words read before target word i is emitted. A valid
// schedule is monotone non-decreasing with 1 <= g(i) <= src_len.

enum class PolicyKind { FullSentence, WaitK, FromBeta };

struct PolicySchedule {
    std::vector<int> g;
    PolicyKind kind = PolicyKind::WaitK;
    int k = 0;
    int src_len = 0;
    bool repaired = false; // argmax schedule was non-monotone and got fixed

    int context_at(int step) const {
        SLAF_CHECK(step >= 1 && step <= static_cast<int>(g.size()),
                   "schedule: step ", step, " outside 1..", g.size());
        return g[step - 1];
    }
};

inline PolicySchedule wait_k_schedule(int k, int src_len, int tgt_len) {
    SLAF_CHECK(k >= 1, "wait-k: k must be >= 1, got ", k);
    SLAF_CHECK(src_len >= 1 && tgt_len >= 1,
               "wait-k: lengths must be >= 1, got src ", src_len, " tgt ", tgt_len);
    PolicySchedule s;
    s.kind = PolicyKind::WaitK;
    s.k = k;
    s.src_len = src_len;
    s.g.resize(tgt_len);
    for (int i = 1; i <= tgt_len; ++i)
        s.g[i - 1] = std::min(k + i - 1, src_len);
    return s;
}

inline PolicySchedule full_sentence_schedule(int src_len, int tgt_len) {
    SLAF_CHECK(src_len >= 1 && tgt_len >= 1, "full schedule: lengths must be >= 1");
    PolicySchedule s;
    s.kind = PolicyKind::FullSentence;
    s.src_len = src_len;
    s.g.assign(tgt_len, src_len);
    return s;
}

// Writing probabilities beta[i][j] from an adaptive policy. Raw per-step
// read point is argmax_j beta[i][j] (ties toward smallest j); the result is
// monotonized by running maximum since a streaming schedule cannot re-read.
struct WritingProbMatrix {
    std::vector<std::vector<double>> beta;

    int rows() const { return static_cast<int>(beta.size()); }
    int cols() const { return beta.empty() ? 0 : static_cast<int>(beta[0].size()); }
};

inline WritingProbMatrix load_writing_probs(const std::string& path) {
    std::ifstream in(path);
    SLAF_CHECK(in.good(), "beta file: cannot open ", path);
    WritingProbMatrix m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::vector<double> row;
        double v;
        while (is >> v) row.push_back(v);
        if (!m.beta.empty())
            SLAF_CHECK(row.size() == m.beta[0].size(),
                       "beta file: ragged row of ", row.size(), " values, expected ", m.beta[0].size());
        m.beta.push_back(std::move(row));
    }
    SLAF_CHECK(!m.beta.empty(), "beta file: empty matrix in ", path);
    return m;
}

inline PolicySchedule schedule_from_writing_probs(const WritingProbMatrix& m) {
    SLAF_CHECK(m.rows() >= 1 && m.cols() >= 1, "beta schedule: empty matrix");
    PolicySchedule s;
    s.kind = PolicyKind::FromBeta;
    s.src_len = m.cols();
    s.g.resize(m.rows());
    int running = 1;
    for (int i = 0; i < m.rows(); ++i) {
        int arg = 0;
        for (int j = 1; j < m.cols(); ++j)
            if (m.beta[i][j] > m.beta[i][arg]) arg = j;
        int raw = arg + 1; // 1-based read point
        if (raw < running) s.repaired = true;
        running = std::max(running, raw);
        s.g[i] = running;
    }
    return s;
}

} // namespace slaf
