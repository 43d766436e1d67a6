#include <doctest.h>

#include "slaf/policy.hpp"
#include "slaf/rng.hpp"

#include <cstdio>
#include <fstream>

using namespace slaf;

TEST_CASE("wait-k schedule: k=3, src=6, tgt=6 enumerates to [3,4,5,6,6,6]") {
    PolicySchedule s = wait_k_schedule(3, 6, 6);
    std::vector<int> expect = {3, 4, 5, 6, 6, 6};
    CHECK(s.g == expect);
    CHECK(s.context_at(1) == 3);
    CHECK(s.context_at(6) == 6);
    CHECK_THROWS_AS(s.context_at(0), Error);
    CHECK_THROWS_AS(s.context_at(7), Error);
}

TEST_CASE("wait-k schedule properties over a grid of (k, src, tgt)") {
    for (int k = 1; k <= 8; ++k)
        for (int src = 1; src <= 10; ++src)
            for (int tgt = 1; tgt <= 10; ++tgt) {
                PolicySchedule s = wait_k_schedule(k, src, tgt);
                REQUIRE(static_cast<int>(s.g.size()) == tgt);
                for (int i = 1; i <= tgt; ++i) {
                    int g = s.context_at(i);
                    CHECK(g >= 1);
                    CHECK(g <= src);
                    if (i > 1) {
                        CHECK(g >= s.context_at(i - 1));
                        CHECK(g - s.context_at(i - 1) <= 1); // reads one word per step
                    }
                    if (k + i - 1 <= src) CHECK(g == k + i - 1);
                }
                // k >= src degenerates to the full-sentence schedule
                if (k >= src) CHECK(s.g == full_sentence_schedule(src, tgt).g);
            }
    CHECK_THROWS_AS(wait_k_schedule(0, 5, 5), Error);
    CHECK_THROWS_AS(wait_k_schedule(3, 0, 5), Error);
}

TEST_CASE("full-sentence schedule reads everything before the first word") {
    PolicySchedule s = full_sentence_schedule(4, 7);
    for (int i = 1; i <= 7; ++i) CHECK(s.context_at(i) == 4);
    CHECK(s.kind == PolicyKind::FullSentence);
}

TEST_CASE("beta argmax schedule: non-monotone [3,1,2] is repaired to [3,3,3]") {
    WritingProbMatrix m;
    m.beta = {{0.1, 0.2, 0.7}, {0.8, 0.1, 0.1}, {0.2, 0.6, 0.2}};
    PolicySchedule s = schedule_from_writing_probs(m);
    std::vector<int> expect = {3, 3, 3};
    CHECK(s.g == expect);
    CHECK(s.repaired);
    CHECK(s.src_len == 3);
    CHECK(s.kind == PolicyKind::FromBeta);
}

TEST_CASE("beta argmax ties resolve toward the smallest column") {
    WritingProbMatrix m;
    m.beta = {{0.5, 0.5}, {0.25, 0.75}};
    PolicySchedule s = schedule_from_writing_probs(m);
    std::vector<int> expect = {1, 2};
    CHECK(s.g == expect);
    CHECK_FALSE(s.repaired);
}

TEST_CASE("beta schedule is invariant to positive row rescaling") {
    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        WritingProbMatrix a;
        int rows = 2 + static_cast<int>(rng.next_below(5));
        int cols = 2 + static_cast<int>(rng.next_below(5));
        for (int i = 0; i < rows; ++i) {
            std::vector<double> row;
            for (int j = 0; j < cols; ++j) row.push_back(rng.uniform(0.01, 1.0));
            a.beta.push_back(std::move(row));
        }
        WritingProbMatrix b = a;
        for (int i = 0; i < rows; ++i) {
            double c = rng.uniform(0.5, 4.0);
            for (double& v : b.beta[i]) v *= c;
        }
        CHECK(schedule_from_writing_probs(a).g == schedule_from_writing_probs(b).g);
    }
}

TEST_CASE("beta schedules from random matrices are always valid") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        WritingProbMatrix m;
        int rows = 1 + static_cast<int>(rng.next_below(8));
        int cols = 1 + static_cast<int>(rng.next_below(8));
        for (int i = 0; i < rows; ++i) {
            std::vector<double> row;
            for (int j = 0; j < cols; ++j) row.push_back(rng.uniform(0.0, 1.0));
            m.beta.push_back(std::move(row));
        }
        PolicySchedule s = schedule_from_writing_probs(m);
        int prev = 1;
        for (int g : s.g) {
            CHECK(g >= prev);
            CHECK(g >= 1);
            CHECK(g <= cols);
            prev = g;
        }
    }
}

TEST_CASE("beta file round-trip and ragged-row rejection") {
    const char* good = "_beta_good.txt";
    {
        std::ofstream os(good);
        os << "0.1 0.9\n\n0.7 0.3\n";
    }
    WritingProbMatrix m = load_writing_probs(good);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    CHECK(m.beta[1][0] == doctest::Approx(0.7));

    const char* ragged = "_beta_ragged.txt";
    {
        std::ofstream os(ragged);
        os << "0.1 0.9\n0.5\n";
    }
    CHECK_THROWS_WITH_AS(load_writing_probs(ragged), doctest::Contains("ragged"), Error);
    CHECK_THROWS_AS(load_writing_probs("no/such/file.txt"), Error);
    std::remove(good);
    std::remove(ragged);
}
