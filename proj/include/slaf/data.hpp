#pragma once

#include "slaf/common.hpp"
#include "slaf/rng.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace slaf {

// Whitespace-tokenized parallel corpora, frequency-cutoff vocabularies and
// deterministic length-bucketed batching.

constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr int kBosId = 2;
constexpr int kEosId = 3;

class Vocabulary {
public:
    Vocabulary() {
        for (const char* t : {"<pad>", "<unk>", "<bos>", "<eos>"})
            add_token(t);
    }

    int add_token(const std::string& tok) {
        auto it = token_to_id_.find(tok);
        if (it != token_to_id_.end()) return it->second;
        int id = static_cast<int>(id_to_token_.size());
        token_to_id_.emplace(tok, id);
        id_to_token_.push_back(tok);
        return id;
    }

    int id(const std::string& tok) const {
        auto it = token_to_id_.find(tok);
        return it == token_to_id_.end() ? kUnkId : it->second;
    }

    const std::string& token(int id) const {
        SLAF_CHECK(id >= 0 && id < static_cast<int>(id_to_token_.size()),
                   "vocab: id ", id, " outside vocabulary of ", id_to_token_.size());
        return id_to_token_[id];
    }

    int size() const { return static_cast<int>(id_to_token_.size()); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    int min_freq = 1;

private:
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
};

inline std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> toks;
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

// Tokens with frequency < min_freq map to <unk>. Kept tokens get ids in
// frequency-descending order, ties broken lexicographically, so the
// vocabulary is a pure function of the corpus.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_freq) {
    SLAF_CHECK(!corpus.empty(), "build_vocab: empty corpus");
    std::map<std::string, long> freq;
    for (const auto& sent : corpus)
        for (const auto& tok : sent)
            ++freq[tok];
    std::vector<std::pair<std::string, long>> kept;
    for (const auto& [tok, f] : freq)
        if (f >= min_freq) kept.emplace_back(tok, f);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    v.min_freq = min_freq;
    for (const auto& [tok, f] : kept) v.add_token(tok);
    return v;
}

// src: token ids ending in <eos>, length J.
// tgt: token ids without specials; the trainer wraps them with <bos>/<eos>.
struct TokenizedPair {
    std::vector<int> src;
    std::vector<int> tgt;

    int src_len() const { return static_cast<int>(src.size()); }
    int tgt_len() const { return static_cast<int>(tgt.size()); }
};

struct RawCorpus {
    std::vector<std::vector<std::string>> src;
    std::vector<std::vector<std::string>> tgt;
};

inline RawCorpus load_parallel_corpus(const std::string& src_path, const std::string& tgt_path) {
    std::ifstream fs(src_path), ft(tgt_path);
    SLAF_CHECK(fs.good(), "corpus: cannot open ", src_path);
    SLAF_CHECK(ft.good(), "corpus: cannot open ", tgt_path);
    RawCorpus c;
    std::string line;
    while (std::getline(fs, line)) c.src.push_back(split_ws(line));
    while (std::getline(ft, line)) c.tgt.push_back(split_ws(line));
    SLAF_CHECK(c.src.size() == c.tgt.size(), "corpus: line count mismatch, ",
               src_path, " has ", c.src.size(), " lines but ", tgt_path, " has ", c.tgt.size());
    return c;
}

struct EncodedCorpus {
    std::vector<TokenizedPair> pairs;
    int overlong_dropped = 0;
};

inline EncodedCorpus encode_corpus(const RawCorpus& raw, const Vocabulary& src_vocab,
                                   const Vocabulary& tgt_vocab, int max_positions) {
    EncodedCorpus out;
    for (size_t n = 0; n < raw.src.size(); ++n) {
        if (raw.src[n].empty() || raw.tgt[n].empty()) continue;
        TokenizedPair p;
        for (const auto& t : raw.src[n]) p.src.push_back(src_vocab.id(t));
        p.src.push_back(kEosId);
        for (const auto& t : raw.tgt[n]) p.tgt.push_back(tgt_vocab.id(t));
        // +2 covers the <bos>/<eos> wrapping of the target
        if (p.src_len() > max_positions || p.tgt_len() + 2 > max_positions) {
            ++out.overlong_dropped;
            continue;
        }
        out.pairs.push_back(std::move(p));
    }
    return out;
}

inline std::vector<std::string> decode_ids(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::vector<std::string> toks;
    for (int id : ids)
        if (id != kPadId && id != kBosId && id != kEosId)
            toks.push_back(vocab.token(id));
    return toks;
}

// ---- synthetic tasks ----

enum class SynthKind { Copy, Reverse, Shift };

inline SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "copy") return SynthKind::Copy;
    if (s == "reverse") return SynthKind::Reverse;
    if (s == "shift") return SynthKind::Shift;
    fail("synth: unknown task kind '", s, "' (copy, reverse, shift)");
}

// Deterministic parallel corpus over a token alphabet w0..w{vocab_size-1}.
// reverse: target is the mirrored source; shift: tokens rotated by offset 1.
inline RawCorpus synth_task(SynthKind kind, int vocab_size, int min_len, int max_len,
                            int n, std::uint64_t seed) {
    SLAF_CHECK(vocab_size >= 2, "synth: vocab_size must be >= 2, got ", vocab_size);
    SLAF_CHECK(min_len >= 1 && max_len >= min_len,
               "synth: degenerate length range [", min_len, ",", max_len, "]");
    Rng rng = Rng::derive(seed, 17);
    RawCorpus c;
    for (int i = 0; i < n; ++i) {
        int len = min_len + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_len - min_len + 1)));
        std::vector<std::string> src;
        for (int j = 0; j < len; ++j)
            src.push_back("w" + std::to_string(rng.next_below(static_cast<std::uint64_t>(vocab_size))));
        std::vector<std::string> tgt = src;
        if (kind == SynthKind::Reverse) {
            std::reverse(tgt.begin(), tgt.end());
        } else if (kind == SynthKind::Shift) {
            for (auto& t : tgt) {
                int v = std::stoi(t.substr(1));
                t = "w" + std::to_string((v + 1) % vocab_size);
            }
        }
        c.src.push_back(std::move(src));
        c.tgt.push_back(std::move(tgt));
    }
    return c;
}

inline void write_corpus(const RawCorpus& c, const std::string& src_path, const std::string& tgt_path) {
    std::ofstream fs(src_path), ft(tgt_path);
    SLAF_CHECK(fs.good() && ft.good(), "corpus: cannot write ", src_path, " / ", tgt_path);
    auto write_side = [](std::ofstream& f, const std::vector<std::vector<std::string>>& side) {
        for (const auto& sent : side) {
            for (size_t i = 0; i < sent.size(); ++i)
                f << (i ? " " : "") << sent[i];
            f << "\n";
        }
    };
    write_side(fs, c.src);
    write_side(ft, c.tgt);
}

// ---- batching ----

struct Batch {
    std::vector<TokenizedPair> pairs;
    // padded views, masks exactly delimiting true lengths
    std::vector<std::vector<int>> src_padded;
    std::vector<std::vector<int>> tgt_padded;
    std::vector<std::vector<bool>> src_mask;
    std::vector<std::vector<bool>> tgt_mask;
    long token_count = 0;
};

inline Batch make_batch(std::vector<TokenizedPair> pairs) {
    Batch b;
    b.pairs = std::move(pairs);
    int max_src = 0, max_tgt = 0;
    for (const auto& p : b.pairs) {
        max_src = std::max(max_src, p.src_len());
        max_tgt = std::max(max_tgt, p.tgt_len());
        b.token_count += p.tgt_len() + 1; // +1 for <eos>
    }
    for (const auto& p : b.pairs) {
        std::vector<int> s(max_src, kPadId), t(max_tgt, kPadId);
        std::vector<bool> sm(max_src, false), tm(max_tgt, false);
        std::copy(p.src.begin(), p.src.end(), s.begin());
        std::copy(p.tgt.begin(), p.tgt.end(), t.begin());
        std::fill(sm.begin(), sm.begin() + p.src_len(), true);
        std::fill(tm.begin(), tm.begin() + p.tgt_len(), true);
        b.src_padded.push_back(std::move(s));
        b.tgt_padded.push_back(std::move(t));
        b.src_mask.push_back(std::move(sm));
        b.tgt_mask.push_back(std::move(tm));
    }
    return b;
}

// Sort by source length, pack under a token budget, then shuffle batch order
// per (seed, epoch). Pure function of its arguments.
class BatchPlan {
public:
    BatchPlan(const std::vector<TokenizedPair>& pairs, long token_budget) {
        SLAF_CHECK(token_budget >= 1, "batching: token budget must be >= 1");
        std::vector<size_t> order(pairs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return pairs[a].src_len() < pairs[b].src_len();
        });
        std::vector<TokenizedPair> cur;
        long cur_tokens = 0;
        for (size_t idx : order) {
            long t = pairs[idx].src_len() + pairs[idx].tgt_len() + 2;
            if (!cur.empty() && cur_tokens + t > token_budget) {
                batches_.push_back(make_batch(std::move(cur)));
                cur.clear();
                cur_tokens = 0;
            }
            cur.push_back(pairs[idx]);
            cur_tokens += t;
        }
        if (!cur.empty()) batches_.push_back(make_batch(std::move(cur)));
    }

    size_t size() const { return batches_.size(); }

    // epoch-shuffled access; order depends only on (seed, epoch)
    const Batch& at(std::uint64_t seed, long epoch, size_t pos) const {
        std::vector<size_t> perm = epoch_order(seed, epoch);
        return batches_[perm[pos % perm.size()]];
    }

    std::vector<size_t> epoch_order(std::uint64_t seed, long epoch) const {
        std::vector<size_t> perm(batches_.size());
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        Rng rng = Rng::derive(seed, 1000 + static_cast<std::uint64_t>(epoch));
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[rng.next_below(i)]);
        return perm;
    }

    const std::vector<Batch>& batches() const { return batches_; }

private:
    std::vector<Batch> batches_;
};

} // namespace slaf
