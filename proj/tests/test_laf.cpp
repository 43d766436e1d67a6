#include <doctest.h>

#include "slaf/data.hpp"
#include "slaf/gradcheck.hpp"
#include "slaf/laf.hpp"

#include <cmath>

using namespace slaf;

namespace {

ModelConfig laf_config(int max_positions = 16) {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_enc_layers = 1;
    cfg.n_dec_layers = 1;
    cfg.d_ffn = 16;
    cfg.max_positions = max_positions;
    cfg.src_vocab_size = 8;
    cfg.tgt_vocab_size = 8;
    cfg.dropout = 0.0;
    cfg.length_predictor = true;
    return cfg;
}

template <typename S>
void zero_param(Model<S>& model, const std::string& name) {
    for (auto& [n, p] : model.params().entries())
        if (n == name) {
            p.mutable_value().setZero();
            return;
        }
    FAIL("no parameter named ", name);
}

} // namespace

TEST_CASE("length resolution: eos fixes the length, short predictions clamp up") {
    LengthDistribution seven = LengthDistribution::from_probs(
        std::vector<double>(10, 0.05)); // uniform, argmax -> smallest class
    CHECK(seven.argmax_length == 1);

    std::vector<double> p(10, 0.0);
    p[6] = 1.0; // class 6 = length 7
    LengthDistribution d = LengthDistribution::from_probs(p);
    CHECK(d.argmax_length == 7);

    CHECK(resolve_length(d, 3, false) == 7); // prediction ahead of the prefix
    CHECK(resolve_length(d, 9, false) == 9); // prediction behind: clamp to prefix
    CHECK(resolve_length(d, 7, false) == 7);
    CHECK(resolve_length(d, 4, true) == 4);  // <eos> read: true length known
    CHECK(resolve_length(d, 12, true) == 12);
    CHECK_THROWS_AS(resolve_length(d, 0, false), Error);
}

TEST_CASE("an untrained predictor head with zero output weights is uniform") {
    ModelConfig cfg = laf_config();
    Model<double> model(cfg, 3);
    zero_param(model, "len_w");
    Var<double> h = model.encode({4, 5, kEosId}).h;
    LengthDistribution d = predict_length(model, h);
    REQUIRE(static_cast<int>(d.probs.size()) == cfg.max_positions);
    for (double p : d.probs)
        CHECK(p == doctest::Approx(1.0 / cfg.max_positions).epsilon(1e-9));

    Model<double> plain(
        [] { ModelConfig c = laf_config(); c.length_predictor = false; return c; }(), 3);
    Var<double> hp = plain.encode({4, 5, kEosId}).h;
    CHECK_THROWS_AS(plain.length_logits(hp), Error);
}

TEST_CASE("pseudo full-sentence keeps the prefix and fills with raw PE rows") {
    ModelConfig cfg = laf_config();
    Model<double> model(cfg, 5);
    Var<double> h = model.encode({4, 5, 6, kEosId}).h;
    Var<double> prefix = slice_rows(h, 0, 2);

    auto pseudo = build_pseudo_full_sentence(prefix, 5, model.pe());
    CHECK(pseudo.states.rows() == 5);
    CHECK(pseudo.real_prefix_len == 2);
    // first g rows are the encoder states, bit for bit
    for (Index r = 0; r < 2; ++r)
        for (Index c = 0; c < cfg.d_model; ++c)
            CHECK(pseudo.states.value()(r, c) == prefix.value()(r, c));
    // fill rows are the raw PE table rows for 1-based positions 3..5
    for (Index r = 2; r < 5; ++r)
        for (Index c = 0; c < cfg.d_model; ++c)
            CHECK(pseudo.states.value()(r, c) == model.pe().table(r, c));

    // degenerate case L = g: the prefix itself, bit for bit
    auto same = build_pseudo_full_sentence(prefix, 2, model.pe());
    CHECK(same.states.value() == prefix.value());

    CHECK_THROWS_AS(build_pseudo_full_sentence(prefix, 1, model.pe()), Error);
    CHECK_THROWS_AS(build_pseudo_full_sentence(prefix, 99, model.pe()), Error);
}

TEST_CASE("PE fill rows carry no gradient; the prefix does") {
    ModelConfig cfg = laf_config();
    Model<double> model(cfg, 5);
    model.params().zero_grads();
    Var<double> h = model.encode({4, 5, kEosId}).h;
    auto pseudo = build_pseudo_full_sentence(h, 6, model.pe());
    backpropagate(sum_all(pseudo.states));
    // every encoder state row received gradient 1 for every column
    CHECK(h.grad().minCoeff() == 1.0);
    CHECK(h.grad().maxCoeff() == 1.0);
}

TEST_CASE("with the whole source read, LAF losses degenerate to the plain model bit-exactly") {
    ModelConfig cfg = laf_config();
    TokenizedPair pair{{4, 5, 6, kEosId}, {5, 6}};
    int big_k = 10; // k >= J: every step sees the full source

    Model<double> m1(cfg, 11);
    auto laf = sentence_losses(m1, pair, TrainMode::WaitKLAF, big_k, false);
    Model<double> m2(cfg, 11);
    auto plain = sentence_losses(m2, pair, TrainMode::WaitK, big_k, false);
    Model<double> m3(cfg, 11);
    auto full = sentence_losses(m3, pair, TrainMode::FullSentence, big_k, false);

    CHECK(laf.ce_value() == plain.ce_value());
    CHECK(plain.ce_value() == full.ce_value());
    CHECK(laf.target_tokens == 3);
}

TEST_CASE("length loss closed form: a uniform predictor scores I * ln(N_max)") {
    ModelConfig cfg = laf_config();
    Model<double> model(cfg, 7);
    zero_param(model, "len_w");
    TokenizedPair pair{{4, 5, 6, kEosId}, {5, 6, 7}};
    auto losses = sentence_losses(model, pair, TrainMode::WaitKLAF, 2, false);
    int I = 4;
    CHECK(losses.len_value() ==
          doctest::Approx(I * std::log(static_cast<double>(cfg.max_positions))).epsilon(1e-9));
    CHECK(losses.total_value() ==
          doctest::Approx(losses.ce_value() + losses.len_value()).epsilon(1e-12));
}

TEST_CASE("token loss at a fresh init is near I * ln(V)") {
    ModelConfig cfg = laf_config();
    cfg.src_vocab_size = 64;
    cfg.tgt_vocab_size = 64;
    TokenizedPair pair{{4, 5, 6, 7, kEosId}, {5, 6, 7, 4}};
    double expect = 5 * std::log(static_cast<double>(cfg.tgt_vocab_size));
    double avg = 0.0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Model<double> model(cfg, seed);
        avg += sentence_losses(model, pair, TrainMode::WaitK, 3, false).ce_value();
    }
    avg /= 8;
    CHECK(avg == doctest::Approx(expect).epsilon(0.10));
}

TEST_CASE("prefix-to-prefix LAF training loss passes a full gradient check") {
    ModelConfig cfg = laf_config();
    Model<double> model(cfg, 23);
    TokenizedPair pair{{4, 5, kEosId}, {5, 6}};
    auto report = grad_check<double>(model.params(), [&] {
        return sentence_losses(model, pair, TrainMode::WaitKLAF, 1, false).total;
    }, 1e-3);
    CHECK_MESSAGE(report.passed, "max rel err ", report.max_rel_error);
}

TEST_CASE("predicted-length mode trains: finite loss, gradient reaches the length head") {
    ModelConfig cfg = laf_config();
    Model<double> model(cfg, 29);
    TokenizedPair pair{{4, 5, 6, kEosId}, {5, 6, 7}};
    model.params().zero_grads();
    auto losses = sentence_losses(model, pair, TrainMode::PredLAF, 2, false);
    CHECK(std::isfinite(losses.total_value()));
    CHECK(losses.len_value() > 0.0);
    backpropagate(losses.total);
    for (auto& [name, p] : model.params().entries())
        if (name == "len_w")
            CHECK(p.grad().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("mode names round-trip; unknown names are rejected") {
    for (TrainMode m : {TrainMode::FullSentence, TrainMode::WaitK,
                        TrainMode::WaitKLAF, TrainMode::PredLAF})
        CHECK(train_mode_from_string(train_mode_name(m)) == m);
    CHECK_THROWS_AS(train_mode_from_string("adaptive"), Error);
    CHECK(mode_uses_laf(TrainMode::WaitKLAF));
    CHECK(mode_uses_laf(TrainMode::PredLAF));
    CHECK_FALSE(mode_uses_laf(TrainMode::WaitK));
}
