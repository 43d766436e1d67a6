#pragma once

#include "slaf/adam.hpp"
#include "slaf/data.hpp"
#include "slaf/laf.hpp"
#include "slaf/transformer.hpp"

#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace slaf {

// Checkpoint layout (all integers little-endian):
//   "SLAF" magic, u32 version
//   u32 config-text length, UTF-8 key=value config text (model config,
//     training mode, vocabularies)
//   u64 parameter count, parameters as f32 in declaration order
//   u64 optimizer step, Adam m then v as f32 in the same order
//   u64 dropout RNG state, u64 trainer RNG state
//   u64 global step counter, f64 best validation BLEU

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    SLAF_CHECK(is.good(), "checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    SLAF_CHECK(is.good(), "checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline float read_f32(std::istream& is) {
    std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline double read_f64(std::istream& is) {
    std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace detail

struct CheckpointMeta {
    ModelConfig model;
    TrainMode mode = TrainMode::FullSentence;
    int k = 1;
    Vocabulary src_vocab;
    Vocabulary tgt_vocab;
    std::uint64_t dropout_rng_state = 0;
    std::uint64_t trainer_rng_state = 0;
    long step = 0;
    double best_bleu = 0.0;
};

inline std::string serialize_config_text(const CheckpointMeta& meta) {
    std::ostringstream os;
    const ModelConfig& m = meta.model;
    os << "d_model = " << m.d_model << "\n"
       << "n_heads = " << m.n_heads << "\n"
       << "n_enc_layers = " << m.n_enc_layers << "\n"
       << "n_dec_layers = " << m.n_dec_layers << "\n"
       << "d_ffn = " << m.d_ffn << "\n"
       << "max_positions = " << m.max_positions << "\n"
       << "src_vocab_size = " << m.src_vocab_size << "\n"
       << "tgt_vocab_size = " << m.tgt_vocab_size << "\n"
       << "dropout = " << m.dropout << "\n"
       << "unidirectional_encoder = " << (m.unidirectional_encoder ? 1 : 0) << "\n"
       << "length_predictor = " << (m.length_predictor ? 1 : 0) << "\n"
       << "mode = " << train_mode_name(meta.mode) << "\n"
       << "k = " << meta.k << "\n";
    os << "src_min_freq = " << meta.src_vocab.min_freq << "\n";
    os << "tgt_min_freq = " << meta.tgt_vocab.min_freq << "\n";
    os << "src_tokens =";
    for (const auto& t : meta.src_vocab.tokens()) os << " " << t;
    os << "\ntgt_tokens =";
    for (const auto& t : meta.tgt_vocab.tokens()) os << " " << t;
    os << "\n";
    return os.str();
}

inline CheckpointMeta parse_config_text(const std::string& text) {
    CheckpointMeta meta;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            size_t a = s.find_first_not_of(" \t");
            size_t b = s.find_last_not_of(" \t");
            s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(val);
        ModelConfig& m = meta.model;
        if (key == "d_model") m.d_model = std::stoi(val);
        else if (key == "n_heads") m.n_heads = std::stoi(val);
        else if (key == "n_enc_layers") m.n_enc_layers = std::stoi(val);
        else if (key == "n_dec_layers") m.n_dec_layers = std::stoi(val);
        else if (key == "d_ffn") m.d_ffn = std::stoi(val);
        else if (key == "max_positions") m.max_positions = std::stoi(val);
        else if (key == "src_vocab_size") m.src_vocab_size = std::stoi(val);
        else if (key == "tgt_vocab_size") m.tgt_vocab_size = std::stoi(val);
        else if (key == "dropout") m.dropout = std::stod(val);
        else if (key == "unidirectional_encoder") m.unidirectional_encoder = val == "1";
        else if (key == "length_predictor") m.length_predictor = val == "1";
        else if (key == "mode") meta.mode = train_mode_from_string(val);
        else if (key == "k") meta.k = std::stoi(val);
        else if (key == "src_min_freq") meta.src_vocab.min_freq = std::stoi(val);
        else if (key == "tgt_min_freq") meta.tgt_vocab.min_freq = std::stoi(val);
        else if (key == "src_tokens" || key == "tgt_tokens") {
            Vocabulary& v = key[0] == 's' ? meta.src_vocab : meta.tgt_vocab;
            std::istringstream toks(val);
            std::string t;
            size_t i = 0;
            while (toks >> t) {
                if (i >= 4) v.add_token(t); // reserved ids are pre-registered
                ++i;
            }
        }
    }
    return meta;
}

template <typename S>
void save_checkpoint(const std::string& path, Model<S>& model, Adam<S>& opt,
                     const CheckpointMeta& meta_in) {
    CheckpointMeta meta = meta_in;
    meta.dropout_rng_state = model.dropout_rng().state();
    std::ofstream os(path, std::ios::binary);
    SLAF_CHECK(os.good(), "checkpoint: cannot write ", path);
    os.write("SLAF", 4);
    detail::write_u32(os, 1);
    std::string cfg = serialize_config_text(meta);
    detail::write_u32(os, static_cast<std::uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    detail::write_u64(os, model.params().total_size());
    for (const auto& [name, p] : model.params().entries())
        for (Index r = 0; r < p.rows(); ++r)
            for (Index c = 0; c < p.cols(); ++c)
                detail::write_f32(os, static_cast<float>(p.value()(r, c)));
    detail::write_u64(os, static_cast<std::uint64_t>(opt.steps_taken()));
    for (const auto& moments : {std::cref(opt.m()), std::cref(opt.v())})
        for (const Mat<S>& m : moments.get())
            for (Index r = 0; r < m.rows(); ++r)
                for (Index c = 0; c < m.cols(); ++c)
                    detail::write_f32(os, static_cast<float>(m(r, c)));
    detail::write_u64(os, meta.dropout_rng_state);
    detail::write_u64(os, meta.trainer_rng_state);
    detail::write_u64(os, static_cast<std::uint64_t>(meta.step));
    detail::write_f64(os, meta.best_bleu);
    SLAF_CHECK(os.good(), "checkpoint: write failure on ", path);
}

template <typename S>
struct LoadedCheckpoint {
    CheckpointMeta meta;
    std::unique_ptr<Model<S>> model;
    std::unique_ptr<Adam<S>> optimizer;
};

template <typename S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    SLAF_CHECK(is.good(), "checkpoint: cannot open ", path);
    char magic[4];
    is.read(magic, 4);
    SLAF_CHECK(is.good() && std::string(magic, 4) == "SLAF",
               "checkpoint: bad magic in ", path);
    std::uint32_t version = detail::read_u32(is);
    SLAF_CHECK(version == 1, "checkpoint: unsupported version ", version);
    std::uint32_t cfg_len = detail::read_u32(is);
    std::string cfg(cfg_len, '\0');
    is.read(cfg.data(), cfg_len);
    SLAF_CHECK(is.good(), "checkpoint: truncated config text");

    LoadedCheckpoint<S> out;
    out.meta = parse_config_text(cfg);
    out.model = std::make_unique<Model<S>>(out.meta.model, 0);
    std::uint64_t n_params = detail::read_u64(is);
    SLAF_CHECK(n_params == out.model->params().total_size(),
               "checkpoint: parameter count ", n_params, " does not match config (",
               out.model->params().total_size(), ")");
    for (auto& [name, p] : out.model->params().entries())
        for (Index r = 0; r < p.rows(); ++r)
            for (Index c = 0; c < p.cols(); ++c)
                p.mutable_value()(r, c) = static_cast<S>(detail::read_f32(is));
    out.optimizer = std::make_unique<Adam<S>>(out.model->params());
    out.optimizer->set_steps_taken(static_cast<long>(detail::read_u64(is)));
    for (auto* moments : {&out.optimizer->m(), &out.optimizer->v()})
        for (Mat<S>& m : *moments)
            for (Index r = 0; r < m.rows(); ++r)
                for (Index c = 0; c < m.cols(); ++c)
                    m(r, c) = static_cast<S>(detail::read_f32(is));
    out.meta.dropout_rng_state = detail::read_u64(is);
    out.meta.trainer_rng_state = detail::read_u64(is);
    out.meta.step = static_cast<long>(detail::read_u64(is));
    out.meta.best_bleu = detail::read_f64(is);
    out.model->dropout_rng().set_state(out.meta.dropout_rng_state);
    return out;
}

} // namespace slaf
