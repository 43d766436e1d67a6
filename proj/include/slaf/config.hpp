#pragma once

#include "slaf/common.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace slaf {

// Flat `key = value` run configuration: defaults, then config file, then
// SLAF_-prefixed environment variables, then command-line flags (last wins).
class RunConfig {
public:
    RunConfig() {
        values_ = {
            {"mode", "wait-k"},
            {"k", "3"},
            {"seed", "1"},
            {"d_model", "64"},
            {"n_heads", "4"},
            {"enc_layers", "2"},
            {"dec_layers", "2"},
            {"d_ffn", "128"},
            {"max_positions", "64"},
            {"dropout", "0.1"},
            {"peak_lr", "0.002"},
            {"warmup", "400"},
            {"max_steps", "2000"},
            {"eval_every", "200"},
            {"token_budget", "800"},
            {"label_smoothing", "0.1"},
            {"min_freq", "1"},
            {"stop_bleu", "-1"},
            {"train_src", ""},
            {"train_tgt", ""},
            {"val_src", ""},
            {"val_tgt", ""},
        };
    }

    void set(const std::string& key, const std::string& value) {
        auto it = values_.find(key);
        if (it == values_.end())
            fail("config: unknown key '", key, "'; valid keys: ", valid_keys());
        it->second = value;
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        SLAF_CHECK(in.good(), "config: cannot open ", path);
        std::string line;
        long line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            auto eq = trimmed.find('=');
            SLAF_CHECK(eq != std::string::npos,
                       "config: line ", line_no, " of ", path, " is not 'key = value'");
            set(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
        }
    }

    // SLAF_SEED overrides seed, SLAF_MAX_STEPS overrides max_steps, etc.
    void apply_env() {
        for (auto& [key, value] : values_) {
            std::string env_name = "SLAF_";
            for (char c : key) env_name += c == '-' ? '_' : static_cast<char>(std::toupper(c));
            if (const char* v = std::getenv(env_name.c_str())) value = v;
        }
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        SLAF_CHECK(it != values_.end(), "config: unknown key '", key, "'");
        return it->second;
    }

    long get_long(const std::string& key) const {
        try {
            size_t pos = 0;
            long v = std::stol(get(key), &pos);
            SLAF_CHECK(pos == get(key).size(), "");
            return v;
        } catch (...) {
            fail("config: key '", key, "' needs an integer, got '", get(key), "'");
        }
    }

    int get_int(const std::string& key) const { return static_cast<int>(get_long(key)); }

    double get_double(const std::string& key) const {
        try {
            size_t pos = 0;
            double v = std::stod(get(key), &pos);
            SLAF_CHECK(pos == get(key).size(), "");
            return v;
        } catch (...) {
            fail("config: key '", key, "' needs a number, got '", get(key), "'");
        }
    }

    std::uint64_t get_u64(const std::string& key) const {
        try {
            size_t pos = 0;
            unsigned long long v = std::stoull(get(key), &pos);
            SLAF_CHECK(pos == get(key).size(), "");
            return static_cast<std::uint64_t>(v);
        } catch (...) {
            fail("config: key '", key, "' needs a non-negative integer, got '", get(key), "'");
        }
    }

    std::string valid_keys() const {
        std::ostringstream os;
        bool first = true;
        for (const auto& [key, value] : values_) {
            if (!first) os << ", ";
            os << key;
            first = false;
        }
        return os.str();
    }

private:
    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> values_;
};

} // namespace slaf
