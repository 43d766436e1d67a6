// slaf: simultaneous machine translation with wait-k reading and
// length-aware positional-encoding infill.
//
// Subcommands: train, translate, analyze, repro.
// Exit codes: 0 success, 2 usage/config error, 3 runtime failure.

#include <CLI11.hpp>

#include "slaf/config.hpp"
#include "slaf/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace slaf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

// ---- train ----

struct TrainIo {
    std::vector<TokenizedPair> train_pairs, val_pairs;
    Vocabulary src_vocab, tgt_vocab;
};

TrainIo load_training_data(const RunConfig& cfg, int max_positions) {
    SLAF_CHECK(!cfg.get("train_src").empty() && !cfg.get("train_tgt").empty(),
               "train: train_src and train_tgt must be set");
    RawCorpus raw = load_parallel_corpus(cfg.get("train_src"), cfg.get("train_tgt"));
    TrainIo io;
    io.src_vocab = build_vocab(raw.src, cfg.get_int("min_freq"));
    io.tgt_vocab = build_vocab(raw.tgt, cfg.get_int("min_freq"));
    EncodedCorpus enc = encode_corpus(raw, io.src_vocab, io.tgt_vocab, max_positions);
    if (enc.overlong_dropped)
        std::cerr << "train: dropped " << enc.overlong_dropped << " overlong sentences\n";
    io.train_pairs = std::move(enc.pairs);
    SLAF_CHECK(!io.train_pairs.empty(), "train: no usable training sentences");
    if (!cfg.get("val_src").empty()) {
        RawCorpus vraw = load_parallel_corpus(cfg.get("val_src"), cfg.get("val_tgt"));
        io.val_pairs = encode_corpus(vraw, io.src_vocab, io.tgt_vocab, max_positions).pairs;
    }
    return io;
}

TrainConfig make_train_config(const RunConfig& cfg, const TrainIo& io) {
    TrainConfig tc;
    tc.mode = train_mode_from_string(cfg.get("mode"));
    tc.model.d_model = cfg.get_int("d_model");
    tc.model.n_heads = cfg.get_int("n_heads");
    tc.model.n_enc_layers = cfg.get_int("enc_layers");
    tc.model.n_dec_layers = cfg.get_int("dec_layers");
    tc.model.d_ffn = cfg.get_int("d_ffn");
    tc.model.max_positions = cfg.get_int("max_positions");
    tc.model.dropout = cfg.get_double("dropout");
    tc.model.src_vocab_size = io.src_vocab.size();
    tc.model.tgt_vocab_size = io.tgt_vocab.size();
    tc.model.unidirectional_encoder = tc.mode != TrainMode::FullSentence;
    tc.model.length_predictor = mode_uses_laf(tc.mode);
    tc.k = cfg.get_int("k");
    tc.peak_lr = cfg.get_double("peak_lr");
    tc.warmup_steps = cfg.get_long("warmup");
    tc.max_steps = cfg.get_long("max_steps");
    tc.eval_every = cfg.get_long("eval_every");
    tc.token_budget = cfg.get_long("token_budget");
    tc.label_smoothing = cfg.get_double("label_smoothing");
    tc.seed = cfg.get_u64("seed");
    tc.stop_bleu = cfg.get_double("stop_bleu");
    tc.model.validate();
    tc.validate();
    return tc;
}

int run_train(const RunConfig& cfg, const std::string& ckpt_path,
              const std::string& log_path, bool verbose) {
    TrainIo io;
    TrainConfig tc;
    try {
        io = load_training_data(cfg, cfg.get_int("max_positions"));
        tc = make_train_config(cfg, io);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        tc.verbose = verbose;
        Model<float> model(tc.model, tc.seed);
        Adam<float> opt(model.params(), tc.adam_beta1, tc.adam_beta2, tc.adam_eps);
        CheckpointMeta meta;
        meta.model = tc.model;
        meta.mode = tc.mode;
        meta.k = tc.k;
        meta.src_vocab = io.src_vocab;
        meta.tgt_vocab = io.tgt_vocab;
        TrainResult res = train(tc, io.train_pairs, io.val_pairs, model, opt, meta, ckpt_path);
        if (!log_path.empty()) write_train_log(log_path, res.log);
        if (res.length_clamp_warnings)
            std::cerr << "train: " << res.length_clamp_warnings
                      << " length targets clamped to max_positions\n";
        if (res.diverged) {
            std::cerr << "error: training diverged at step " << res.steps_run + 1
                      << "; last good checkpoint kept at " << ckpt_path << "\n";
            return kExitRuntime;
        }
        std::cerr << "trained " << res.steps_run << " steps";
        if (!io.val_pairs.empty()) std::cerr << ", best val BLEU " << res.best_bleu;
        std::cerr << ", checkpoint " << ckpt_path << "\n";
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// ---- translate ----

struct TranslateArgs {
    std::string ckpt, input, output;
    std::string policy = "wait-k";
    int k = 0; // 0: use the checkpoint's k
    std::string laf = "auto";
    std::string beta_file, trace_path, al_csv, ref_path;
};

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    SLAF_CHECK(in.good(), "cannot open ", path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

int run_translate(const TranslateArgs& args) {
    std::unique_ptr<Model<float>> model;
    CheckpointMeta meta;
    StreamPolicy policy;
    bool use_laf = false;
    std::vector<std::vector<int>> sources, refs;
    try {
        auto loaded = load_checkpoint<float>(args.ckpt);
        model = std::move(loaded.model);
        meta = std::move(loaded.meta);

        if (args.policy == "wait-k") {
            policy.kind = PolicyKind::WaitK;
            policy.k = args.k > 0 ? args.k : meta.k;
            SLAF_CHECK(policy.k >= 1, "translate: wait-k needs k >= 1");
        } else if (args.policy == "full") {
            policy.kind = PolicyKind::FullSentence;
        } else if (args.policy == "from-beta") {
            SLAF_CHECK(!args.beta_file.empty(), "translate: --policy from-beta needs --beta-file");
            policy.kind = PolicyKind::FromBeta;
            policy.schedule = schedule_from_writing_probs(load_writing_probs(args.beta_file));
            if (policy.schedule->repaired)
                std::cerr << "translate: beta schedule was non-monotone and was repaired\n";
        } else {
            fail("translate: unknown policy '", args.policy, "' (wait-k, full, from-beta)");
        }

        if (args.laf == "auto") use_laf = meta.model.length_predictor;
        else if (args.laf == "on") use_laf = true;
        else if (args.laf == "off") use_laf = false;
        else fail("translate: --laf must be on, off or auto");
        SLAF_CHECK(!use_laf || meta.model.length_predictor,
                   "translate: --laf on, but the checkpoint has no length predictor");

        for (const std::string& line : read_lines(args.input)) {
            std::vector<int> ids;
            for (const std::string& tok : split_ws(line)) ids.push_back(meta.src_vocab.id(tok));
            ids.push_back(kEosId);
            sources.push_back(std::move(ids));
        }
        SLAF_CHECK(!sources.empty(), "translate: empty input ", args.input);

        if (!args.ref_path.empty()) {
            std::vector<std::string> ref_lines = read_lines(args.ref_path);
            SLAF_CHECK(ref_lines.size() == sources.size(), "translate: ", sources.size(),
                       " input lines but ", ref_lines.size(), " reference lines");
            for (const std::string& line : ref_lines) {
                std::vector<int> ids;
                for (const std::string& tok : split_ws(line)) ids.push_back(meta.tgt_vocab.id(tok));
                refs.push_back(std::move(ids));
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        std::ofstream out(args.output);
        SLAF_CHECK(out.good(), "translate: cannot write ", args.output);
        std::ofstream trace_os, al_os;
        if (!args.trace_path.empty()) {
            trace_os.open(args.trace_path);
            SLAF_CHECK(trace_os.good(), "translate: cannot write ", args.trace_path);
            write_trace_header(trace_os);
        }
        if (!args.al_csv.empty()) {
            al_os.open(args.al_csv);
            SLAF_CHECK(al_os.good(), "translate: cannot write ", args.al_csv);
            al_os << "sent,src_len,tgt_len,al,tau\n";
        }

        for (size_t n = 0; n < sources.size(); ++n) {
            StreamSession sess = simulate(*model, policy, sources[n], use_laf);
            std::vector<std::string> words = decode_ids(sess.hypothesis, meta.tgt_vocab);
            for (size_t w = 0; w < words.size(); ++w) out << (w ? " " : "") << words[w];
            out << "\n";
            int tgt_len = std::max<int>(1, static_cast<int>(sess.steps.size()));
            if (al_os.is_open()) {
                LatencyReport lat = average_lagging(sess.g_trace(), sess.src_len, tgt_len);
                al_os << n << "," << sess.src_len << "," << tgt_len << ","
                      << lat.al << "," << lat.tau << "\n";
            }
            if (trace_os.is_open()) {
                SentenceTrace t;
                t.sent = static_cast<int>(n);
                t.src_len = sess.src_len;
                t.hyp = sess.hypothesis;
                if (!refs.empty()) t.ref = refs[n];
                t.steps = sess.steps;
                write_sentence_trace(trace_os, t);
            }
        }
        std::cerr << "translated " << sources.size() << " sentences to " << args.output << "\n";
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// ---- analyze ----

struct AnalyzeArgs {
    std::vector<std::string> traces;
    std::string out_dir = ".";
    std::string reports = "all";
    int min_bucket = 5;
};

std::string path_stem(const std::string& path) { return fs::path(path).stem().string(); }

void write_avg_attention_csv(const std::string& path, const std::vector<AttentionReport>& reports) {
    std::ofstream os(path);
    SLAF_CHECK(os.good(), "analyze: cannot write ", path);
    os << "bucket,position,avg_attn,count\n";
    for (const auto& r : reports)
        for (size_t j = 0; j < r.avg_attention.size(); ++j)
            os << r.bucket << "," << j + 1 << "," << r.avg_attention[j] << "," << r.counts[j] << "\n";
}

int run_analyze(const AnalyzeArgs& args) {
    std::vector<std::vector<SentenceTrace>> systems;
    std::vector<std::string> names;
    std::set<std::string> reports;
    try {
        SLAF_CHECK(!args.traces.empty(), "analyze: at least one --trace file required");
        for (const std::string& path : args.traces) {
            systems.push_back(read_traces(path));
            SLAF_CHECK(!systems.back().empty(), "analyze: no sentences in ", path);
            names.push_back(path_stem(path));
        }
        const std::set<std::string> known = {"attention", "quality", "duplication",
                                             "fill", "length", "quintiles", "latency"};
        std::stringstream ss(args.reports);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item == "all") { reports = known; continue; }
            SLAF_CHECK(known.count(item), "analyze: unknown report '", item,
                       "' (attention, quality, duplication, fill, length, quintiles, latency, all)");
            reports.insert(item);
        }
        SLAF_CHECK(!reports.empty(), "analyze: empty --reports selection");
        fs::create_directories(args.out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        fs::path out(args.out_dir);

        if (reports.count("attention")) {
            for (size_t s = 0; s < systems.size(); ++s) {
                auto rep = average_attention(systems[s], args.min_bucket);
                if (s == 0) write_avg_attention_csv((out / "avg_attention.csv").string(), rep);
                if (systems.size() > 1)
                    write_avg_attention_csv(
                        (out / ("avg_attention_" + names[s] + ".csv")).string(), rep);
            }
        }

        if (reports.count("quintiles")) {
            std::ofstream os(out / "bias_quintiles.csv");
            SLAF_CHECK(os.good(), "analyze: cannot write bias_quintiles.csv");
            os << "system,part,mean_bias_ratio,bleu\n";
            const char* part_names[5] = {"Bottom", "2nd", "3rd", "4th", "Top"};
            for (size_t s = 0; s < systems.size(); ++s) {
                bool have_refs = true;
                std::vector<std::vector<int>> refs;
                for (const auto& t : systems[s]) {
                    if (t.ref.empty()) { have_refs = false; break; }
                    refs.push_back(t.ref);
                }
                if (!have_refs || systems[s].size() < 5) {
                    std::cerr << "analyze: skipping quintiles for " << names[s]
                              << " (needs >= 5 sentences with references)\n";
                    continue;
                }
                BiasQuintiles q = bias_bucketed_quality(systems[s], refs);
                for (int part = 0; part < 5; ++part)
                    os << names[s] << "," << part_names[part] << ","
                       << q.mean_ratio[part] << "," << q.bleu[part] << "\n";
            }
        }

        if (reports.count("fill")) {
            std::ofstream os(out / "fill_curve.csv");
            SLAF_CHECK(os.good(), "analyze: cannot write fill_curve.csv");
            os << "system,step,mean_fill_attention,count\n";
            for (size_t s = 0; s < systems.size(); ++s) {
                FillCurve c = fill_attention_curve(systems[s]);
                for (size_t i = 0; i < c.mean_fill_attention.size(); ++i)
                    os << names[s] << "," << i + 1 << "," << c.mean_fill_attention[i]
                       << "," << c.counts[i] << "\n";
            }
        }

        if (reports.count("length")) {
            std::ofstream os(out / "len_accuracy.csv");
            SLAF_CHECK(os.good(), "analyze: cannot write len_accuracy.csv");
            os << "system,received,accuracy,count\n";
            for (size_t s = 0; s < systems.size(); ++s) {
                LengthAccuracyCurve c = length_accuracy_curve(systems[s]);
                for (size_t i = 0; i < c.accuracy.size(); ++i)
                    os << names[s] << "," << i + 1 << "," << c.accuracy[i]
                       << "," << c.counts[i] << "\n";
            }
        }

        {
            std::ofstream os(out / "metrics.csv");
            SLAF_CHECK(os.good(), "analyze: cannot write metrics.csv");
            os << "system,n_sentences,bleu,al_mean,dup_1,dup_2,dup_3,dup_4,"
                  "bias_ratio,length_accuracy\n";
            for (size_t s = 0; s < systems.size(); ++s) {
                const auto& traces = systems[s];
                os << names[s] << "," << traces.size() << ",";
                bool have_refs = true;
                std::vector<std::vector<int>> hyps, refs;
                for (const auto& t : traces) {
                    hyps.push_back(t.hyp);
                    if (t.ref.empty()) have_refs = false;
                    else refs.push_back(t.ref);
                }
                if (reports.count("quality") && have_refs) os << corpus_bleu(hyps, refs);
                os << ",";
                if (reports.count("latency")) {
                    double al_sum = 0.0;
                    for (const auto& t : traces) {
                        std::vector<int> g;
                        for (const auto& st : t.steps) g.push_back(st.g);
                        al_sum += average_lagging(g, t.src_len,
                                                  std::max<int>(1, static_cast<int>(t.steps.size()))).al;
                    }
                    os << al_sum / traces.size();
                }
                os << ",";
                for (int n = 1; n <= 4; ++n) {
                    if (reports.count("duplication")) os << corpus_duplicate_proportion(hyps, n);
                    os << ",";
                }
                if (reports.count("attention")) {
                    auto rep = average_attention(traces, args.min_bucket);
                    double ratio_sum = 0.0;
                    long weight = 0;
                    for (const auto& r : rep) {
                        ratio_sum += r.bias_ratio() * r.n_sentences;
                        weight += r.n_sentences;
                    }
                    if (weight > 0) os << ratio_sum / weight;
                }
                os << ",";
                if (reports.count("length")) os << length_accuracy_curve(traces).overall;
                os << "\n";
            }
        }

        std::cerr << "analysis written to " << args.out_dir << "\n";
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// ---- repro ----

struct ReproArgs {
    std::string task = "reverse";
    std::string out_dir = "repro";
    std::string mode = "wait-k-laf";
    int k = 3;
    std::uint64_t seed = 1;
    int vocab = 12, min_len = 3, max_len = 8;
    int train_n = 300, val_n = 32, test_n = 64;
    long steps = 150;
    int d_model = 32;
};

int run_repro(const ReproArgs& args) {
    try {
        SynthKind kind = synth_kind_from_string(args.task);
        fs::create_directories(args.out_dir);
        fs::path out(args.out_dir);

        RawCorpus all = synth_task(kind, args.vocab, args.min_len, args.max_len,
                                   args.train_n + args.val_n + args.test_n, args.seed);
        auto slice = [&](int lo, int hi) {
            RawCorpus c;
            c.src.assign(all.src.begin() + lo, all.src.begin() + hi);
            c.tgt.assign(all.tgt.begin() + lo, all.tgt.begin() + hi);
            return c;
        };
        write_corpus(slice(0, args.train_n),
                     (out / "train.src").string(), (out / "train.tgt").string());
        write_corpus(slice(args.train_n, args.train_n + args.val_n),
                     (out / "val.src").string(), (out / "val.tgt").string());
        write_corpus(slice(args.train_n + args.val_n, args.train_n + args.val_n + args.test_n),
                     (out / "test.src").string(), (out / "test.tgt").string());

        RunConfig cfg;
        cfg.set("mode", args.mode);
        cfg.set("k", std::to_string(args.k));
        cfg.set("seed", std::to_string(args.seed));
        cfg.set("d_model", std::to_string(args.d_model));
        cfg.set("n_heads", "2");
        cfg.set("enc_layers", "1");
        cfg.set("dec_layers", "1");
        cfg.set("d_ffn", std::to_string(2 * args.d_model));
        cfg.set("max_positions", "32");
        cfg.set("max_steps", std::to_string(args.steps));
        cfg.set("eval_every", std::to_string(std::max<long>(1, args.steps / 3)));
        cfg.set("warmup", std::to_string(std::max<long>(1, args.steps / 4)));
        cfg.set("train_src", (out / "train.src").string());
        cfg.set("train_tgt", (out / "train.tgt").string());
        cfg.set("val_src", (out / "val.src").string());
        cfg.set("val_tgt", (out / "val.tgt").string());

        int rc = run_train(cfg, (out / "model.ckpt").string(),
                           (out / "train_log.csv").string(), false);
        if (rc != kExitOk) return rc;

        TranslateArgs t;
        t.ckpt = (out / "model.ckpt").string();
        t.input = (out / "test.src").string();
        t.output = (out / "hyps.txt").string();
        t.policy = args.mode == "full" ? "full" : "wait-k";
        t.k = args.k;
        t.trace_path = (out / "trace.jsonl").string();
        t.al_csv = (out / "al.csv").string();
        t.ref_path = (out / "test.tgt").string();
        rc = run_translate(t);
        if (rc != kExitOk) return rc;

        AnalyzeArgs a;
        a.traces = {(out / "trace.jsonl").string()};
        a.out_dir = args.out_dir;
        a.min_bucket = 1;
        return run_analyze(a);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"simultaneous translation with wait-k reading and length-aware PE infill"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    std::string config_path, ckpt_path = "model.ckpt", log_path;
    std::vector<std::string> overrides;
    bool verbose = false;
    train_cmd->add_option("--config", config_path, "key = value config file");
    train_cmd->add_option("--ckpt", ckpt_path, "checkpoint output path")
        ->capture_default_str();
    train_cmd->add_option("--log", log_path, "training-log CSV output path");
    train_cmd->add_option("--set", overrides,
                          "config override as key=value (repeatable, wins over file and env)");
    train_cmd->add_flag("--verbose", verbose, "per-eval progress on stderr");
    std::map<std::string, std::string> flag_keys;
    for (const char* key : {"mode", "k", "seed", "max-steps", "train-src", "train-tgt",
                            "val-src", "val-tgt"}) {
        std::string config_key(key);
        for (char& c : config_key) if (c == '-') c = '_';
        if (config_key == "max_steps") {
            train_cmd->add_option("--steps", flag_keys["max_steps"], "training steps");
            continue;
        }
        train_cmd->add_option("--" + std::string(key), flag_keys[config_key],
                              "config key " + config_key);
    }

    // translate
    auto* tr_cmd = app.add_subcommand("translate", "stream-decode a source file");
    TranslateArgs targs;
    tr_cmd->add_option("--ckpt", targs.ckpt, "checkpoint path")->required();
    tr_cmd->add_option("--input", targs.input, "source text, one sentence per line")->required();
    tr_cmd->add_option("--output", targs.output, "hypothesis output path")->required();
    tr_cmd->add_option("--policy", targs.policy, "read policy: wait-k, full, from-beta")
        ->capture_default_str();
    tr_cmd->add_option("--k", targs.k, "wait-k lag (default: the checkpoint's k)");
    tr_cmd->add_option("--laf", targs.laf, "length-aware infill: on, off, auto")
        ->capture_default_str();
    tr_cmd->add_option("--beta-file", targs.beta_file, "writing-probability matrix for from-beta");
    tr_cmd->add_option("--trace", targs.trace_path, "JSON-lines decode trace output");
    tr_cmd->add_option("--al", targs.al_csv, "per-sentence average-lagging CSV output");
    tr_cmd->add_option("--ref", targs.ref_path, "reference file to embed in traces");

    // analyze
    auto* an_cmd = app.add_subcommand("analyze", "compute diagnostics CSVs from traces");
    AnalyzeArgs aargs;
    an_cmd->add_option("--trace", aargs.traces, "trace file (repeat to compare systems)")
        ->required();
    an_cmd->add_option("--out", aargs.out_dir, "output directory")->capture_default_str();
    an_cmd->add_option("--reports", aargs.reports,
                       "comma list: attention,quality,duplication,fill,length,quintiles,latency,all")
        ->capture_default_str();
    an_cmd->add_option("--min-bucket", aargs.min_bucket,
                       "minimum sentences per source-length bucket")
        ->capture_default_str();

    // repro
    auto* re_cmd = app.add_subcommand("repro",
                                      "train, translate and analyze a synthetic task end to end");
    ReproArgs rargs;
    re_cmd->add_option("--task", rargs.task, "copy, reverse or shift")->capture_default_str();
    re_cmd->add_option("--out", rargs.out_dir, "output directory")->capture_default_str();
    re_cmd->add_option("--mode", rargs.mode, "training mode")->capture_default_str();
    re_cmd->add_option("--k", rargs.k, "wait-k lag")->capture_default_str();
    re_cmd->add_option("--seed", rargs.seed, "run seed")->capture_default_str();
    re_cmd->add_option("--steps", rargs.steps, "training steps")->capture_default_str();
    re_cmd->add_option("--train-n", rargs.train_n, "training sentences")->capture_default_str();
    re_cmd->add_option("--val-n", rargs.val_n, "validation sentences")->capture_default_str();
    re_cmd->add_option("--test-n", rargs.test_n, "test sentences")->capture_default_str();
    re_cmd->add_option("--vocab", rargs.vocab, "synthetic vocabulary size")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (train_cmd->parsed()) {
        RunConfig cfg;
        try {
            if (!config_path.empty()) cfg.load_file(config_path);
            cfg.apply_env();
            for (const auto& [key, value] : flag_keys)
                if (!value.empty()) cfg.set(key, value);
            for (const std::string& kv : overrides) {
                auto eq = kv.find('=');
                SLAF_CHECK(eq != std::string::npos, "--set needs key=value, got '", kv, "'");
                cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
            }
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitUsage;
        }
        return run_train(cfg, ckpt_path, log_path, verbose);
    }
    if (tr_cmd->parsed()) return run_translate(targs);
    if (an_cmd->parsed()) return run_analyze(aargs);
    if (re_cmd->parsed()) return run_repro(rargs);
    return kExitUsage;
}
