// numcolbert: quantity-aware late-interaction retrieval, end to end.
//
// Subcommands: gen-data, train, index, search, eval, bench, export-embeddings.
// Every subcommand accepts --config <file> with `key = value` lines using the
// same dotted names as the flags (e.g. `train.lr = 0.001`); unknown keys are
// rejected. Exit codes: 0 success, 1 usage error, 2 data/format error.

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ncb/pipeline.hpp"

namespace {

using namespace ncb;

// CLI11 2.4 never reads a config file attached to a subcommand (only the
// top-level app processes one), so config handling is explicit: --config
// files are expanded into the equivalent dotted flags before parsing.
void add_config_file(CLI::App* cmd) {
    static std::string sink;
    cmd->add_option("--config", sink, "key = value configuration file");
}

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// Expands `--config FILE` into `--key=value` tokens inserted right after the
// subcommand name, so explicitly passed flags (parsed later, take-last) win.
// Unknown keys and malformed lines are usage errors.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
    // locate the subcommand token and any --config values
    size_t sub_at = args.size();
    const CLI::App* sub = nullptr;
    std::vector<std::string> files;
    for (size_t i = 0; i < args.size(); i++) {
        if (!sub && !args[i].empty() && args[i][0] != '-') {
            const auto subs = app.get_subcommands(
                [&](const CLI::App* s) { return s->get_name() == args[i]; });
            if (!subs.empty()) {
                sub = subs[0];
                sub_at = i;
            }
            continue;
        }
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config expects a file path");
            files.push_back(args[i + 1]);
            i++;
        } else if (args[i].rfind("--config=", 0) == 0) {
            files.push_back(args[i].substr(9));
        }
    }
    if (files.empty()) return args;
    if (!sub) throw UsageError("--config requires a subcommand");

    // options passed explicitly on the command line always beat the file
    std::set<std::string> explicit_keys;
    for (size_t i = sub_at + 1; i < args.size(); i++) {
        if (args[i].rfind("--", 0) != 0) continue;
        explicit_keys.insert(args[i].substr(0, args[i].find('=')));
    }

    std::vector<std::string> order;                // first-seen order of keys
    std::map<std::string, std::string> kv;         // last value wins per key
    for (const auto& file : files) {
        std::string text;
        try {
            text = read_file(file);
        } catch (const std::exception&) {
            throw UsageError("cannot read config file: " + file);
        }
        size_t start = 0;
        int lineno = 0;
        while (start <= text.size()) {
            size_t nl = text.find('\n', start);
            if (nl == std::string::npos) nl = text.size();
            std::string line = trim(text.substr(start, nl - start));
            start = nl + 1;
            lineno++;
            if (line.empty() || line[0] == '#') continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw UsageError(file + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                                      (value.front() == '\'' && value.back() == '\'')))
                value = value.substr(1, value.size() - 2);
            if (key.empty() || value.empty())
                throw UsageError(file + ":" + std::to_string(lineno) + ": expected key = value");
            if (!sub->get_option_no_throw("--" + key))
                throw UsageError(file + ": unknown key '" + key + "' for subcommand '" +
                                 sub->get_name() + "'");
            if (kv.find(key) == kv.end()) order.push_back(key);
            kv[key] = value;
        }
    }
    std::vector<std::string> injected;
    for (const auto& key : order)
        if (explicit_keys.find("--" + key) == explicit_keys.end())
            injected.push_back("--" + key + "=" + kv[key]);
    args.insert(args.begin() + (long)sub_at + 1, injected.begin(), injected.end());
    return args;
}

struct CommonOpts {
    uint64_t seed = 0;  // 0: keep each module's default
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--seed", c.seed, "override every seed in this command (0 keeps defaults)");
    cmd->add_option("--threads", c.threads, "worker threads for index building")
        ->check(CLI::PositiveNumber);
}

void add_model_opts(CLI::App* cmd, ModelConfig& mc) {
    cmd->add_option("--embedder.dim", mc.dim, "token embedding width")->check(CLI::PositiveNumber);
    cmd->add_option("--embedder.feat-dim", mc.feat_dim, "hashed feature width")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--embedder.hidden", mc.hidden, "MLP hidden width")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--embedder.seed", mc.seed, "init + feature hashing seed");
}

void add_gate_opts(CLI::App* cmd, GateConfig& gc) {
    cmd->add_option("--gate.tau", gc.tau, "detector routing threshold");
    cmd->add_flag("!--gate.disabled", gc.enabled, "turn the numerical gate off");
}

void add_index_opts(CLI::App* cmd, IndexConfig& ic) {
    cmd->add_option("--index.k-centroids", ic.k_centroids, "centroid count (0 = auto)");
    cmd->add_option("--index.nbits", ic.nbits, "bits per residual code")
        ->check(CLI::IsMember({1, 2, 4, 8}));
    cmd->add_option("--index.nprobe", ic.nprobe, "centroids probed per query row")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--index.kmeans-iters", ic.kmeans_iters, "Lloyd iterations")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--index.seed", ic.seed, "k-means seed");
    cmd->add_flag("--index.store-raw", ic.store_raw, "keep exact rows (lossless debug mode)");
}

int run_cli(int argc, char** argv) {
    CLI::App app{"quantity-aware late-interaction retrieval"};
    app.require_subcommand(1);

    const UnitTable& table = UnitTable::builtin();

    // ---- gen-data ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark");
    CorpusSpec spec;
    std::string gen_out;
    CommonOpts gen_common;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--datagen.concepts", spec.n_concepts, "number of concepts")
        ->check(CLI::PositiveNumber);
    gen->add_option("--datagen.synonyms", spec.synonyms_per_concept, "surfaces per concept")
        ->check(CLI::PositiveNumber);
    gen->add_option("--datagen.values", spec.values_per_pair, "values per concept-unit pair")
        ->check(CLI::PositiveNumber);
    gen->add_option("--datagen.templates", spec.n_templates, "sentence templates (1-8)")
        ->check(CLI::Range(1, 8));
    gen->add_option("--datagen.held-out", spec.held_out_fraction,
                    "fraction of thresholds reserved for evaluation");
    gen->add_option("--datagen.triplet-cap", spec.triplet_cap, "max triplets per query")
        ->check(CLI::PositiveNumber);
    gen->add_option("--datagen.seed", spec.seed, "generator seed");
    add_common(gen, gen_common);
    add_config_file(gen);
    gen->callback([&] {
        if (gen_common.seed) spec.seed = gen_common.seed;
        const GenSummary s = gen_data_to_dir(spec, gen_out, table);
        std::printf("wrote %lld sentences, %lld train / %lld eval queries, %lld triplets to %s\n",
                    (long long)s.sentences, (long long)s.train_queries,
                    (long long)s.eval_queries, (long long)s.triplets, gen_out.c_str());
    });

    // ---- train -------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train the gated query encoder");
    std::string tr_data, tr_ckpt, tr_log;
    std::string tr_preset = "desk", tr_strategy = "unit_only";
    ModelConfig tr_model;
    TrainConfig tr_cfg;
    LossConfig tr_loss;
    CommonOpts tr_common;
    bool tr_quiet = false;
    tr->add_option("--data", tr_data, "dataset directory from gen-data")->required();
    tr->add_option("--out", tr_ckpt, "checkpoint output path")->required();
    tr->add_option("--log", tr_log, "per-step CSV log path");
    tr->add_option("--train.preset", tr_preset, "desk or paper defaults")
        ->check(CLI::IsMember({"desk", "paper"}));
    auto* lr_opt = tr->add_option("--train.lr", tr_cfg.lr, "peak learning rate");
    auto* ep_opt = tr->add_option("--train.epochs", tr_cfg.epochs, "training epochs")
                       ->check(CLI::PositiveNumber);
    auto* bs_opt = tr->add_option("--train.batch-size", tr_cfg.batch_size, "triples per batch")
                       ->check(CLI::PositiveNumber);
    tr->add_option("--train.warmup-fraction", tr_cfg.warmup_fraction, "linear warmup fraction");
    tr->add_option("--train.clip-norm", tr_cfg.clip_norm, "global gradient norm cap");
    tr->add_option("--train.weight-decay", tr_cfg.weight_decay, "decoupled weight decay");
    tr->add_option("--train.seed", tr_cfg.seed, "shuffle seed");
    tr->add_option("--loss.tau-ret", tr_loss.tau_ret, "retrieval softmax temperature");
    tr->add_option("--loss.tau-cont", tr_loss.tau_cont, "contrastive softmax temperature");
    tr->add_option("--loss.lambda-cont", tr_loss.lambda_cont, "contrastive weight");
    tr->add_option("--loss.lambda-det", tr_loss.lambda_det, "detector weight");
    tr->add_option("--loss.lambda-prop", tr_loss.lambda_prop, "property-head weight");
    tr->add_option("--loss.strategy", tr_strategy,
                   "positive set rule: unit_only|numeric_only|joint|separate");
    tr->add_option("--loss.gate-tau", tr_loss.gate_tau, "gate routing threshold in training");
    tr->add_flag("!--loss.gate-disabled", tr_loss.gating_enabled,
                 "train with the numerical gate off");
    tr->add_flag("--quiet", tr_quiet, "suppress the per-epoch progress line");
    add_model_opts(tr, tr_model);
    add_common(tr, tr_common);
    add_config_file(tr);
    tr->callback([&] {
        if (tr_preset == "paper") {
            const TrainConfig preset = TrainConfig::paper_preset();
            if (!lr_opt->count()) tr_cfg.lr = preset.lr;
            if (!ep_opt->count()) tr_cfg.epochs = preset.epochs;
            if (!bs_opt->count()) tr_cfg.batch_size = preset.batch_size;
        }
        auto strat = strategy_from_name(tr_strategy);
        if (!strat) throw CLI::ValidationError("--loss.strategy", "unknown strategy");
        tr_loss.strategy = *strat;
        if (tr_common.seed) {
            tr_cfg.seed = tr_common.seed;
            tr_model.seed = tr_common.seed;
        }
        tr_model.unit_classes = table.size() + 1;
        const TrainResult r =
            train_from_dir(tr_data, tr_model, tr_cfg, tr_loss, table, tr_ckpt, tr_log);
        if (!tr_quiet)
            std::printf("trained %lld steps; mean loss %.4f (first epoch) -> %.4f (last)\n",
                        (long long)r.steps, r.epoch_first_mean, r.epoch_final_mean);
        std::printf("checkpoint written to %s\n", tr_ckpt.c_str());
    });

    // ---- index -------------------------------------------------------------
    auto* ix = app.add_subcommand("index", "encode a corpus and build the compressed index");
    std::string ix_corpus, ix_ckpt, ix_out;
    IndexConfig ix_cfg;
    CommonOpts ix_common;
    ix->add_option("--corpus", ix_corpus, "corpus.jsonl path")->required();
    ix->add_option("--checkpoint", ix_ckpt, "model checkpoint")->required();
    ix->add_option("--out", ix_out, "index output path")->required();
    add_index_opts(ix, ix_cfg);
    add_common(ix, ix_common);
    add_config_file(ix);
    ix->callback([&] {
        if (ix_common.seed) ix_cfg.seed = ix_common.seed;
        ix_cfg.threads = ix_common.threads;
        build_index_files(ix_corpus, ix_ckpt, ix_cfg, table, ix_out);
        std::printf("index written to %s\n", ix_out.c_str());
    });

    // ---- search ------------------------------------------------------------
    auto* se = app.add_subcommand("search", "run queries against an index");
    std::string se_index, se_ckpt, se_queries, se_query_text, se_run, se_tag = "numcolbert";
    int se_topk = 10, se_nprobe = 8;
    GateConfig se_gate;
    CommonOpts se_common;
    se->add_option("--index", se_index, "index file")->required();
    se->add_option("--checkpoint", se_ckpt, "model checkpoint")->required();
    auto* qf = se->add_option("--queries", se_queries, "queries.jsonl file");
    auto* qt = se->add_option("--query", se_query_text, "single query text");
    se->add_option("--top-k", se_topk, "results per query")->check(CLI::PositiveNumber);
    se->add_option("--nprobe", se_nprobe, "centroids probed per query row")
        ->check(CLI::PositiveNumber);
    se->add_option("--run-out", se_run, "write results as a TREC run file");
    se->add_option("--tag", se_tag, "run tag for --run-out");
    add_gate_opts(se, se_gate);
    add_common(se, se_common);
    add_config_file(se);
    qf->excludes(qt);
    se->callback([&] {
        if (se_queries.empty() && se_query_text.empty())
            throw CLI::RequiredError("--queries or --query");
        std::string qpath = se_queries;
        if (!se_query_text.empty()) {
            // wrap the ad-hoc query in a one-line temporary file
            qpath = se_index + ".query.tmp.jsonl";
            GenQuery q;
            q.qid = 0;
            q.text = se_query_text;
            auto cond = parse_condition(se_query_text, table);
            if (cond) q.cond = *cond;
            write_queries_jsonl(qpath, {q}, table);
        }
        const Run run = search_files(se_index, se_ckpt, qpath, se_gate, se_topk, se_nprobe, table);
        if (!se_query_text.empty()) std::remove(qpath.c_str());
        for (const auto& [qid, entries] : run) {
            std::printf("qid %lld\n", (long long)qid);
            for (size_t r = 0; r < entries.size(); r++)
                std::printf("  %2zu. doc %-8lld %.6f\n", r + 1, (long long)entries[r].doc_id,
                            entries[r].score);
        }
        if (!se_run.empty()) {
            write_run(se_run, run, se_tag);
            std::printf("run written to %s\n", se_run.c_str());
        }
    });

    // ---- eval --------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "score a run file against qrels");
    std::string ev_run, ev_qrels, ev_queries, ev_csv;
    ev->add_option("--run", ev_run, "TREC run file")->required();
    ev->add_option("--qrels", ev_qrels, "qrels file")->required();
    ev->add_option("--queries", ev_queries, "queries.jsonl for per-operator slices");
    ev->add_option("--csv", ev_csv, "also write the report as CSV");
    add_config_file(ev);
    ev->callback([&] {
        const MetricReport report = eval_files(ev_run, ev_qrels, ev_queries, table);
        std::fputs(report_table(report).c_str(), stdout);
        if (!ev_csv.empty()) write_file(ev_csv, report_csv(report));
    });

    // ---- bench -------------------------------------------------------------
    auto* be = app.add_subcommand("bench", "latency/size grid over nbits and nprobe");
    std::string be_corpus, be_ckpt, be_queries, be_qrels, be_csv;
    std::vector<int> be_nbits{8, 4, 2, 1}, be_nprobe{8};
    int be_topk = 10;
    IndexConfig be_cfg;
    GateConfig be_gate;
    CommonOpts be_common;
    be->add_option("--corpus", be_corpus, "corpus.jsonl path")->required();
    be->add_option("--checkpoint", be_ckpt, "model checkpoint")->required();
    be->add_option("--queries", be_queries, "queries.jsonl file")->required();
    be->add_option("--qrels", be_qrels, "qrels for per-cell ndcg@10");
    be->add_option("--nbits", be_nbits, "nbits sweep")->check(CLI::IsMember({1, 2, 4, 8}));
    be->add_option("--nprobe", be_nprobe, "nprobe sweep")->check(CLI::PositiveNumber);
    be->add_option("--top-k", be_topk, "results per query")->check(CLI::PositiveNumber);
    be->add_option("--csv", be_csv, "also write the grid as CSV");
    be->add_option("--index.k-centroids", be_cfg.k_centroids, "centroid count (0 = auto)");
    be->add_option("--index.kmeans-iters", be_cfg.kmeans_iters, "Lloyd iterations")
        ->check(CLI::NonNegativeNumber);
    be->add_option("--index.seed", be_cfg.seed, "k-means seed");
    add_gate_opts(be, be_gate);
    add_common(be, be_common);
    add_config_file(be);
    be->callback([&] {
        if (be_common.seed) be_cfg.seed = be_common.seed;
        be_cfg.threads = be_common.threads;
        const auto cells = bench_grid(be_corpus, be_ckpt, be_queries, be_qrels, be_nbits,
                                      be_nprobe, be_cfg, be_gate, be_topk, table);
        std::fputs(bench_table(cells).c_str(), stdout);
        if (!be_csv.empty()) write_file(be_csv, bench_csv(cells));
    });

    // ---- export-embeddings -------------------------------------------------
    auto* ex = app.add_subcommand("export-embeddings",
                                  "dump detector-flagged numeric token embeddings");
    std::string ex_ckpt, ex_queries, ex_out;
    GateConfig ex_gate;
    ex->add_option("--checkpoint", ex_ckpt, "model checkpoint")->required();
    ex->add_option("--queries", ex_queries, "queries.jsonl file")->required();
    ex->add_option("--out", ex_out, "CSV output path")->required();
    add_gate_opts(ex, ex_gate);
    add_config_file(ex);
    ex->callback([&] {
        const int64_t n = export_embeddings_file(ex_ckpt, ex_queries, ex_gate, table, ex_out);
        std::printf("wrote %lld rows to %s\n", (long long)n, ex_out.c_str());
    });

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(app, args);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
    try {
        std::reverse(args.begin(), args.end());  // App::parse consumes back-to-front
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message; its own exit codes are not our contract
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ncb::data_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const ncb::format_error& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
