#include "ncb/pipeline.hpp"

#include <cstdio>
#include <filesystem>

namespace ncb {

namespace {

std::string join(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

std::vector<DocEmbeddings> encode_corpus(const std::vector<Sentence>& corpus,
                                         const ModelParams& params) {
    std::vector<DocEmbeddings> out;
    out.reserve(corpus.size());
    for (const auto& s : corpus) {
        DocEmbeddings doc = encode_document(s.text, params);
        doc.doc_id = s.id;
        out.push_back(std::move(doc));
    }
    return out;
}

std::map<int64_t, Cmp> conditions_of(const std::vector<GenQuery>& queries) {
    std::map<int64_t, Cmp> m;
    for (const auto& q : queries) m[q.qid] = q.cond.cmp;
    return m;
}

}  // namespace

GenSummary gen_data_to_dir(const CorpusSpec& spec, const std::string& out_dir,
                           const UnitTable& table) {
    std::filesystem::create_directories(out_dir);
    GeneratedData data = generate(spec, table);
    write_corpus_jsonl(join(out_dir, "corpus.jsonl"), data.build.corpus, table);
    write_queries_jsonl(join(out_dir, "queries_train.jsonl"), data.queries.train, table);
    write_queries_jsonl(join(out_dir, "queries_eval.jsonl"), data.queries.eval, table);
    write_qrels(join(out_dir, "qrels_train.txt"), data.qrels_train);
    write_qrels(join(out_dir, "qrels_eval.txt"), data.qrels_eval);
    write_triplets_tsv(join(out_dir, "triplets.tsv"), data.triplets);
    return {(int64_t)data.build.corpus.size(), (int64_t)data.queries.train.size(),
            (int64_t)data.queries.eval.size(), (int64_t)data.triplets.size()};
}

TrainResult train_from_dir(const std::string& data_dir, const ModelConfig& model_cfg,
                           const TrainConfig& train_cfg, const LossConfig& loss_cfg,
                           const UnitTable& table, const std::string& out_checkpoint,
                           const std::string& log_csv) {
    const auto corpus = read_corpus_jsonl(join(data_dir, "corpus.jsonl"), table);
    const auto triplets = read_triplets_tsv(join(data_dir, "triplets.tsv"));
    const auto dataset = triplets_to_examples(triplets, corpus, table);

    std::string log = "step,loss,l_ret,l_cont,l_det,l_prop,grad_norm,lr\n";
    auto on_step = [&](const StepLog& s) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      (long long)s.step, s.loss.total, s.loss.ret, s.loss.cont, s.loss.det,
                      s.loss.prop, s.grad_norm, s.lr);
        log += buf;
    };

    ModelParams params = init_model(model_cfg);
    TrainResult result = train(dataset, params, train_cfg, loss_cfg, table,
                               log_csv.empty() ? std::function<void(const StepLog&)>{} : on_step);
    params.save(out_checkpoint);
    if (!log_csv.empty()) write_file(log_csv, log);
    return result;
}

void build_index_files(const std::string& corpus_path, const std::string& checkpoint_path,
                       const IndexConfig& index_cfg, const UnitTable& table,
                       const std::string& out_index) {
    const ModelParams params = ModelParams::load(checkpoint_path);
    const auto corpus = read_corpus_jsonl(corpus_path, table);
    save_index(build_index(encode_corpus(corpus, params), index_cfg), out_index);
}

Run search_files(const std::string& index_path, const std::string& checkpoint_path,
                 const std::string& queries_path, const GateConfig& gate_cfg, int top_k,
                 int nprobe, const UnitTable& table) {
    const ModelParams params = ModelParams::load(checkpoint_path);
    const CompressedIndex index = load_index(index_path);
    const auto queries = read_queries_jsonl(queries_path, table);
    Run run;
    for (const auto& q : queries) {
        const auto hits = search(index, encode_query(q.text, params, gate_cfg), top_k, nprobe);
        std::vector<RunEntry> entries;
        for (const auto& [doc, score] : hits) entries.push_back({doc, score});
        run.emplace_back(q.qid, std::move(entries));
    }
    return run;
}

MetricReport eval_files(const std::string& run_path, const std::string& qrels_path,
                        const std::string& queries_path, const UnitTable& table) {
    const Run run = read_run(run_path);
    const Qrels qrels = read_qrels(qrels_path);
    std::map<int64_t, Cmp> conditions;
    if (!queries_path.empty())
        conditions = conditions_of(read_queries_jsonl(queries_path, table));
    return evaluate(run, qrels, conditions);
}

std::vector<BenchCell> bench_grid(const std::string& corpus_path,
                                  const std::string& checkpoint_path,
                                  const std::string& queries_path, const std::string& qrels_path,
                                  const std::vector<int>& nbits_list,
                                  const std::vector<int>& nprobe_list, IndexConfig base_cfg,
                                  const GateConfig& gate_cfg, int top_k, const UnitTable& table) {
    const ModelParams params = ModelParams::load(checkpoint_path);
    const auto sentences = read_corpus_jsonl(corpus_path, table);
    const auto corpus = encode_corpus(sentences, params);
    const auto gen_queries = read_queries_jsonl(queries_path, table);
    Qrels qrels;
    if (!qrels_path.empty()) qrels = read_qrels(qrels_path);

    std::vector<QueryEmbeddings> queries;
    for (const auto& q : gen_queries) queries.push_back(encode_query(q.text, params, gate_cfg));

    std::vector<BenchCell> cells;
    for (int nbits : nbits_list) {
        IndexConfig cfg = base_cfg;
        cfg.nbits = nbits;
        const CompressedIndex index = build_index(corpus, cfg);
        for (int nprobe : nprobe_list) {
            BenchCell cell;
            cell.nbits = nbits;
            cell.nprobe = nprobe;
            cell.bench = bench_search(index, corpus, queries, top_k, nprobe);
            if (!qrels.empty()) {
                Run run;
                for (size_t i = 0; i < queries.size(); i++) {
                    const auto hits = search(index, queries[i], top_k, nprobe);
                    std::vector<RunEntry> entries;
                    for (const auto& [doc, score] : hits) entries.push_back({doc, score});
                    run.emplace_back(gen_queries[i].qid, std::move(entries));
                }
                cell.ndcg10 = evaluate(run, qrels).overall.ndcg10;
            }
            cells.push_back(cell);
        }
    }
    return cells;
}

std::string bench_table(const std::vector<BenchCell>& cells) {
    std::string out =
        "nbits nprobe   mean_ms median_ms  brute_ms   speedup   code_bytes  index_bytes     "
        "ndcg@10\n";
    for (const auto& c : cells) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "%5d %6d %9.3f %9.3f %9.3f %9.2f %12zu %12zu %11s\n", c.nbits, c.nprobe,
                      c.bench.mean_ms, c.bench.median_ms, c.bench.brute_mean_ms, c.bench.speedup,
                      c.bench.code_bytes, c.bench.index_bytes,
                      c.ndcg10 < 0 ? "-" : format_double(c.ndcg10).c_str());
        out += buf;
    }
    return out;
}

std::string bench_csv(const std::vector<BenchCell>& cells) {
    std::string out =
        "nbits,nprobe,mean_ms,median_ms,brute_mean_ms,speedup,code_bytes,index_bytes,ndcg10\n";
    for (const auto& c : cells) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f,%.6f,%.4f,%zu,%zu,%s\n", c.nbits,
                      c.nprobe, c.bench.mean_ms, c.bench.median_ms, c.bench.brute_mean_ms,
                      c.bench.speedup, c.bench.code_bytes, c.bench.index_bytes,
                      c.ndcg10 < 0 ? "" : format_double(c.ndcg10).c_str());
        out += buf;
    }
    return out;
}

int64_t export_embeddings_file(const std::string& checkpoint_path,
                               const std::string& queries_path, const GateConfig& gate_cfg,
                               const UnitTable& table, const std::string& out_csv) {
    const ModelParams params = ModelParams::load(checkpoint_path);
    const auto queries = read_queries_jsonl(queries_path, table);
    const auto rows = export_embeddings(queries, params, gate_cfg, table);
    write_export_csv(out_csv, rows);
    return (int64_t)rows.size();
}

}  // namespace ncb
