#pragma once

// Retrieval metrics (binary gains), per-comparator breakdown, wall-clock
// benchmarking against the brute-force scorer, and numeric-token embedding
// export with a silhouette summary.

#include <map>
#include <string>
#include <vector>

#include "ncb/formats.hpp"
#include "ncb/index.hpp"

namespace ncb {

// Binary-gain metrics over one ranked list. `rels` maps doc_id -> grade;
// grades > 0 count as relevant. Each returns 0 when nothing relevant exists.
double ndcg_at_k(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels,
                 int k = 10);
double mrr_at_k(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels,
                int k = 10);
double precision_at_k(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels,
                      int k);
double recall_at_k(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels,
                   int k);

struct SliceStats {
    int n = 0;  // queries contributing to the means
    double ndcg10 = 0.0, mrr10 = 0.0, p10 = 0.0, r100 = 0.0;
};

struct MetricReport {
    SliceStats overall;
    std::map<Cmp, SliceStats> by_cmp;  // only queries with a known comparator
    int skipped = 0;                   // queries with zero relevant documents
};

// Means over the union of qrels and condition qids. A query with no relevant
// documents is excluded from every mean (and counted in `skipped`); a query
// missing from the run scores zero on all metrics.
MetricReport evaluate(const Run& run, const Qrels& qrels,
                      const std::map<int64_t, Cmp>& conditions = {});

std::string report_table(const MetricReport& report);  // aligned text
std::string report_csv(const MetricReport& report);    // slice,n,ndcg10,mrr10,p10,r100

struct BenchResult {
    int n_queries = 0;
    double mean_ms = 0.0, median_ms = 0.0;        // compressed search
    double brute_mean_ms = 0.0, brute_median_ms = 0.0;
    double speedup = 0.0;                         // brute_mean / mean
    size_t index_bytes = 0, code_bytes = 0;
};

// Times search() per query after `warmup` untimed passes, then the
// brute-force gated MaxSim over the raw document embeddings. Single-threaded.
BenchResult bench_search(const CompressedIndex& index, const std::vector<DocEmbeddings>& corpus,
                         const std::vector<QueryEmbeddings>& queries, int top_k, int nprobe,
                         int warmup = 2);

struct ExportRow {
    int64_t qid = -1;
    std::string token;
    Cmp cmp = Cmp::EQ;
    std::vector<double> vec;  // ungated normalized embedding (d floats)
};

// One row per detector-flagged token (p > tau) of each query whose text
// parses to a numerical condition; other queries contribute nothing.
std::vector<ExportRow> export_embeddings(const std::vector<GenQuery>& queries,
                                         const ModelParams& params, const GateConfig& gate_cfg,
                                         const UnitTable& table);
void write_export_csv(const std::string& path, const std::vector<ExportRow>& rows);

// Mean silhouette over Euclidean distances; labels partition the rows.
// A singleton cluster's point contributes 0. Requires >= 2 distinct labels.
double silhouette(const std::vector<std::vector<double>>& points, const std::vector<int>& labels);

}  // namespace ncb
