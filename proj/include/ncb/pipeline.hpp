#pragma once

// File-level orchestration shared by the command-line tool and the Python
// bindings: each step reads and writes the declared formats and nothing else.
//
// Dataset directory layout:
//   corpus.jsonl  queries_train.jsonl  queries_eval.jsonl
//   qrels_train.txt  qrels_eval.txt  triplets.tsv

#include <string>
#include <vector>

#include "ncb/datagen.hpp"
#include "ncb/eval.hpp"
#include "ncb/formats.hpp"
#include "ncb/index.hpp"
#include "ncb/trainer.hpp"

namespace ncb {

struct GenSummary {
    int64_t sentences = 0;
    int64_t train_queries = 0, eval_queries = 0;
    int64_t triplets = 0;
};

GenSummary gen_data_to_dir(const CorpusSpec& spec, const std::string& out_dir,
                           const UnitTable& table);

// Trains on <data_dir>/corpus.jsonl + triplets.tsv, writes the checkpoint,
// and appends one CSV row per step to log_csv when nonempty
// (step,loss,l_ret,l_cont,l_det,l_prop,grad_norm,lr).
TrainResult train_from_dir(const std::string& data_dir, const ModelConfig& model_cfg,
                           const TrainConfig& train_cfg, const LossConfig& loss_cfg,
                           const UnitTable& table, const std::string& out_checkpoint,
                           const std::string& log_csv = "");

// Encodes every corpus sentence with the checkpointed model and saves the
// compressed index.
void build_index_files(const std::string& corpus_path, const std::string& checkpoint_path,
                       const IndexConfig& index_cfg, const UnitTable& table,
                       const std::string& out_index);

// Runs every query in the file against the index; returns the run in query
// order. Queries keep their file qids.
Run search_files(const std::string& index_path, const std::string& checkpoint_path,
                 const std::string& queries_path, const GateConfig& gate_cfg, int top_k,
                 int nprobe, const UnitTable& table);

// Scores a run file against qrels; the queries file (optional, "" to skip)
// provides comparator labels for the per-operator slices.
MetricReport eval_files(const std::string& run_path, const std::string& qrels_path,
                        const std::string& queries_path, const UnitTable& table);

struct BenchCell {
    int nbits = 0, nprobe = 0;
    BenchResult bench;
    double ndcg10 = -1.0;  // -1 when no qrels were supplied
};

// Builds one index per nbits value over the encoded corpus and benchmarks
// each (nbits, nprobe) cell; when qrels_path is nonempty, each cell also
// reports nDCG@10 of its own search results.
std::vector<BenchCell> bench_grid(const std::string& corpus_path,
                                  const std::string& checkpoint_path,
                                  const std::string& queries_path, const std::string& qrels_path,
                                  const std::vector<int>& nbits_list,
                                  const std::vector<int>& nprobe_list, IndexConfig base_cfg,
                                  const GateConfig& gate_cfg, int top_k, const UnitTable& table);

std::string bench_table(const std::vector<BenchCell>& cells);  // aligned text
std::string bench_csv(const std::vector<BenchCell>& cells);

// Exports detector-flagged numeric token embeddings of the file's queries.
// Returns the number of rows written.
int64_t export_embeddings_file(const std::string& checkpoint_path,
                               const std::string& queries_path, const GateConfig& gate_cfg,
                               const UnitTable& table, const std::string& out_csv);

}  // namespace ncb
