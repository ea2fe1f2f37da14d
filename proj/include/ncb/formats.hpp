#pragma once

// On-disk interchange formats: JSON-lines corpus/queries, TREC qrels and run
// files, TSV triplets. Writers are byte-deterministic (shortest round-trip
// doubles, fixed key order); readers validate and throw format_error.

#include <string>
#include <vector>

#include "ncb/datagen.hpp"

namespace ncb {

// corpus.jsonl: {"id":0,"text":"...","concept":"...","value":1.5,"unit":"gb"}
void write_corpus_jsonl(const std::string& path, const std::vector<Sentence>& corpus,
                        const UnitTable& table);
std::vector<Sentence> read_corpus_jsonl(const std::string& path, const UnitTable& table);

// queries.jsonl: {"qid":0,"text":"...","value":1.5,"cmp":"GT","unit":"gb"}
void write_queries_jsonl(const std::string& path, const std::vector<GenQuery>& queries,
                         const UnitTable& table);
std::vector<GenQuery> read_queries_jsonl(const std::string& path, const UnitTable& table);

// qrels: "qid 0 docid grade" lines; only relevant (grade > 0) rows are
// materialized, absent pairs are grade 0.
void write_qrels(const std::string& path, const Qrels& qrels);
Qrels read_qrels(const std::string& path);

// triplets.tsv: query_text <TAB> pos_id <TAB> neg_id <TAB> provenance
void write_triplets_tsv(const std::string& path, const std::vector<TripletRow>& triplets);
std::vector<TripletRow> read_triplets_tsv(const std::string& path);

// TREC run: "qid Q0 docid rank score tag". Ranked descending per query.
struct RunEntry {
    int64_t doc_id = -1;
    double score = 0.0;
};
using Run = std::vector<std::pair<int64_t, std::vector<RunEntry>>>;

void write_run(const std::string& path, const Run& run, const std::string& tag);
// Validates ranks contiguous from 1, scores non-increasing, doc ids unique.
Run read_run(const std::string& path);

}  // namespace ncb
