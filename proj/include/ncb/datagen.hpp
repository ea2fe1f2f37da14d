#pragma once

// Synthetic quantity-conditioned benchmark: procedural concepts with synonym
// sets, one quantity mention per sentence, EQ/GT/LT queries with exact
// relevance judgments, training triplets, and three augmentation operations.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ncb/losses.hpp"
#include "ncb/quantity.hpp"

namespace ncb {

struct CorpusSpec {
    int n_concepts = 50;
    int synonyms_per_concept = 3;  // total surfaces per concept; [0] is canonical
    int values_per_pair = 40;      // log-uniform draws per concept-unit pair
    int n_templates = 8;           // sentence templates used (max 8)
    double held_out_fraction = 0.20;  // thresholds reserved for evaluation queries
    int triplet_cap = 64;             // per training query
    uint64_t seed = 7;
};

struct Sentence {
    int64_t id = -1;
    std::string text;
    std::string concept_name;  // canonical concept name
    Quantity quantity;    // re-verified against parse_quantities(text)
    // generation-internal fields (not serialized)
    int pair = -1;  // concept-unit pair index
    int tmpl = 0;   // template used
    int surf = 0;   // concept surface index used
};

struct ConceptInfo {
    std::vector<std::string> surfaces;  // surfaces[0] = canonical name
    std::vector<UnitId> units;          // 1-2 units, one dimension
};

struct GenQuery {
    int64_t qid = -1;
    std::string text;
    NumericalCondition cond;
    std::string concept_name;
    int pair = -1;
    bool held_out = false;  // threshold reserved for evaluation
};

struct TripletRow {
    std::string query_text;
    int64_t pos_id = -1, neg_id = -1;
    std::string provenance;  // base | concept_expansion | unit_permutation | value_permutation
    // generation-internal
    int64_t qid = -1;
    int pair = -1;
};

using Qrels = std::map<int64_t, std::map<int64_t, int>>;  // qid -> doc_id -> grade

struct CorpusBuild {
    std::vector<Sentence> corpus;
    std::vector<ConceptInfo> concepts;
    // pair index -> (concept index, unit)
    std::vector<std::pair<int, UnitId>> pairs;
};

// Rounds to three significant decimal digits through a decimal rendering, so
// the rendered text re-parses to the bit-identical double.
double round_sig3(double v);

CorpusBuild generate_corpus(const CorpusSpec& spec, const UnitTable& table);

struct QueryBuild {
    std::vector<GenQuery> train;  // thresholds drawn from the training split
    std::vector<GenQuery> eval;   // thresholds held out from training triplets
};

QueryBuild generate_queries(const CorpusBuild& build, const CorpusSpec& spec,
                            const UnitTable& table);

// Exact judgments: grade 1 iff same concept and the sentence quantity
// satisfies the query condition; only relevant pairs are materialized.
Qrels qrels_for(const std::vector<GenQuery>& queries, const std::vector<Sentence>& corpus,
                const UnitTable& table, double eq_tol = 1e-9);

// Cartesian positives x same-pair negatives per training query, seeded
// sampling above the per-query cap. Every row is invariant-checked.
std::vector<TripletRow> build_triplets(const CorpusBuild& build,
                                       const std::vector<GenQuery>& train_queries,
                                       const CorpusSpec& spec, const UnitTable& table);

enum class AugOp { ConceptExpansion, UnitPermutation, ValuePermutation };

// Returns the input triplets followed by augmented rows; unit/value
// permutation mint new sentences appended to build.corpus (deduplicated by
// rendered text). Rows whose re-verified labels would flip are dropped.
std::vector<TripletRow> augment(const std::vector<TripletRow>& triplets, CorpusBuild& build,
                                const std::vector<GenQuery>& train_queries,
                                const std::set<AugOp>& ops, uint64_t seed,
                                const UnitTable& table);

struct GeneratedData {
    CorpusBuild build;
    QueryBuild queries;
    std::vector<TripletRow> triplets;  // base + augmented
    Qrels qrels_train, qrels_eval;     // judged over the final corpus
};

// Full pipeline: corpus -> queries -> triplets -> all three augmentations ->
// qrels over the augmented corpus.
GeneratedData generate(const CorpusSpec& spec, const UnitTable& table);

// Materializes trainer inputs from triplet rows + corpus sentences.
std::vector<TrainExample> triplets_to_examples(const std::vector<TripletRow>& triplets,
                                               const std::vector<Sentence>& corpus,
                                               const UnitTable& table);

}  // namespace ncb
