#include "ncb/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

namespace ncb {

namespace {

// Sentence templates. "{c}" concept surface, "{q}" the quantity ("<value>
// <unit>"). Vocabulary is kept clear of unit surfaces, comparator keywords,
// and multiplier words so rendered sentences parse back unambiguously.
const char* kTemplates[] = {
    "the {c} reached {q} last quarter",
    "{c} was measured at {q}",
    "analysts reported the {c} at {q}",
    "a {c} reading near {q} was recorded",
    "the {c} now stands at {q}",
    "records show the {c} hit {q} in march",
    "the {c} climbed to {q} this period",
    "its {c} held near {q} through april",
};
constexpr int kMaxTemplates = 8;

const char* kSyllables[] = {"ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "ne",
                            "pa", "qo", "ri", "su", "ta", "vu", "wa", "xe", "yo", "zi"};

std::string render(const std::string& tmpl, const std::string& concept_name,
                   const std::string& quantity) {
    std::string out = tmpl;
    size_t c = out.find("{c}");
    out.replace(c, 3, concept_name);
    size_t q = out.find("{q}");
    out.replace(q, 3, quantity);
    return out;
}

std::unordered_set<std::string> reserved_words(const UnitTable& table) {
    std::unordered_set<std::string> r;
    for (int u = 0; u < table.size(); u++) {
        r.insert(table.unit(u).id);
        for (const auto& s : table.unit(u).surfaces) r.insert(s);
    }
    for (const char* w : {"over", "above", "greater", "exceeding", "more", "than", "at",
                          "least", "under", "below", "less", "most", "exactly", "equal", "of",
                          "hundred", "thousand", "million", "billion", "trillion"})
        r.insert(w);
    for (const char* t : kTemplates)
        for (const auto& tok : tokenize(t)) r.insert(tok);
    return r;
}

std::vector<std::string> make_names(int count, const UnitTable& table, Rng& rng) {
    auto reserved = reserved_words(table);
    std::unordered_set<std::string> used;
    std::vector<std::string> names;
    names.reserve((size_t)count);
    const size_t n_syl = std::size(kSyllables);
    while ((int)names.size() < count) {
        std::string name;
        for (int s = 0; s < 3; s++) name += kSyllables[rng.below(n_syl)];
        if (reserved.count(name) || used.count(name)) continue;
        used.insert(name);
        names.push_back(std::move(name));
    }
    return names;
}

std::vector<std::string> dimension_list(const UnitTable& table) {
    std::vector<std::string> dims;
    for (int u = 0; u < table.size(); u++) {
        const auto& d = table.unit(u).dimension;
        if (std::find(dims.begin(), dims.end(), d) == dims.end()) dims.push_back(d);
    }
    return dims;
}

std::vector<UnitId> units_of_dimension(const UnitTable& table, const std::string& dim) {
    std::vector<UnitId> out;
    for (int u = 0; u < table.size(); u++)
        if (table.unit(u).dimension == dim) out.push_back(u);
    return out;
}

std::string quantity_text(double value, UnitId unit, const UnitTable& table) {
    return format_double(value) + " " + table.unit(unit).surfaces[0];
}

// Renders a sentence and verifies the stored annotation against a fresh
// parse; any drift between text and label is a hard error.
Sentence make_sentence(int64_t id, const std::string& tmpl, const std::string& surface,
                       double value, UnitId unit, const std::string& concept_name, int pair,
                       int tmpl_idx, int surf_idx, const UnitTable& table) {
    Sentence s;
    s.id = id;
    s.text = render(tmpl, surface, quantity_text(value, unit, table));
    s.concept_name = concept_name;
    s.pair = pair;
    s.tmpl = tmpl_idx;
    s.surf = surf_idx;
    auto qs = parse_quantities(s.text, table);
    if (qs.size() != 1 || qs[0].value != value || !qs[0].unit || *qs[0].unit != unit) {
        throw data_error("datagen: sentence failed self-verification: " + s.text);
    }
    s.quantity = qs[0];
    return s;
}

std::vector<double> pair_values(const std::vector<Sentence>& corpus, int pair) {
    std::vector<double> vals;
    for (const auto& s : corpus)
        if (s.pair == pair) vals.push_back(s.quantity.value);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    return vals;
}

const char* query_keyword(Cmp c) {
    switch (c) {
        case Cmp::GT: return "over";
        case Cmp::LT: return "under";
        default: return "at exactly";
    }
}

GenQuery make_query(int64_t qid, const std::string& concept_name, Cmp cmp, double value, UnitId unit,
                    int pair, bool held_out, const UnitTable& table) {
    GenQuery q;
    q.qid = qid;
    q.text = concept_name + " " + query_keyword(cmp) + " " + quantity_text(value, unit, table);
    q.concept_name = concept_name;
    q.pair = pair;
    q.held_out = held_out;
    auto cond = parse_condition(q.text, table);
    if (!cond || cond->value != value || cond->cmp != cmp || !cond->unit ||
        *cond->unit != unit) {
        throw data_error("datagen: query failed self-verification: " + q.text);
    }
    q.cond = *cond;
    return q;
}

}  // namespace

double round_sig3(double v) {
    if (v == 0.0 || !std::isfinite(v)) return v;
    char buf[40];
    int n = std::snprintf(buf, sizeof buf, "%.2e", v);
    double out = 0.0;
    std::from_chars(buf, buf + n, out);
    return out;
}

CorpusBuild generate_corpus(const CorpusSpec& spec, const UnitTable& table) {
    if (spec.n_concepts < 1 || spec.synonyms_per_concept < 1 || spec.values_per_pair < 1)
        throw data_error("generate_corpus: counts must be positive");
    if (spec.n_templates < 1 || spec.n_templates > kMaxTemplates)
        throw data_error("generate_corpus: n_templates out of range");

    Rng rng(spec.seed);
    auto names = make_names(spec.n_concepts * spec.synonyms_per_concept, table, rng);
    auto dims = dimension_list(table);

    CorpusBuild out;
    out.concepts.resize((size_t)spec.n_concepts);
    for (int c = 0; c < spec.n_concepts; c++) {
        auto& info = out.concepts[(size_t)c];
        for (int s = 0; s < spec.synonyms_per_concept; s++)
            info.surfaces.push_back(names[(size_t)(c * spec.synonyms_per_concept + s)]);
        auto units = units_of_dimension(table, dims[rng.below(dims.size())]);
        size_t first = rng.below(units.size());
        info.units.push_back(units[first]);
        if (units.size() > 1 && rng.unit() < 0.5) {
            size_t second = rng.below(units.size() - 1);
            if (second >= first) second += 1;
            info.units.push_back(units[second]);
        }
        for (UnitId u : info.units) out.pairs.emplace_back(c, u);
    }

    for (int p = 0; p < (int)out.pairs.size(); p++) {
        auto [c, unit] = out.pairs[(size_t)p];
        const auto& info = out.concepts[(size_t)c];
        double lo_exp = -1.0 + 3.0 * rng.unit();  // two-decade log-uniform range
        for (int v = 0; v < spec.values_per_pair; v++) {
            double value = round_sig3(std::pow(10.0, lo_exp + 2.0 * rng.unit()));
            for (int t = 0; t < spec.n_templates; t++) {
                int surf = (int)rng.below((size_t)spec.synonyms_per_concept);
                out.corpus.push_back(make_sentence((int64_t)out.corpus.size(), kTemplates[t],
                                                   info.surfaces[(size_t)surf], value, unit,
                                                   info.surfaces[0], p, t, surf, table));
            }
        }
    }
    return out;
}

QueryBuild generate_queries(const CorpusBuild& build, const CorpusSpec& spec,
                            const UnitTable& table) {
    if (build.corpus.empty()) throw data_error("generate_queries: empty corpus");
    Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    QueryBuild out;
    int64_t qid = 0;

    for (int p = 0; p < (int)build.pairs.size(); p++) {
        auto [c, unit] = build.pairs[(size_t)p];
        const std::string& concept_name = build.concepts[(size_t)c].surfaces[0];
        auto vals = pair_values(build.corpus, p);
        if (vals.empty()) continue;

        // Split distinct values into train / held-out thresholds.
        std::vector<size_t> idx(vals.size());
        for (size_t i = 0; i < idx.size(); i++) idx[i] = i;
        rng.shuffle(idx);
        size_t n_held = vals.size() >= 2
                            ? std::min(vals.size() - 1,
                                       (size_t)std::lround(spec.held_out_fraction *
                                                           (double)vals.size()))
                            : 0;
        std::vector<double> held, train;
        for (size_t i = 0; i < idx.size(); i++)
            (i < n_held ? held : train).push_back(vals[idx[i]]);
        std::sort(train.begin(), train.end());
        std::sort(held.begin(), held.end());

        auto emit = [&](const std::vector<double>& pool, bool held_out,
                        std::vector<GenQuery>& dst) {
            if (pool.empty()) return;
            size_t n = pool.size();
            size_t half = (n + 1) / 2;
            double t_eq = pool[rng.below(n)];
            double t_gt = pool[rng.below(half)];          // lower half: positives abound
            double t_lt = pool[n - 1 - rng.below(half)];  // upper half
            dst.push_back(make_query(qid++, concept_name, Cmp::EQ, t_eq, unit, p, held_out, table));
            dst.push_back(make_query(qid++, concept_name, Cmp::GT, t_gt, unit, p, held_out, table));
            dst.push_back(make_query(qid++, concept_name, Cmp::LT, t_lt, unit, p, held_out, table));
        };
        emit(train, false, out.train);
        emit(held, true, out.eval);
    }
    return out;
}

Qrels qrels_for(const std::vector<GenQuery>& queries, const std::vector<Sentence>& corpus,
                const UnitTable& table, double eq_tol) {
    Qrels out;
    for (const auto& q : queries) {
        auto& row = out[q.qid];
        for (const auto& s : corpus) {
            if (s.concept_name != q.concept_name) continue;
            if (satisfies(s.quantity, q.cond, table, eq_tol) == CondCheck::Satisfied)
                row[s.id] = 1;
        }
        if (row.empty()) out.erase(q.qid);
    }
    return out;
}

std::vector<TripletRow> build_triplets(const CorpusBuild& build,
                                       const std::vector<GenQuery>& train_queries,
                                       const CorpusSpec& spec, const UnitTable& table) {
    if (spec.triplet_cap < 1) throw data_error("build_triplets: cap must be positive");
    Rng rng(spec.seed ^ 0xda3e39cb94b95bdbULL);

    std::vector<std::vector<size_t>> by_pair(build.pairs.size());
    for (size_t i = 0; i < build.corpus.size(); i++)
        by_pair[(size_t)build.corpus[i].pair].push_back(i);

    std::vector<TripletRow> out;
    for (const auto& q : train_queries) {
        std::vector<int64_t> pos, neg;
        for (size_t i : by_pair[(size_t)q.pair]) {
            const auto& s = build.corpus[i];
            (satisfies(s.quantity, q.cond, table) == CondCheck::Satisfied ? pos : neg)
                .push_back(s.id);
        }
        if (pos.empty() || neg.empty()) continue;

        size_t total = pos.size() * neg.size();
        auto emit = [&](size_t flat) {
            TripletRow row;
            row.query_text = q.text;
            row.qid = q.qid;
            row.pair = q.pair;
            row.pos_id = pos[flat / neg.size()];
            row.neg_id = neg[flat % neg.size()];
            row.provenance = "base";
            out.push_back(std::move(row));
        };
        if (total <= (size_t)spec.triplet_cap) {
            for (size_t f = 0; f < total; f++) emit(f);
        } else {
            std::unordered_set<size_t> taken;
            while (taken.size() < (size_t)spec.triplet_cap) {
                size_t f = rng.below(total);
                if (taken.insert(f).second) emit(f);
            }
        }
    }
    return out;
}

std::vector<TripletRow> augment(const std::vector<TripletRow>& triplets, CorpusBuild& build,
                                const std::vector<GenQuery>& train_queries,
                                const std::set<AugOp>& ops, uint64_t seed,
                                const UnitTable& table) {
    Rng rng(seed);
    std::unordered_map<int64_t, const GenQuery*> by_qid;
    for (const auto& q : train_queries) by_qid[q.qid] = &q;

    std::unordered_map<std::string, int64_t> text_to_id;
    for (const auto& s : build.corpus)
        text_to_id.emplace(s.text, s.id);

    // Observed base values per pair, frozen before any sentences are minted.
    std::vector<std::vector<double>> base_vals(build.pairs.size());
    for (size_t p = 0; p < build.pairs.size(); p++)
        base_vals[p] = pair_values(build.corpus, (int)p);

    // Mints (or reuses) a sentence with the given rendering inputs; returns
    // its id and the parsed quantity, or nullopt when self-verification or
    // the caller's label requirement would fail.
    auto mint = [&](const Sentence& like, double value, UnitId unit) -> std::optional<int64_t> {
        const auto& info = build.concepts[(size_t)build.pairs[(size_t)like.pair].first];
        std::string text = render(kTemplates[like.tmpl], info.surfaces[(size_t)like.surf],
                                  quantity_text(value, unit, table));
        auto it = text_to_id.find(text);
        if (it != text_to_id.end()) return it->second;
        auto qs = parse_quantities(text, table);
        if (qs.size() != 1 || !qs[0].unit || *qs[0].unit != unit) return std::nullopt;
        Sentence s;
        s.id = (int64_t)build.corpus.size();
        s.text = std::move(text);
        s.concept_name = like.concept_name;
        s.quantity = qs[0];
        s.pair = like.pair;
        s.tmpl = like.tmpl;
        s.surf = like.surf;
        build.corpus.push_back(s);
        text_to_id.emplace(build.corpus.back().text, s.id);
        return s.id;
    };

    std::vector<TripletRow> out = triplets;
    for (AugOp op : {AugOp::ConceptExpansion, AugOp::UnitPermutation, AugOp::ValuePermutation}) {
        if (!ops.count(op)) continue;
        for (const auto& row : triplets) {
            auto qit = by_qid.find(row.qid);
            if (qit == by_qid.end()) continue;
            const GenQuery& q = *qit->second;
            const auto& info = build.concepts[(size_t)build.pairs[(size_t)row.pair].first];
            const Sentence& pos = build.corpus[(size_t)row.pos_id];

            if (op == AugOp::ConceptExpansion) {
                if (info.surfaces.size() < 2) continue;
                const std::string& syn =
                    info.surfaces[1 + rng.below(info.surfaces.size() - 1)];
                // Queries lead with the canonical surface; swap it in place.
                std::string text = syn + q.text.substr(info.surfaces[0].size());
                auto cond = parse_condition(text, table);
                if (!cond || cond->value != q.cond.value || cond->cmp != q.cond.cmp ||
                    cond->unit != q.cond.unit)
                    continue;
                TripletRow aug = row;
                aug.query_text = std::move(text);
                aug.provenance = "concept_expansion";
                out.push_back(std::move(aug));
            } else if (op == AugOp::UnitPermutation) {
                if (!pos.quantity.unit) continue;
                auto siblings = units_of_dimension(table, table.unit(*pos.quantity.unit).dimension);
                siblings.erase(std::remove(siblings.begin(), siblings.end(), *pos.quantity.unit),
                               siblings.end());
                if (siblings.empty()) continue;
                UnitId alt = siblings[rng.below(siblings.size())];
                auto conv = convert(pos.quantity, alt, table);
                if (!conv) continue;
                auto id = mint(pos, conv->value, alt);
                if (!id) continue;
                // Truth must survive the conversion and re-rounding.
                if (satisfies(build.corpus[(size_t)*id].quantity, q.cond, table) !=
                    CondCheck::Satisfied)
                    continue;
                TripletRow aug = row;
                aug.pos_id = *id;
                aug.provenance = "unit_permutation";
                out.push_back(std::move(aug));
            } else {  // ValuePermutation
                if (!pos.quantity.unit) continue;
                const auto& vals = base_vals[(size_t)row.pair];
                if (vals.empty()) continue;
                double v = vals[rng.below(vals.size())];
                auto id = mint(pos, v, *pos.quantity.unit);
                if (!id) continue;
                bool sat = satisfies(build.corpus[(size_t)*id].quantity, q.cond, table) ==
                           CondCheck::Satisfied;
                TripletRow aug = row;
                if (sat) {
                    aug.pos_id = *id;  // still a positive
                } else {
                    aug.neg_id = *id;  // the mutated sentence becomes the negative
                }
                aug.provenance = "value_permutation";
                out.push_back(std::move(aug));
            }
        }
    }

    // Label soundness across everything we emitted.
    for (const auto& row : out) {
        auto cond = parse_condition(row.query_text, table);
        if (!cond) throw data_error("augment: query lost its condition: " + row.query_text);
        if (satisfies(build.corpus[(size_t)row.pos_id].quantity, *cond, table) !=
            CondCheck::Satisfied)
            throw data_error("augment: positive does not satisfy: " + row.query_text);
        if (satisfies(build.corpus[(size_t)row.neg_id].quantity, *cond, table) ==
            CondCheck::Satisfied)
            throw data_error("augment: negative satisfies: " + row.query_text);
    }
    return out;
}

GeneratedData generate(const CorpusSpec& spec, const UnitTable& table) {
    GeneratedData data;
    data.build = generate_corpus(spec, table);
    data.queries = generate_queries(data.build, spec, table);
    data.triplets = build_triplets(data.build, data.queries.train, spec, table);
    data.triplets = augment(data.triplets, data.build, data.queries.train,
                            {AugOp::ConceptExpansion, AugOp::UnitPermutation,
                             AugOp::ValuePermutation},
                            spec.seed ^ 0xc2b2ae3d27d4eb4fULL, table);
    data.qrels_train = qrels_for(data.queries.train, data.build.corpus, table);
    data.qrels_eval = qrels_for(data.queries.eval, data.build.corpus, table);
    return data;
}

std::vector<TrainExample> triplets_to_examples(const std::vector<TripletRow>& triplets,
                                               const std::vector<Sentence>& corpus,
                                               const UnitTable& table) {
    std::unordered_map<int64_t, const Sentence*> by_id;
    for (const auto& s : corpus) by_id[s.id] = &s;
    std::vector<TrainExample> out;
    out.reserve(triplets.size());
    for (const auto& row : triplets) {
        auto pit = by_id.find(row.pos_id);
        auto nit = by_id.find(row.neg_id);
        if (pit == by_id.end() || nit == by_id.end())
            throw data_error("triplets_to_examples: unknown sentence id");
        TrainExample ex;
        ex.query_text = row.query_text;
        ex.cond = parse_condition(row.query_text, table);
        ex.token_labels = numeric_token_labels(tokenize(row.query_text), table);
        ex.pos_text = pit->second->text;
        ex.neg_text = nit->second->text;
        ex.pos_ann.quantity = pit->second->quantity;
        ex.neg_ann.quantity = nit->second->quantity;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace ncb
