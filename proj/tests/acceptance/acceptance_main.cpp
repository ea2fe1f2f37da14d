// Acceptance suite: thirteen end-to-end checks covering gradients, gating,
// index integrity, compression fidelity, speed, training efficacy, detector
// quality, metric correctness, quantity semantics, and embedding separation.
// Each criterion prints exactly one line:  C<nn> PASS|FAIL  <summary>
// Exit code is the number of failed criteria.
//
// Usage: acceptance [C1 C5 ...]   (no arguments: run everything in order)

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "../fd_check.hpp"
#include "ncb/datagen.hpp"
#include "ncb/eval.hpp"
#include "ncb/index.hpp"
#include "ncb/losses.hpp"
#include "ncb/trainer.hpp"

using namespace ncb;

namespace {

const UnitTable& T() { return UnitTable::builtin(); }

double now_s() {
    return (double)std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
               .count() /
           1000.0;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

std::vector<DocEmbeddings> encode_corpus(const std::vector<Sentence>& corpus,
                                         const ModelParams& params) {
    std::vector<DocEmbeddings> out;
    out.reserve(corpus.size());
    for (const auto& s : corpus) {
        auto d = encode_document(s.text, params);
        d.doc_id = s.id;
        out.push_back(std::move(d));
    }
    return out;
}

// Exact ranking: every document scored by MaxSim over its raw rows, sorted by
// descending score with ascending ids breaking ties (same order as search()).
std::vector<std::pair<int64_t, double>> brute_rank(const QueryEmbeddings& q,
                                                   const std::vector<DocEmbeddings>& corpus,
                                                   int top_k) {
    std::vector<std::pair<int64_t, double>> scored;
    scored.reserve(corpus.size());
    for (const auto& d : corpus) scored.emplace_back(d.doc_id, maxsim(q.e, d.e).value);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if ((int)scored.size() > top_k) scored.resize((size_t)top_k);
    return scored;
}

Run to_run(const std::vector<GenQuery>& queries,
           const std::function<std::vector<std::pair<int64_t, double>>(const GenQuery&)>& rank) {
    Run run;
    for (const auto& q : queries) {
        std::vector<RunEntry> entries;
        for (const auto& [doc, score] : rank(q)) entries.push_back({doc, score});
        run.emplace_back(q.qid, std::move(entries));
    }
    return run;
}

std::map<int64_t, Cmp> conditions_of(const std::vector<GenQuery>& queries) {
    std::map<int64_t, Cmp> out;
    for (const auto& q : queries) out[q.qid] = q.cond.cmp;
    return out;
}

bool same_bits(double a, double b) {
    uint64_t ua, ub;
    std::memcpy(&ua, &a, 8);
    std::memcpy(&ub, &b, 8);
    return ua == ub;
}

// Corpus + queries shared by the gating/index equivalence checks (>=1000 docs,
// >=100 queries, untrained encoder).
struct SmallBench {
    std::vector<Sentence> corpus;
    std::vector<GenQuery> queries;
    ModelParams params;
};

const SmallBench& small_bench() {
    static const SmallBench bench = [] {
        CorpusSpec spec;
        spec.n_concepts = 14;
        spec.synonyms_per_concept = 2;
        spec.values_per_pair = 10;
        spec.n_templates = 8;
        spec.seed = 21;
        auto build = generate_corpus(spec, T());
        auto queries = generate_queries(build, spec, T());
        SmallBench b{std::move(build.corpus), {}, init_model(ModelConfig{})};
        if (b.corpus.size() > 1000) b.corpus.resize(1000);
        for (const auto& q : queries.train) b.queries.push_back(q);
        for (const auto& q : queries.eval) b.queries.push_back(q);
        if (b.queries.size() > 100) b.queries.resize(100);
        return b;
    }();
    return bench;
}

// 10k-document corpus with judged held-out queries for the compression
// fidelity and size-law checks.
struct MediumBench {
    std::vector<Sentence> corpus;
    std::vector<GenQuery> queries;  // 100 held-out
    Qrels qrels;
    ModelParams params;
    std::vector<DocEmbeddings> docs;
};

const MediumBench& medium_bench() {
    static const MediumBench bench = [] {
        CorpusSpec spec;
        spec.n_concepts = 40;
        spec.synonyms_per_concept = 2;
        spec.values_per_pair = 25;
        spec.n_templates = 8;
        spec.seed = 33;
        auto build = generate_corpus(spec, T());
        auto queries = generate_queries(build, spec, T());
        ModelConfig mc;
        mc.dim = 32;
        mc.feat_dim = 256;
        mc.hidden = 16;
        mc.unit_classes = T().size() + 1;
        MediumBench b{std::move(build.corpus), std::move(queries.eval), {}, init_model(mc), {}};
        if (b.queries.size() > 100) b.queries.resize(100);
        b.qrels = qrels_for(b.queries, b.corpus, T());
        b.docs = encode_corpus(b.corpus, b.params);
        return b;
    }();
    return bench;
}

// ---------------------------------------------------------------------------
// C1: analytic gradients vs central finite differences
// ---------------------------------------------------------------------------

std::vector<TrainExample> random_fd_batch(uint64_t seed) {
    Rng rng(seed);
    const char* concepts[] = {"revenue", "capacity", "payload", "dosage",
                              "bandwidth", "margin", "inventory"};
    auto value_text = [&](double v) { return format_double(round_sig3(v)); };
    auto mk = [&](const std::string& query, const std::string& pos, const std::string& neg) {
        TrainExample ex;
        ex.query_text = query;
        ex.cond = parse_condition(query, T());
        ex.token_labels = numeric_token_labels(tokenize(query), T());
        ex.pos_text = pos;
        ex.neg_text = neg;
        const auto pq = parse_quantities(pos, T());
        const auto nq = parse_quantities(neg, T());
        if (!pq.empty()) ex.pos_ann.quantity = pq.front();
        if (!nq.empty()) ex.neg_ann.quantity = nq.front();
        return ex;
    };

    std::vector<TrainExample> batch;
    // one unit-carrying triple with a random comparator
    {
        const UnitDef& u = T().unit((UnitId)rng.below((uint64_t)T().size()));
        const std::string& surf = u.surfaces[rng.below(u.surfaces.size())];
        const double t = round_sig3(std::pow(10.0, -1.0 + 3.0 * rng.unit()));
        const int cmp = (int)rng.below(3);
        const char* kw = cmp == 0 ? "exactly" : cmp == 1 ? "under" : "over";
        const double pos_v = cmp == 0 ? t : cmp == 1 ? t * 0.4 : t * 2.5;
        const double neg_v = cmp == 1 ? t * 3.0 : t * 0.4;
        const std::string c = concepts[rng.below(7)];
        batch.push_back(mk(c + " " + kw + " " + value_text(t) + " " + surf,
                           "the " + c + " reached " + value_text(pos_v) + " " + surf + " this year",
                           "the " + c + " reached " + value_text(neg_v) + " " + surf + " in march"));
    }
    // one triple rotating through percent / unitless / multiplier flavors
    switch (seed % 3) {
        case 0:
            batch.push_back(mk("growth of exactly 3.5 percent",
                               "the firm grew 3.5 percent this year",
                               "the firm grew 9 percent this year"));
            break;
        case 1:
            batch.push_back(mk("exactly 42 staffed desks",
                               "the office counted 42 desks in total",
                               "the office counted 17 desks in total"));
            break;
        default:
            batch.push_back(mk("funding over 2 million usd",
                               "the round raised 3 million usd in cash",
                               "the round raised 1 million usd in cash"));
            break;
    }
    return batch;
}

Outcome c1_gradients() {
    ModelConfig mc;
    mc.dim = 16;
    mc.feat_dim = 128;
    mc.hidden = 8;
    mc.unit_classes = T().size() + 1;

    ncb_test::FdOptions opt;
    opt.step = 1e-6;
    opt.rel_tol = 1e-5;
    // Central differences carry cancellation noise of roughly eps*|L|/step in
    // each estimate, so the absolute floor used for near-zero coordinates
    // (where relative error is meaningless) scales with 1/step: 1e-8 at the
    // unit-test step 1e-5, 1e-7 here.
    opt.abs_tol = 1e-13 / opt.step;
    opt.sample_per_block = 48;

    struct Config {
        const char* name;
        LossWeights w;
        Strategy strategy = Strategy::UnitOnly;
    };
    std::vector<Config> configs = {
        {"retrieval", LossWeights::only("ret")},
        {"contrastive/unit_only", LossWeights::only("cont"), Strategy::UnitOnly},
        {"contrastive/numeric_only", LossWeights::only("cont"), Strategy::NumericOnly},
        {"contrastive/joint", LossWeights::only("cont"), Strategy::Joint},
        {"contrastive/separate", LossWeights::only("cont"), Strategy::Separate},
        {"detection", LossWeights::only("det")},
        {"property/unit", LossWeights::only("unit")},
        {"property/mantissa", LossWeights::only("mant")},
        {"property/exponent", LossWeights::only("exp")},
        {"property/comparator", LossWeights::only("cond")},
    };

    double worst = 0.0;
    std::string worst_at = "-";
    size_t checked = 0;
    for (int b = 0; b < 10; b++) {
        const auto batch = random_fd_batch(1000 + (uint64_t)b);
        mc.seed = 100 + (uint64_t)b;
        const ModelParams params = init_model(mc);
        opt.sample_seed = 7000 + (uint64_t)b;

        auto sweep = [&](const char* name, const LossConfig& cfg, const LossWeights& w) {
            for (const auto& rep : ncb_test::fd_check(batch, params, cfg, w, T(), opt)) {
                checked += rep.checked;
                if (rep.worst_score > worst) {
                    worst = rep.worst_score;
                    worst_at = fmt("%s/%s b%d [%zu] analytic %.10e numeric %.10e", name,
                                   rep.block.c_str(), b, rep.worst_index, rep.analytic,
                                   rep.numeric);
                }
            }
        };
        for (const auto& c : configs) {
            LossConfig cfg;
            cfg.strategy = c.strategy;
            sweep(c.name, cfg, c.w);
        }
        LossConfig cfg;  // composite with default weights
        sweep("composite", cfg, LossWeights::composite(cfg));
    }
    return {worst <= 1.0,
            fmt("gradients vs central differences: %zu coordinates over 11 objectives x 10 "
                "batches, worst %.3fx tolerance at %s",
                checked, worst, worst_at.c_str())};
}

// ---------------------------------------------------------------------------
// C2: gate neutrality at tau = 1.0
// ---------------------------------------------------------------------------

Outcome c2_gate_neutrality() {
    const auto& b = small_bench();
    const auto docs = encode_corpus(b.corpus, b.params);
    GateConfig gated{1.0, true};
    GateConfig ungated{0.5, false};
    int mismatches = 0;
    for (const auto& q : b.queries) {
        const auto qe_on = encode_query(q.text, b.params, gated);
        const auto qe_off = encode_query(q.text, b.params, ungated);
        for (double p : qe_on.num_probs)
            if (!(p < 1.0)) return {false, "detector probability reached 1.0"};
        const auto r_on = brute_rank(qe_on, docs, (int)docs.size());
        const auto r_off = brute_rank(qe_off, docs, (int)docs.size());
        for (size_t i = 0; i < r_on.size(); i++) {
            if (r_on[i].first != r_off[i].first || !same_bits(r_on[i].second, r_off[i].second)) {
                mismatches++;
                break;
            }
        }
    }
    return {mismatches == 0,
            fmt("gated vs ungated rankings bitwise over %zu docs x %zu queries, %d mismatched",
                docs.size(), b.queries.size(), mismatches)};
}

// ---------------------------------------------------------------------------
// C3: index bytes independent of gate/detector parameters
// ---------------------------------------------------------------------------

std::string index_bytes(const std::vector<DocEmbeddings>& docs, const IndexConfig& cfg) {
    const auto index = build_index(docs, cfg);
    const std::string path = "/tmp/ncb_acceptance_index.bin";
    save_index(index, path);
    std::string bytes = read_file(path);
    std::remove(path.c_str());
    return bytes;
}

Outcome c3_nonintrusive_index() {
    const auto& b = small_bench();
    ModelParams scrambled = b.params;
    Rng rng(99);
    auto scramble = [&](const MlpView& v) {
        const size_t begin = (size_t)(v.w1 - scrambled.theta().data());
        const size_t end = (size_t)(v.b2 + v.out - scrambled.theta().data());
        for (size_t i = begin; i < end; i++) scrambled.theta()[i] = rng.normal();
    };
    scramble(scrambled.detector());
    scramble(scrambled.gate());

    IndexConfig cfg;
    cfg.nbits = 4;
    cfg.kmeans_iters = 4;
    const std::string a = index_bytes(encode_corpus(b.corpus, b.params), cfg);
    const std::string c = index_bytes(encode_corpus(b.corpus, scrambled), cfg);
    return {a == c && !a.empty(),
            fmt("index files under two gate/detector parameter sets: %zu vs %zu bytes, %s",
                a.size(), c.size(), a == c ? "identical" : "DIFFER")};
}

// ---------------------------------------------------------------------------
// C4: lossless mode reproduces the exact ranking
// ---------------------------------------------------------------------------

Outcome c4_lossless() {
    const auto& b = small_bench();
    const auto docs = encode_corpus(b.corpus, b.params);
    IndexConfig cfg;
    cfg.nbits = 2;  // aggressive codes; exact rows must still win
    cfg.kmeans_iters = 4;
    cfg.store_raw = true;
    const auto index = build_index(docs, cfg);
    int bad_queries = 0;
    for (const auto& q : b.queries) {
        const auto qe = encode_query(q.text, b.params, GateConfig{});
        const auto got = search(index, qe, (int)docs.size(), index.k);
        const auto want = brute_rank(qe, docs, (int)docs.size());
        bool ok = got.size() == want.size();
        for (size_t i = 0; ok && i < got.size(); i++)
            ok = got[i].first == want[i].first && same_bits(got[i].second, want[i].second);
        if (!ok) bad_queries++;
    }
    return {bad_queries == 0,
            fmt("lossless search vs brute force: full rankings over %zu docs x %zu queries, "
                "%d queries differed",
                docs.size(), b.queries.size(), bad_queries)};
}

// ---------------------------------------------------------------------------
// C5: 8-bit quantization fidelity
// ---------------------------------------------------------------------------

Outcome c5_quantization_fidelity() {
    const auto& b = medium_bench();
    if (b.corpus.size() < 10000)
        return {false, fmt("corpus too small: %zu docs", b.corpus.size())};
    IndexConfig cfg;
    cfg.k_centroids = 512;
    cfg.nbits = 8;
    cfg.kmeans_iters = 8;
    const auto index = build_index(b.docs, cfg);

    double overlap_sum = 0.0;
    Run run_q, run_raw;
    for (const auto& q : b.queries) {
        const auto qe = encode_query(q.text, b.params, GateConfig{});
        const auto got = search(index, qe, 10, index.k);
        const auto want = brute_rank(qe, b.docs, 10);
        std::set<int64_t> w;
        for (const auto& [id, s] : want) w.insert(id);
        int hits = 0;
        for (const auto& [id, s] : got) hits += w.count(id) ? 1 : 0;
        overlap_sum += (double)hits / 10.0;
        std::vector<RunEntry> eq, er;
        for (const auto& [id, s] : got) eq.push_back({id, s});
        for (const auto& [id, s] : want) er.push_back({id, s});
        run_q.emplace_back(q.qid, std::move(eq));
        run_raw.emplace_back(q.qid, std::move(er));
    }
    const double overlap = overlap_sum / (double)b.queries.size();
    const double ndcg_q = evaluate(run_q, b.qrels).overall.ndcg10;
    const double ndcg_raw = evaluate(run_raw, b.qrels).overall.ndcg10;
    const double gap = std::fabs(ndcg_q - ndcg_raw);
    return {overlap >= 0.95 && gap <= 0.01,
            fmt("8-bit codes on %zu docs: top-10 overlap %.4f (need >= 0.95), nDCG@10 %.4f vs "
                "raw %.4f (|gap| %.4f, need <= 0.01)",
                b.corpus.size(), overlap, ndcg_q, ndcg_raw, gap)};
}

// ---------------------------------------------------------------------------
// C6: size law across code widths
// ---------------------------------------------------------------------------

Outcome c6_size_law() {
    const auto& b = medium_bench();
    IndexConfig cfg;
    cfg.k_centroids = 512;
    cfg.kmeans_iters = 1;
    size_t codes[4], files[4];
    const int widths[4] = {8, 4, 2, 1};
    for (int i = 0; i < 4; i++) {
        cfg.nbits = widths[i];
        const auto index = build_index(b.docs, cfg);
        codes[i] = index.code_region_bytes();
        files[i] = index.file_bytes();
    }
    bool halves = codes[0] == 2 * codes[1] && codes[1] == 2 * codes[2] && codes[2] == 2 * codes[3];
    bool shrinks = files[0] > files[1] && files[1] > files[2] && files[2] > files[3];
    return {halves && shrinks,
            fmt("code bytes 8/4/2/1-bit: %zu %zu %zu %zu (%s), file bytes %zu %zu %zu %zu (%s)",
                codes[0], codes[1], codes[2], codes[3], halves ? "exact halving" : "NOT halving",
                files[0], files[1], files[2], files[3],
                shrinks ? "strictly decreasing" : "NOT decreasing")};
}

// ---------------------------------------------------------------------------
// C7: pruned + quantized search speedup
// ---------------------------------------------------------------------------

Outcome c7_speedup() {
    CorpusSpec spec;
    spec.n_concepts = 55;
    spec.synonyms_per_concept = 2;
    spec.values_per_pair = 22;
    spec.n_templates = 8;
    spec.seed = 44;
    auto build = generate_corpus(spec, T());
    auto queries = generate_queries(build, spec, T());
    ModelConfig mc;
    mc.dim = 16;
    mc.feat_dim = 256;
    mc.hidden = 8;
    mc.unit_classes = T().size() + 1;
    const auto params = init_model(mc);
    const auto docs = encode_corpus(build.corpus, params);

    IndexConfig cfg;
    cfg.k_centroids = 2048;
    cfg.nbits = 8;
    cfg.kmeans_iters = 6;
    const auto index = build_index(docs, cfg);
    if (index.n_tokens < 100000)
        return {false, fmt("corpus too small: %" PRId64 " tokens", index.n_tokens)};

    std::vector<QueryEmbeddings> qes;
    for (size_t i = 0; i < queries.eval.size() && qes.size() < 100; i++)
        qes.push_back(encode_query(queries.eval[i].text, params, GateConfig{}));
    for (size_t i = 0; i < queries.train.size() && qes.size() < 100; i++)
        qes.push_back(encode_query(queries.train[i].text, params, GateConfig{}));

    const auto bench = bench_search(index, docs, qes, 10, 8, 2);
    return {bench.speedup >= 10.0,
            fmt("%" PRId64 " tokens, %zu docs, k=%d: mean %.3f ms vs brute %.3f ms -> %.1fx "
                "(need >= 10x)",
                index.n_tokens, docs.size(), index.k, bench.mean_ms, bench.brute_mean_ms,
                bench.speedup)};
}

// ---------------------------------------------------------------------------
// C8/C9/C10/C13 share one training study: four configurations x three seeds
// on the 50-concept benchmark with held-out evaluation queries.
// ---------------------------------------------------------------------------

enum class Arm { Full, Ablated, NoCont, NoProp };

struct ArmRun {
    double ndcg10 = 0.0;
    ModelParams params;
};

struct Study {
    GeneratedData data;
    std::vector<TrainExample> examples;
    ModelConfig mc;
    std::map<std::pair<Arm, uint64_t>, ArmRun> runs;
    std::vector<uint64_t> seeds{1, 2, 3};
    double train_seconds = 0.0;

    double mean_ndcg(Arm a) const {
        double s = 0.0;
        for (uint64_t seed : seeds) s += runs.at({a, seed}).ndcg10;
        return s / (double)seeds.size();
    }
};

LossConfig arm_loss(Arm a) {
    LossConfig lc;  // full model defaults
    switch (a) {
        case Arm::Full: break;
        case Arm::Ablated:
            lc.gating_enabled = false;
            lc.lambda_cont = lc.lambda_det = lc.lambda_prop = 0.0;
            break;
        case Arm::NoCont: lc.lambda_cont = 0.0; break;
        case Arm::NoProp: lc.lambda_prop = 0.0; break;
    }
    return lc;
}

double eval_model(const Study& st, const ModelParams& params, bool gated) {
    const auto docs = encode_corpus(st.data.build.corpus, params);
    GateConfig gc;
    gc.enabled = gated;
    const auto run = to_run(st.data.queries.eval, [&](const GenQuery& q) {
        return brute_rank(encode_query(q.text, params, gc), docs, 100);
    });
    return evaluate(run, st.data.qrels_eval, conditions_of(st.data.queries.eval)).overall.ndcg10;
}

const Study& study() {
    static const Study st = [] {
        Study s;
        CorpusSpec spec;
        spec.n_concepts = 50;
        spec.synonyms_per_concept = 3;
        spec.values_per_pair = 8;
        spec.n_templates = 4;
        spec.triplet_cap = 16;
        spec.seed = 7;
        s.data = generate(spec, T());
        s.examples = triplets_to_examples(s.data.triplets, s.data.build.corpus, T());
        s.mc.dim = 32;
        s.mc.feat_dim = 256;
        s.mc.hidden = 16;
        s.mc.unit_classes = T().size() + 1;

        const double t0 = now_s();
        for (uint64_t seed : s.seeds) {
            for (Arm arm : {Arm::Full, Arm::Ablated, Arm::NoCont, Arm::NoProp}) {
                ModelConfig mc = s.mc;
                mc.seed = seed;
                ModelParams params = init_model(mc);
                TrainConfig tc;  // desk defaults
                tc.epochs = 5;
                tc.seed = seed;
                train(s.examples, params, tc, arm_loss(arm), T());
                ArmRun run{eval_model(s, params, arm != Arm::Ablated), std::move(params)};
                s.runs.emplace(std::make_pair(arm, seed), std::move(run));
            }
        }
        s.train_seconds = now_s() - t0;
        return s;
    }();
    return st;
}

Outcome c8_training_gap() {
    const auto& st = study();
    const double full = st.mean_ndcg(Arm::Full);
    const double ablated = st.mean_ndcg(Arm::Ablated);
    std::string per_seed;
    for (uint64_t seed : st.seeds)
        per_seed += fmt(" s%" PRIu64 ":%.3f/%.3f", seed, st.runs.at({Arm::Full, seed}).ndcg10,
                        st.runs.at({Arm::Ablated, seed}).ndcg10);
    return {full - ablated >= 0.05,
            fmt("nDCG@10 full %.4f vs ablated %.4f over 3 seeds (gap %.4f, need >= 0.05;%s; "
                "12 runs in %.0fs)",
                full, ablated, full - ablated, per_seed.c_str(), st.train_seconds)};
}

Outcome c9_ablation_order() {
    const auto& st = study();
    const double no_cont = st.mean_ndcg(Arm::NoCont);
    const double no_prop = st.mean_ndcg(Arm::NoProp);
    return {no_cont <= no_prop + 0.01,
            fmt("nDCG@10 without contrastive %.4f vs without property %.4f "
                "(need contrastive removal to hurt at least as much, slack 0.01)",
                no_cont, no_prop)};
}

Outcome c10_detector_f1() {
    const auto& st = study();
    const auto& params = st.runs.at({Arm::Full, 1}).params;
    int64_t tp = 0, fp = 0, fn = 0;
    for (const auto& q : st.data.queries.eval) {
        const auto labels = numeric_token_labels(tokenize(q.text), T());
        const auto qe = encode_query(q.text, params, GateConfig{});
        for (size_t i = 0; i < labels.size(); i++) {
            const bool pred = qe.num_probs[i] > 0.5;
            if (pred && labels[i]) tp++;
            else if (pred && !labels[i]) fp++;
            else if (!pred && labels[i]) fn++;
        }
    }
    const double precision = tp + fp ? (double)tp / (double)(tp + fp) : 0.0;
    const double recall = tp + fn ? (double)tp / (double)(tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    return {f1 >= 0.95,
            fmt("held-out token F1 %.4f (precision %.4f, recall %.4f over %" PRId64
                " positives; need >= 0.95)",
                f1, precision, recall, tp + fn)};
}

Outcome c13_embedding_separation() {
    const auto& st = study();
    const auto& trained = st.runs.at({Arm::Full, 1}).params;
    ModelConfig mc = st.mc;
    mc.seed = 1;
    const ModelParams untrained = init_model(mc);

    auto sil = [&](const ModelParams& params, std::string& note) {
        const auto rows = export_embeddings(st.data.queries.eval, params, GateConfig{}, T());
        std::vector<std::vector<double>> points;
        std::vector<int> labels;
        for (const auto& r : rows) {
            points.push_back(r.vec);
            labels.push_back((int)r.cmp);
        }
        try {
            const double v = silhouette(points, labels);
            note = fmt("%.4f over %zu tokens", v, points.size());
            return v;
        } catch (const std::exception&) {
            note = fmt("degenerate export (%zu tokens)", points.size());
            return -1.0;
        }
    };
    std::string t_note, u_note;
    const double s_trained = sil(trained, t_note);
    const double s_untrained = sil(untrained, u_note);
    return {s_trained > 0.0 && s_trained > s_untrained,
            fmt("comparator silhouette trained %s vs untrained %s (need > 0 and > untrained)",
                t_note.c_str(), u_note.c_str())};
}

// ---------------------------------------------------------------------------
// C11: metrics vs an independent in-file implementation
// ---------------------------------------------------------------------------

namespace metric_ref {

// Straightforward re-derivations, structured differently from the library:
// gains collected into arrays first, then discounted.

double dcg(const std::vector<int>& gains, int k) {
    double s = 0.0;
    for (int i = 0; i < (int)gains.size() && i < k; i++)
        s += gains[(size_t)i] / (std::log((double)i + 2.0) / std::log(2.0));
    return s;
}

double ndcg(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels, int k) {
    std::vector<int> gains;
    for (const auto& e : ranking) {
        auto it = rels.find(e.doc_id);
        gains.push_back(it != rels.end() && it->second > 0 ? 1 : 0);
    }
    int total = 0;
    for (const auto& [doc, g] : rels) total += g > 0 ? 1 : 0;
    if (total == 0) return 0.0;
    std::vector<int> ideal((size_t)std::min(total, k), 1);
    return dcg(gains, k) / dcg(ideal, k);
}

double mrr(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels, int k) {
    for (int i = 0; i < (int)ranking.size() && i < k; i++) {
        auto it = rels.find(ranking[(size_t)i].doc_id);
        if (it != rels.end() && it->second > 0) return 1.0 / ((double)i + 1.0);
    }
    return 0.0;
}

double precision(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels, int k) {
    int hits = 0;
    for (int i = 0; i < (int)ranking.size() && i < k; i++) {
        auto it = rels.find(ranking[(size_t)i].doc_id);
        hits += it != rels.end() && it->second > 0 ? 1 : 0;
    }
    return (double)hits / (double)k;
}

double recall(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels, int k) {
    int total = 0;
    for (const auto& [doc, g] : rels) total += g > 0 ? 1 : 0;
    if (total == 0) return 0.0;
    int hits = 0;
    for (int i = 0; i < (int)ranking.size() && i < k; i++) {
        auto it = rels.find(ranking[(size_t)i].doc_id);
        hits += it != rels.end() && it->second > 0 ? 1 : 0;
    }
    return (double)hits / (double)total;
}

}  // namespace metric_ref

Outcome c11_metric_oracle() {
    Rng rng(4242);
    double worst = 0.0;
    for (int trial = 0; trial < 500; trial++) {
        const int n = 1 + (int)rng.below(40);
        std::vector<RunEntry> ranking;
        std::vector<int64_t> ids(64);
        for (int i = 0; i < 64; i++) ids[(size_t)i] = i;
        rng.shuffle(ids);
        double score = 100.0;
        for (int i = 0; i < n; i++) {
            score -= rng.unit();
            ranking.push_back({ids[(size_t)i], score});
        }
        std::map<int64_t, int> rels;
        for (int i = 0; i < 64; i++)
            if (rng.unit() < 0.25) rels[i] = 1;
        for (int k : {1, 5, 10, 100}) {
            worst = std::max(worst, std::fabs(ndcg_at_k(ranking, rels, k) -
                                              metric_ref::ndcg(ranking, rels, k)));
            worst = std::max(worst, std::fabs(mrr_at_k(ranking, rels, k) -
                                              metric_ref::mrr(ranking, rels, k)));
            worst = std::max(worst, std::fabs(precision_at_k(ranking, rels, k) -
                                              metric_ref::precision(ranking, rels, k)));
            worst = std::max(worst, std::fabs(recall_at_k(ranking, rels, k) -
                                              metric_ref::recall(ranking, rels, k)));
        }
    }

    // Hand-checked three-document case: gains (0,1,1), two relevant in total.
    const std::vector<RunEntry> ranking = {{10, 3.0}, {11, 2.0}, {12, 1.0}};
    const std::map<int64_t, int> rels = {{11, 1}, {12, 1}};
    const double got = ndcg_at_k(ranking, rels, 10);
    const double want =
        (1.0 / std::log2(3.0) + 1.0 / std::log2(4.0)) / (1.0 + 1.0 / std::log2(3.0));
    const bool hand_ok = same_bits(got, want) && std::fabs(got - 0.6934) < 5e-5;
    return {worst < 1e-9 && hand_ok,
            fmt("500 random instances x 4 metrics x 4 cutoffs, worst |diff| %.2e (need < 1e-9); "
                "hand case %.6f vs %.6f %s",
                worst, got, want, hand_ok ? "bitwise equal" : "MISMATCH")};
}

// ---------------------------------------------------------------------------
// C12: quantity comparison semantics
// ---------------------------------------------------------------------------

CondCheck ref_satisfies(double v, std::optional<UnitId> vu, double t, Cmp cmp,
                        std::optional<UnitId> cu) {
    double x;
    if (!vu && !cu) {
        x = v;
    } else if (!vu || !cu) {
        return CondCheck::Incomparable;
    } else {
        const UnitDef& a = T().unit(*vu);
        const UnitDef& b = T().unit(*cu);
        if (a.dimension != b.dimension) return CondCheck::Incomparable;
        x = v * (a.to_base / b.to_base);
    }
    bool ok;
    if (cmp == Cmp::GT) ok = x > t;
    else if (cmp == Cmp::LT) ok = x < t;
    else ok = std::fabs(x - t) <= 1e-9 * std::max(std::fabs(t), 1.0);
    return ok ? CondCheck::Satisfied : CondCheck::Violated;
}

Outcome c12_quantity_semantics() {
    const UnitId gb = *T().find_id("gb");
    const UnitId tb = *T().find_id("tb");
    const UnitId mbps = *T().find_id("mbps");
    auto check = [&](double v, std::optional<UnitId> vu, Cmp cmp, double t,
                     std::optional<UnitId> cu) {
        Quantity q{v, vu, 0, 0};
        NumericalCondition c{t, cmp, cu};
        return satisfies(q, c, T());
    };

    // Truth table: document value below / at / above the threshold, one row
    // per comparator, same unit on both sides.
    const Cmp cmps[3] = {Cmp::LT, Cmp::EQ, Cmp::GT};
    const double vals[3] = {400.0, 500.0, 600.0};
    const CondCheck want[3][3] = {
        {CondCheck::Satisfied, CondCheck::Violated, CondCheck::Violated},
        {CondCheck::Violated, CondCheck::Satisfied, CondCheck::Violated},
        {CondCheck::Violated, CondCheck::Violated, CondCheck::Satisfied},
    };
    int table_bad = 0;
    for (int r = 0; r < 3; r++)
        for (int c = 0; c < 3; c++)
            if (check(vals[c], gb, cmps[r], 500.0, gb) != want[r][c]) table_bad++;

    // Cross-unit conversion and cross-dimension incomparability.
    const bool conv_ok =
        check(1.0, tb, Cmp::GT, 500.0, gb) == CondCheck::Satisfied &&
        check(1000.0, gb, Cmp::EQ, 1.0, tb) == CondCheck::Satisfied &&
        convert(Quantity{2.0, tb, 0, 0}, gb, T())->value == 2000.0;
    const bool incomp_ok = check(1.0, mbps, Cmp::GT, 500.0, gb) == CondCheck::Incomparable &&
                           check(1e6, mbps, Cmp::LT, 1.0, gb) == CondCheck::Incomparable;

    // Random sweep against the in-file reference.
    Rng rng(777);
    int sweep_bad = 0;
    for (int i = 0; i < 10000; i++) {
        const double v = std::pow(10.0, -3.0 + 9.0 * rng.unit());
        const double t = std::pow(10.0, -3.0 + 9.0 * rng.unit());
        const Cmp cmp = cmps[rng.below(3)];
        std::optional<UnitId> vu, cu;
        if (rng.unit() < 0.9) vu = (UnitId)rng.below((uint64_t)T().size());
        if (rng.unit() < 0.9) cu = (UnitId)rng.below((uint64_t)T().size());
        if (check(v, vu, cmp, t, cu) != ref_satisfies(v, vu, t, cmp, cu)) sweep_bad++;
    }
    return {table_bad == 0 && conv_ok && incomp_ok && sweep_bad == 0,
            fmt("truth table %d/9 wrong, conversions %s, cross-dimension %s, random sweep "
                "%d/10000 wrong",
                table_bad, conv_ok ? "ok" : "BAD", incomp_ok ? "ok" : "BAD", sweep_bad)};
}

// ---------------------------------------------------------------------------

struct Criterion {
    const char* id;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"C1", c1_gradients},
    {"C2", c2_gate_neutrality},
    {"C3", c3_nonintrusive_index},
    {"C4", c4_lossless},
    {"C5", c5_quantization_fidelity},
    {"C6", c6_size_law},
    {"C7", c7_speedup},
    {"C8", c8_training_gap},
    {"C9", c9_ablation_order},
    {"C10", c10_detector_f1},
    {"C11", c11_metric_oracle},
    {"C12", c12_quantity_semantics},
    {"C13", c13_embedding_separation},
};

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> want;
    for (int i = 1; i < argc; i++) want.insert(argv[i]);
    int failures = 0;
    for (const auto& c : kCriteria) {
        if (!want.empty() && !want.count(c.id)) continue;
        const double t0 = now_s();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, fmt("exception: %s", e.what())};
        }
        std::printf("%-4s %s  %s (%.1fs)\n", c.id, out.pass ? "PASS" : "FAIL",
                    out.detail.c_str(), now_s() - t0);
        std::fflush(stdout);
        if (!out.pass) failures++;
    }
    return failures;
}
