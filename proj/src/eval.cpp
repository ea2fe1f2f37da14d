#include "ncb/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace ncb {

namespace {

int count_relevant(const std::map<int64_t, int>& rels) {
    int n = 0;
    for (const auto& [doc, grade] : rels) n += grade > 0;
    return n;
}

bool is_relevant(const std::map<int64_t, int>& rels, int64_t doc) {
    auto it = rels.find(doc);
    return it != rels.end() && it->second > 0;
}

double now_ms() {
    return (double)std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
               .count() *
           1e-6;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void append_slice(std::string& out, const char* name, const SliceStats& s, bool csv) {
    char buf[160];
    if (csv)
        std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f,%.6f,%.6f\n", name, s.n, s.ndcg10, s.mrr10,
                      s.p10, s.r100);
    else
        std::snprintf(buf, sizeof buf, "%-8s %6d %10.4f %10.4f %10.4f %10.4f\n", name, s.n,
                      s.ndcg10, s.mrr10, s.p10, s.r100);
    out += buf;
}

}  // namespace

double ndcg_at_k(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels,
                 int k) {
    const int total = count_relevant(rels);
    if (total == 0) return 0.0;
    double dcg = 0.0;
    const int depth = std::min<int>(k, (int)ranking.size());
    for (int r = 0; r < depth; r++)
        if (is_relevant(rels, ranking[(size_t)r].doc_id)) dcg += 1.0 / std::log2(r + 2.0);
    double idcg = 0.0;
    for (int r = 0; r < std::min(k, total); r++) idcg += 1.0 / std::log2(r + 2.0);
    return dcg / idcg;
}

double mrr_at_k(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels, int k) {
    const int depth = std::min<int>(k, (int)ranking.size());
    for (int r = 0; r < depth; r++)
        if (is_relevant(rels, ranking[(size_t)r].doc_id)) return 1.0 / (r + 1.0);
    return 0.0;
}

double precision_at_k(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels,
                      int k) {
    const int depth = std::min<int>(k, (int)ranking.size());
    int hits = 0;
    for (int r = 0; r < depth; r++) hits += is_relevant(rels, ranking[(size_t)r].doc_id);
    return (double)hits / (double)k;
}

double recall_at_k(const std::vector<RunEntry>& ranking, const std::map<int64_t, int>& rels,
                   int k) {
    const int total = count_relevant(rels);
    if (total == 0) return 0.0;
    const int depth = std::min<int>(k, (int)ranking.size());
    int hits = 0;
    for (int r = 0; r < depth; r++) hits += is_relevant(rels, ranking[(size_t)r].doc_id);
    return (double)hits / (double)total;
}

MetricReport evaluate(const Run& run, const Qrels& qrels,
                      const std::map<int64_t, Cmp>& conditions) {
    std::map<int64_t, const std::vector<RunEntry>*> by_qid;
    for (const auto& [qid, entries] : run) by_qid[qid] = &entries;

    std::set<int64_t> universe;
    for (const auto& [qid, rels] : qrels) universe.insert(qid);
    for (const auto& [qid, cmp] : conditions) universe.insert(qid);

    MetricReport report;
    static const std::vector<RunEntry> kEmpty;
    for (int64_t qid : universe) {
        auto qit = qrels.find(qid);
        if (qit == qrels.end() || count_relevant(qit->second) == 0) {
            report.skipped++;  // nothing relevant: excluded from every mean
            continue;
        }
        auto rit = by_qid.find(qid);
        const auto& ranking = rit == by_qid.end() ? kEmpty : *rit->second;
        const double nd = ndcg_at_k(ranking, qit->second, 10);
        const double mr = mrr_at_k(ranking, qit->second, 10);
        const double pr = precision_at_k(ranking, qit->second, 10);
        const double rc = recall_at_k(ranking, qit->second, 100);
        auto add = [&](SliceStats& s) {
            s.n++;
            s.ndcg10 += nd;
            s.mrr10 += mr;
            s.p10 += pr;
            s.r100 += rc;
        };
        add(report.overall);
        auto cit = conditions.find(qid);
        if (cit != conditions.end()) add(report.by_cmp[cit->second]);
    }
    auto finish = [](SliceStats& s) {
        if (s.n == 0) return;
        s.ndcg10 /= s.n;
        s.mrr10 /= s.n;
        s.p10 /= s.n;
        s.r100 /= s.n;
    };
    finish(report.overall);
    for (auto& [cmp, s] : report.by_cmp) finish(s);
    return report;
}

std::string report_table(const MetricReport& report) {
    std::string out = "slice         n    ndcg@10     mrr@10       p@10      r@100\n";
    append_slice(out, "all", report.overall, false);
    for (const auto& [cmp, s] : report.by_cmp) append_slice(out, cmp_name(cmp), s, false);
    if (report.skipped) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "(%d queries without relevant documents excluded)\n",
                      report.skipped);
        out += buf;
    }
    return out;
}

std::string report_csv(const MetricReport& report) {
    std::string out = "slice,n,ndcg10,mrr10,p10,r100\n";
    append_slice(out, "all", report.overall, true);
    for (const auto& [cmp, s] : report.by_cmp) append_slice(out, cmp_name(cmp), s, true);
    return out;
}

BenchResult bench_search(const CompressedIndex& index, const std::vector<DocEmbeddings>& corpus,
                         const std::vector<QueryEmbeddings>& queries, int top_k, int nprobe,
                         int warmup) {
    if (queries.empty()) throw data_error("bench_search: no queries");
    BenchResult res;
    res.n_queries = (int)queries.size();
    res.index_bytes = index.file_bytes();
    res.code_bytes = index.code_region_bytes();

    for (int w = 0; w < warmup; w++)
        (void)search(index, queries[(size_t)(w % queries.size())], top_k, nprobe);

    std::vector<double> lat, blat;
    double sink = 0.0;
    for (const auto& q : queries) {
        const double t0 = now_ms();
        auto hits = search(index, q, top_k, nprobe);
        lat.push_back(now_ms() - t0);
        if (!hits.empty()) sink += hits[0].second;
    }
    for (const auto& q : queries) {
        const double t0 = now_ms();
        double best = 0.0;
        for (const auto& doc : corpus) best = std::max(best, maxsim(q.e, doc.e).value);
        blat.push_back(now_ms() - t0);
        sink += best;
    }
    if (!std::isfinite(sink)) throw data_error("bench_search: non-finite scores");

    for (double v : lat) res.mean_ms += v;
    res.mean_ms /= (double)lat.size();
    for (double v : blat) res.brute_mean_ms += v;
    res.brute_mean_ms /= (double)blat.size();
    res.median_ms = median(lat);
    res.brute_median_ms = median(blat);
    res.speedup = res.mean_ms > 0.0 ? res.brute_mean_ms / res.mean_ms : 0.0;
    return res;
}

std::vector<ExportRow> export_embeddings(const std::vector<GenQuery>& queries,
                                         const ModelParams& params, const GateConfig& gate_cfg,
                                         const UnitTable& table) {
    std::vector<ExportRow> rows;
    for (const auto& q : queries) {
        auto cond = parse_condition(q.text, table);
        if (!cond) continue;  // nothing to label the tokens with
        const QueryEmbeddings enc = encode_query(q.text, params, gate_cfg);
        for (size_t i = 0; i < enc.tokens.size(); i++) {
            if (enc.num_probs[i] <= gate_cfg.tau) continue;  // not detector-flagged
            ExportRow row;
            row.qid = q.qid;
            row.token = enc.tokens[i];
            row.cmp = cond->cmp;
            row.vec.assign(enc.e_pre.row((int)i), enc.e_pre.row((int)i) + enc.e_pre.cols);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_export_csv(const std::string& path, const std::vector<ExportRow>& rows) {
    std::string out = "qid,token,cmp";
    const int d = rows.empty() ? 0 : (int)rows[0].vec.size();
    for (int j = 0; j < d; j++) out += ",e" + std::to_string(j);
    out += "\n";
    for (const auto& row : rows) {
        char head[96];
        std::snprintf(head, sizeof head, "%" PRId64 ",%s,%s", row.qid, row.token.c_str(),
                      cmp_name(row.cmp));
        out += head;
        for (double v : row.vec) {
            out += ',';
            out += format_double(v);
        }
        out += "\n";
    }
    write_file(path, out);
}

double silhouette(const std::vector<std::vector<double>>& points, const std::vector<int>& labels) {
    const size_t n = points.size();
    if (n != labels.size() || n < 2) throw data_error("silhouette: bad input");
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw data_error("silhouette: needs at least two clusters");

    auto dist = [&](size_t a, size_t b) {
        double s = 0.0;
        for (size_t j = 0; j < points[a].size(); j++) {
            const double t = points[a][j] - points[b][j];
            s += t * t;
        }
        return std::sqrt(s);
    };

    double total = 0.0;
    for (size_t i = 0; i < n; i++) {
        std::map<int, std::pair<double, int>> sums;  // label -> (sum dist, count)
        for (size_t j = 0; j < n; j++) {
            if (j == i) continue;
            auto& [sum, cnt] = sums[labels[j]];
            sum += dist(i, j);
            cnt++;
        }
        auto own = sums.find(labels[i]);
        if (own == sums.end()) continue;  // singleton cluster: s(i) = 0
        const double a = own->second.first / own->second.second;
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [lab, sc] : sums)
            if (lab != labels[i]) b = std::min(b, sc.first / sc.second);
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / (double)n;
}

}  // namespace ncb
