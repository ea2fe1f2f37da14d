#include "ncb/formats.hpp"

#include <cinttypes>
#include <sstream>

#include "json.hpp"

namespace ncb {

namespace {

using nlohmann::json;

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        if (nl > start) lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

json parse_line(const std::string& line, const std::string& what) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw format_error(what + ": malformed JSON line: " + line);
    return j;
}

UnitId require_unit(const json& j, const UnitTable& table, const std::string& what) {
    std::string u = j.at("unit").get<std::string>();
    auto id = table.find_id(u);
    if (!id) throw format_error(what + ": unknown unit '" + u + "'");
    return *id;
}

}  // namespace

void write_corpus_jsonl(const std::string& path, const std::vector<Sentence>& corpus,
                        const UnitTable& table) {
    std::string out;
    for (const auto& s : corpus) {
        if (!s.quantity.unit) throw format_error("write_corpus_jsonl: sentence without unit");
        json j;
        j["id"] = s.id;
        j["text"] = s.text;
        j["concept"] = s.concept_name;
        j["value"] = s.quantity.value;
        j["unit"] = table.unit(*s.quantity.unit).id;
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::vector<Sentence> read_corpus_jsonl(const std::string& path, const UnitTable& table) {
    std::vector<Sentence> out;
    for (const auto& line : split_lines(read_file(path))) {
        json j = parse_line(line, "corpus");
        Sentence s;
        s.id = j.at("id").get<int64_t>();
        s.text = j.at("text").get<std::string>();
        s.concept_name = j.at("concept").get<std::string>();
        s.quantity.value = j.at("value").get<double>();
        s.quantity.unit = require_unit(j, table, "corpus");
        out.push_back(std::move(s));
    }
    return out;
}

void write_queries_jsonl(const std::string& path, const std::vector<GenQuery>& queries,
                         const UnitTable& table) {
    std::string out;
    for (const auto& q : queries) {
        if (!q.cond.unit) throw format_error("write_queries_jsonl: query without unit");
        json j;
        j["qid"] = q.qid;
        j["text"] = q.text;
        j["value"] = q.cond.value;
        j["cmp"] = cmp_name(q.cond.cmp);
        j["unit"] = table.unit(*q.cond.unit).id;
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::vector<GenQuery> read_queries_jsonl(const std::string& path, const UnitTable& table) {
    std::vector<GenQuery> out;
    for (const auto& line : split_lines(read_file(path))) {
        json j = parse_line(line, "queries");
        GenQuery q;
        q.qid = j.at("qid").get<int64_t>();
        q.text = j.at("text").get<std::string>();
        q.cond.value = j.at("value").get<double>();
        auto cmp = cmp_from_name(j.at("cmp").get<std::string>());
        if (!cmp) throw format_error("queries: bad cmp in line: " + line);
        q.cond.cmp = *cmp;
        q.cond.unit = require_unit(j, table, "queries");
        out.push_back(std::move(q));
    }
    return out;
}

void write_qrels(const std::string& path, const Qrels& qrels) {
    std::string out;
    char buf[96];
    for (const auto& [qid, row] : qrels) {
        for (const auto& [doc, grade] : row) {
            if (grade <= 0) continue;
            std::snprintf(buf, sizeof buf, "%" PRId64 " 0 %" PRId64 " %d\n", qid, doc, grade);
            out += buf;
        }
    }
    write_file(path, out);
}

Qrels read_qrels(const std::string& path) {
    Qrels out;
    for (const auto& line : split_lines(read_file(path))) {
        std::istringstream is(line);
        int64_t qid, doc;
        std::string zero;
        int grade;
        if (!(is >> qid >> zero >> doc >> grade))
            throw format_error("qrels: malformed line: " + line);
        if (grade > 0) out[qid][doc] = grade;
    }
    return out;
}

void write_triplets_tsv(const std::string& path, const std::vector<TripletRow>& triplets) {
    std::string out;
    for (const auto& t : triplets) {
        if (t.query_text.find('\t') != std::string::npos ||
            t.query_text.find('\n') != std::string::npos)
            throw format_error("triplets: query text contains a separator");
        out += t.query_text;
        out += '\t';
        out += std::to_string(t.pos_id);
        out += '\t';
        out += std::to_string(t.neg_id);
        out += '\t';
        out += t.provenance;
        out += '\n';
    }
    write_file(path, out);
}

std::vector<TripletRow> read_triplets_tsv(const std::string& path) {
    std::vector<TripletRow> out;
    for (const auto& line : split_lines(read_file(path))) {
        TripletRow t;
        size_t a = line.find('\t');
        size_t b = a == std::string::npos ? a : line.find('\t', a + 1);
        size_t c = b == std::string::npos ? b : line.find('\t', b + 1);
        if (c == std::string::npos) throw format_error("triplets: malformed line: " + line);
        t.query_text = line.substr(0, a);
        try {
            t.pos_id = std::stoll(line.substr(a + 1, b - a - 1));
            t.neg_id = std::stoll(line.substr(b + 1, c - b - 1));
        } catch (const std::exception&) {
            throw format_error("triplets: bad id in line: " + line);
        }
        t.provenance = line.substr(c + 1);
        out.push_back(std::move(t));
    }
    return out;
}

void write_run(const std::string& path, const Run& run, const std::string& tag) {
    std::string out;
    for (const auto& [qid, ranked] : run) {
        double prev = 0.0;
        for (size_t r = 0; r < ranked.size(); r++) {
            if (r > 0 && ranked[r].score > prev)
                throw format_error("run: scores increase within a query");
            prev = ranked[r].score;
            out += std::to_string(qid);
            out += " Q0 ";
            out += std::to_string(ranked[r].doc_id);
            out += ' ';
            out += std::to_string(r + 1);
            out += ' ';
            out += format_double(ranked[r].score);
            out += ' ';
            out += tag;
            out += '\n';
        }
    }
    write_file(path, out);
}

Run read_run(const std::string& path) {
    Run run;
    int64_t cur_qid = -1;
    std::vector<RunEntry>* cur = nullptr;
    std::vector<bool> dummy;
    std::set<int64_t> seen_qids;
    std::set<int64_t> seen_docs;
    size_t expect_rank = 1;
    double prev_score = 0.0;

    for (const auto& line : split_lines(read_file(path))) {
        std::istringstream is(line);
        int64_t qid, doc;
        std::string q0, tag;
        size_t rank;
        double score;
        if (!(is >> qid >> q0 >> doc >> rank >> score >> tag) || q0 != "Q0")
            throw format_error("run: malformed line: " + line);
        if (qid != cur_qid) {
            if (seen_qids.count(qid)) throw format_error("run: query id repeats non-contiguously");
            seen_qids.insert(qid);
            run.emplace_back(qid, std::vector<RunEntry>{});
            cur = &run.back().second;
            cur_qid = qid;
            seen_docs.clear();
            expect_rank = 1;
        }
        if (rank != expect_rank) throw format_error("run: ranks not contiguous from 1");
        if (expect_rank > 1 && score > prev_score)
            throw format_error("run: scores increase within a query");
        if (!seen_docs.insert(doc).second)
            throw format_error("run: duplicate doc id within a query");
        cur->push_back({doc, score});
        expect_rank += 1;
        prev_score = score;
    }
    return run;
}

}  // namespace ncb
