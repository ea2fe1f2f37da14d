// Python bindings for the numcolbert core: quantity parsing, the gated
// encoder, MaxSim scoring, and the file-level pipeline (generate -> train ->
// index -> search -> evaluate -> export). Matrices cross the boundary as
// nested lists of floats; units and comparators as strings.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "ncb/pipeline.hpp"

namespace py = pybind11;
using namespace ncb;

namespace {

const UnitTable& table() { return UnitTable::builtin(); }

Mat to_mat(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw data_error("matrix needs at least one row");
    const size_t cols = rows[0].size();
    if (cols == 0) throw data_error("matrix rows must be non-empty");
    Mat m(static_cast<int>(rows.size()), static_cast<int>(cols));
    for (size_t i = 0; i < rows.size(); i++) {
        if (rows[i].size() != cols) throw data_error("matrix rows must all have the same length");
        std::copy(rows[i].begin(), rows[i].end(), m.row(static_cast<int>(i)));
    }
    return m;
}

std::vector<std::vector<double>> from_mat(const Mat& m) {
    std::vector<std::vector<double>> out(static_cast<size_t>(m.rows));
    for (int i = 0; i < m.rows; i++) out[static_cast<size_t>(i)].assign(m.row(i), m.row(i) + m.cols);
    return out;
}

py::object unit_name(const std::optional<UnitId>& u) {
    if (!u) return py::none();
    return py::str(table().unit(*u).id);
}

std::optional<UnitId> unit_from_name(const std::optional<std::string>& name) {
    if (!name) return std::nullopt;
    const auto id = table().find_id(*name);
    if (!id) throw data_error("unknown unit: " + *name);
    return id;
}

Cmp cmp_from(const std::string& s) {
    const auto c = cmp_from_name(s);
    if (!c) throw data_error("unknown comparator (want EQ/LT/GT): " + s);
    return *c;
}

py::dict slice_dict(const SliceStats& s) {
    py::dict d;
    d["n"] = s.n;
    d["ndcg10"] = s.ndcg10;
    d["mrr10"] = s.mrr10;
    d["p10"] = s.p10;
    d["r100"] = s.r100;
    return d;
}

py::dict report_dict(const MetricReport& r) {
    py::dict d;
    d["overall"] = slice_dict(r.overall);
    py::dict by;
    for (const auto& [cmp, st] : r.by_cmp) by[cmp_name(cmp)] = slice_dict(st);
    d["by_cmp"] = by;
    d["skipped"] = r.skipped;
    return d;
}

py::list run_list(const Run& run) {
    py::list out;
    for (const auto& [qid, ranking] : run) {
        py::list hits;
        for (const auto& e : ranking) hits.append(py::make_tuple(e.doc_id, e.score));
        out.append(py::make_tuple(qid, hits));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_ncb, m) {
    m.doc() = "quantity-aware late-interaction retrieval core";
    m.attr("__version__") = "0.1.0";

    py::register_exception<data_error>(m, "DataError", PyExc_ValueError);
    py::register_exception<format_error>(m, "FormatError", PyExc_ValueError);

    // ---- quantities --------------------------------------------------------
    m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"),
          "Lowercased word/number/percent tokens.");

    m.def("parse_number", [](const std::string& token) { return parse_number(token); },
          py::arg("token"), "Numeric value of one token, or None.");

    m.def(
        "parse_quantities",
        [](const std::string& text) {
            py::list out;
            for (const auto& q : parse_quantities(text, table())) {
                py::dict d;
                d["value"] = q.value;
                d["unit"] = unit_name(q.unit);
                d["span"] = py::make_tuple(q.span_begin, q.span_end);
                out.append(d);
            }
            return out;
        },
        py::arg("text"), "All quantity mentions: value, unit name (or None), token span.");

    m.def(
        "parse_condition",
        [](const std::string& text) -> py::object {
            const auto cond = parse_condition(text, table());
            if (!cond) return py::none();
            py::dict d;
            d["value"] = cond->value;
            d["cmp"] = cmp_name(cond->cmp);
            d["unit"] = unit_name(cond->unit);
            return d;
        },
        py::arg("text"), "Query condition {value, cmp, unit} or None.");

    m.def(
        "satisfies",
        [](double value, const std::optional<std::string>& unit, const std::string& cmp,
           double threshold, const std::optional<std::string>& cond_unit, double eq_tol) {
            Quantity q;
            q.value = value;
            q.unit = unit_from_name(unit);
            NumericalCondition c;
            c.value = threshold;
            c.cmp = cmp_from(cmp);
            c.unit = unit_from_name(cond_unit);
            switch (satisfies(q, c, table(), eq_tol)) {
                case CondCheck::Satisfied: return "Satisfied";
                case CondCheck::Violated: return "Violated";
                default: return "Incomparable";
            }
        },
        py::arg("value"), py::arg("unit"), py::arg("cmp"), py::arg("threshold"),
        py::arg("cond_unit"), py::arg("eq_tol") = 1e-9,
        "Checks one document quantity against a condition; converts across "
        "compatible units. Returns 'Satisfied'/'Violated'/'Incomparable'.");

    m.def(
        "convert_units",
        [](double value, const std::string& from_unit, const std::string& to_unit) -> py::object {
            const auto f = table().factor(*unit_from_name(from_unit), *unit_from_name(to_unit));
            if (!f) return py::none();
            return py::float_(value * *f);
        },
        py::arg("value"), py::arg("from_unit"), py::arg("to_unit"),
        "Converted value, or None across dimensions.");

    m.def("format_double", [](double v) { return format_double(v); }, py::arg("v"),
          "Shortest round-trip decimal rendering.");

    m.def(
        "to_scientific",
        [](double v) {
            const auto s = to_scientific(v);
            return py::make_tuple(s.mantissa, s.exponent, s.sign);
        },
        py::arg("v"), "(mantissa, exponent, sign) with mantissa in [1, 10).");

    m.def("unit_table_tsv", [] { return table().to_tsv(); },
          "Built-in unit table as TSV (unit, dimension, factor, surfaces).");

    // ---- model -------------------------------------------------------------
    py::class_<ModelParams>(m, "Model", "Trainable encoder parameters.")
        .def_static(
            "init",
            [](int dim, int feat_dim, int hidden, int unit_classes, uint64_t seed) {
                ModelConfig cfg;
                cfg.dim = dim;
                cfg.feat_dim = feat_dim;
                cfg.hidden = hidden;
                cfg.unit_classes = unit_classes > 0 ? unit_classes : table().size() + 1;
                cfg.seed = seed;
                return init_model(cfg);
            },
            py::arg("dim") = 64, py::arg("feat_dim") = 512, py::arg("hidden") = 32,
            py::arg("unit_classes") = 0, py::arg("seed") = 17,
            "Fresh Gaussian-initialized parameters (unit_classes 0: table size + 1).")
        .def_static("load", &ModelParams::load, py::arg("path"))
        .def("save", &ModelParams::save, py::arg("path"))
        .def_property_readonly("dim", [](const ModelParams& p) { return p.config().dim; })
        .def_property_readonly("n_params",
                               [](const ModelParams& p) { return p.theta().size(); })
        .def(
            "encode_document",
            [](const ModelParams& p, const std::string& text) {
                const auto d = encode_document(text, p);
                py::dict out;
                out["tokens"] = d.tokens;
                out["e"] = from_mat(d.e);
                return out;
            },
            py::arg("text"), "Gate-free document rows: {tokens, e}.")
        .def(
            "encode_query",
            [](const ModelParams& p, const std::string& text, double tau, bool gated,
               const std::optional<std::vector<uint8_t>>& labels) {
                GateConfig gc;
                gc.tau = tau;
                gc.enabled = gated;
                const auto q = encode_query(text, p, gc, labels ? &*labels : nullptr);
                py::dict out;
                out["tokens"] = q.tokens;
                out["e"] = from_mat(q.e);
                out["e_pre"] = from_mat(q.e_pre);
                out["num_probs"] = q.num_probs;
                out["gates"] = q.gates;
                out["numeric_mask"] = q.numeric_mask;
                return out;
            },
            py::arg("text"), py::arg("tau") = 0.5, py::arg("gated") = true,
            py::arg("labels") = py::none(),
            "Gated query rows plus detector probabilities and the routing mask.");

    m.def(
        "maxsim",
        [](const std::vector<std::vector<double>>& q, const std::vector<std::vector<double>>& d) {
            const auto s = maxsim(to_mat(q), to_mat(d));
            py::dict out;
            out["score"] = s.value;
            out["per_token_argmax"] = s.per_token_argmax;
            out["per_token_max"] = s.per_token_max;
            return out;
        },
        py::arg("query_rows"), py::arg("doc_rows"),
        "Sum over query rows of the max dot product against document rows.");

    // ---- pipeline ----------------------------------------------------------
    m.def(
        "gen_data",
        [](const std::string& out_dir, int concepts, int synonyms, int values, int templates,
           double held_out, int triplet_cap, uint64_t seed) {
            CorpusSpec spec;
            spec.n_concepts = concepts;
            spec.synonyms_per_concept = synonyms;
            spec.values_per_pair = values;
            spec.n_templates = templates;
            spec.held_out_fraction = held_out;
            spec.triplet_cap = triplet_cap;
            spec.seed = seed;
            const auto s = gen_data_to_dir(spec, out_dir, table());
            py::dict d;
            d["sentences"] = s.sentences;
            d["train_queries"] = s.train_queries;
            d["eval_queries"] = s.eval_queries;
            d["triplets"] = s.triplets;
            return d;
        },
        py::arg("out_dir"), py::arg("concepts") = 50, py::arg("synonyms") = 3,
        py::arg("values") = 40, py::arg("templates") = 8, py::arg("held_out") = 0.20,
        py::arg("triplet_cap") = 64, py::arg("seed") = 7,
        "Writes corpus.jsonl, queries_*.jsonl, qrels_*.txt, triplets.tsv.");

    m.def(
        "train",
        [](const std::string& data_dir, const std::string& out_checkpoint,
           const std::string& preset, std::optional<double> lr, std::optional<int> epochs,
           std::optional<int> batch_size, std::optional<uint64_t> seed, int dim, int feat_dim,
           int hidden, double lambda_cont, double lambda_det, double lambda_prop,
           const std::string& strategy, bool gating_enabled, double gate_tau,
           const std::string& log_csv) {
            TrainConfig tc;
            if (preset == "desk")
                tc = TrainConfig::desk_preset();
            else if (preset == "paper")
                tc = TrainConfig::paper_preset();
            else
                throw data_error("unknown preset (want desk/paper): " + preset);
            if (lr) tc.lr = *lr;
            if (epochs) tc.epochs = *epochs;
            if (batch_size) tc.batch_size = *batch_size;
            if (seed) tc.seed = *seed;
            ModelConfig mc;
            mc.dim = dim;
            mc.feat_dim = feat_dim;
            mc.hidden = hidden;
            mc.unit_classes = table().size() + 1;
            LossConfig lc;
            lc.lambda_cont = lambda_cont;
            lc.lambda_det = lambda_det;
            lc.lambda_prop = lambda_prop;
            const auto st = strategy_from_name(strategy);
            if (!st) throw data_error("unknown strategy: " + strategy);
            lc.strategy = *st;
            lc.gating_enabled = gating_enabled;
            lc.gate_tau = gate_tau;
            const auto r = train_from_dir(data_dir, mc, tc, lc, table(), out_checkpoint, log_csv);
            py::dict d;
            d["steps"] = r.steps;
            d["epoch_first_mean"] = r.epoch_first_mean;
            d["epoch_final_mean"] = r.epoch_final_mean;
            return d;
        },
        py::arg("data_dir"), py::arg("out_checkpoint"), py::arg("preset") = "desk",
        py::arg("lr") = py::none(), py::arg("epochs") = py::none(),
        py::arg("batch_size") = py::none(), py::arg("seed") = py::none(), py::arg("dim") = 64,
        py::arg("feat_dim") = 512, py::arg("hidden") = 32, py::arg("lambda_cont") = 0.05,
        py::arg("lambda_det") = 0.05, py::arg("lambda_prop") = 0.05,
        py::arg("strategy") = "unit_only", py::arg("gating_enabled") = true,
        py::arg("gate_tau") = 0.5, py::arg("log_csv") = "",
        "Trains on <data_dir>/corpus.jsonl + triplets.tsv and writes a checkpoint.");

    m.def(
        "build_index",
        [](const std::string& corpus_path, const std::string& checkpoint_path,
           const std::string& out_index, int k_centroids, int nbits, int kmeans_iters,
           uint64_t seed, bool store_raw, int threads) {
            IndexConfig ic;
            ic.k_centroids = k_centroids;
            ic.nbits = nbits;
            ic.kmeans_iters = kmeans_iters;
            ic.seed = seed;
            ic.store_raw = store_raw;
            ic.threads = threads;
            build_index_files(corpus_path, checkpoint_path, ic, table(), out_index);
        },
        py::arg("corpus_path"), py::arg("checkpoint_path"), py::arg("out_index"),
        py::arg("k_centroids") = 0, py::arg("nbits") = 8, py::arg("kmeans_iters") = 20,
        py::arg("seed") = 42, py::arg("store_raw") = false, py::arg("threads") = 1,
        "Encodes the corpus and writes the compressed token index.");

    m.def(
        "search",
        [](const std::string& index_path, const std::string& checkpoint_path,
           const std::string& queries_path, int top_k, int nprobe, double tau, bool gated) {
            GateConfig gc;
            gc.tau = tau;
            gc.enabled = gated;
            return run_list(
                search_files(index_path, checkpoint_path, queries_path, gc, top_k, nprobe, table()));
        },
        py::arg("index_path"), py::arg("checkpoint_path"), py::arg("queries_path"),
        py::arg("top_k") = 10, py::arg("nprobe") = 8, py::arg("tau") = 0.5,
        py::arg("gated") = true,
        "Runs every query in the file; returns [(qid, [(doc_id, score), ...]), ...].");

    m.def(
        "evaluate",
        [](const std::string& run_path, const std::string& qrels_path,
           const std::string& queries_path) {
            return report_dict(eval_files(run_path, qrels_path, queries_path, table()));
        },
        py::arg("run_path"), py::arg("qrels_path"), py::arg("queries_path") = "",
        "nDCG@10 / MRR@10 / P@10 / R@100 overall and per comparator slice.");

    m.def(
        "export_embeddings",
        [](const std::string& checkpoint_path, const std::string& queries_path,
           const std::string& out_csv, double tau) {
            GateConfig gc;
            gc.tau = tau;
            return export_embeddings_file(checkpoint_path, queries_path, gc, table(), out_csv);
        },
        py::arg("checkpoint_path"), py::arg("queries_path"), py::arg("out_csv"),
        py::arg("tau") = 0.5, "Dumps detector-flagged numeric token embeddings; returns rows.");
}
