#pragma once

// Multi-task training objective with exact analytic gradients:
//   retrieval    in-batch cross-entropy over gated MaxSim scores (2B candidates)
//   contrastive  multi-positive InfoNCE over the pooled numeric query vector
//   detection    token-level binary cross-entropy for the detector
//   properties   unit / mantissa / exponent / comparator heads on the pooled vector
// Composite: L = L_ret + lambda * (L_cont + L_det + L_prop), all lambdas 0.05
// by default. Component weights are explicit so each term can be checked
// against finite differences in isolation.

#include <optional>
#include <string>
#include <vector>

#include "ncb/embedder.hpp"
#include "ncb/gate.hpp"
#include "ncb/quantity.hpp"
#include "ncb/scoring.hpp"

namespace ncb {

// Which candidate documents count as positives for the contrastive term.
enum class Strategy { UnitOnly, NumericOnly, Joint, Separate };

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view s);

struct DocAnnotation {
    std::optional<Quantity> quantity;  // the sentence's quantity mention, if any
};

struct TrainExample {
    std::string query_text;
    std::optional<NumericalCondition> cond;
    std::vector<uint8_t> token_labels;  // aligned with tokenize(query_text)
    std::string pos_text, neg_text;
    DocAnnotation pos_ann, neg_ann;
};

struct LossConfig {
    double tau_ret = 0.02;
    double tau_cont = 0.02;
    double lambda_cont = 0.05;
    double lambda_det = 0.05;
    double lambda_prop = 0.05;
    Strategy strategy = Strategy::UnitOnly;
    bool gating_enabled = true;
    double gate_tau = 0.5;
    bool route_by_labels = true;   // teacher-forced routing during training
    bool cont_uses_gated = false;  // pool q_num from gated rows instead of raw ones
    double eq_tol = 1e-9;
};

// Multipliers applied to the individual terms; the property sub-terms are
// weighted separately so each can be finite-difference checked alone.
struct LossWeights {
    double ret = 0.0, cont = 0.0, det = 0.0;
    double unit = 0.0, mant = 0.0, exp = 0.0, cond = 0.0;

    static LossWeights composite(const LossConfig& cfg) {
        return {1.0,           cfg.lambda_cont, cfg.lambda_det, cfg.lambda_prop,
                cfg.lambda_prop, cfg.lambda_prop, cfg.lambda_prop};
    }
    static LossWeights only(const char* which);  // "ret", "cont", "det", "prop", ...
};

struct LossBreakdown {
    double total = 0.0;
    double ret = 0.0, cont = 0.0, det = 0.0, prop = 0.0;
    double prop_unit = 0.0, prop_mant = 0.0, prop_exp = 0.0, prop_cond = 0.0;
    int cont_queries = 0;  // |K|: queries contributing to the contrastive term
    int prop_queries = 0;
};

struct PositiveSets {
    std::vector<int> unit_pos;  // candidates whose quantity carries the query's unit
    std::vector<int> num_pos;   // candidates whose value satisfies the condition
};

PositiveSets positive_sets(const NumericalCondition& cond, const std::vector<DocAnnotation>& anns,
                           const UnitTable& table, double eq_tol);

// Positive index sets actually used by a strategy (Joint intersects, Separate
// keeps both sets as independent objectives).
std::vector<std::vector<int>> positives_for_strategy(Strategy s, const PositiveSets& sets);

// Forward (and, when grads != nullptr, backward) pass over one batch.
// Candidates are [pos_0..pos_{B-1}, neg_0..neg_{B-1}]; positives for query k
// sit at index k. Gradients accumulate into *grads (flat theta layout).
LossBreakdown evaluate_batch(const std::vector<TrainExample>& batch, const ModelParams& params,
                             const LossConfig& cfg, const LossWeights& weights,
                             const UnitTable& table, std::vector<double>* grads);

// log(1 + e^x) without overflow.
inline double softplus(double x) {
    const double ax = std::fabs(x);
    return std::max(x, 0.0) + std::log1p(std::exp(-ax));
}

}  // namespace ncb
