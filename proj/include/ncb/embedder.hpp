#pragma once

// Frozen featurizer + trainable projection. Tokens are mapped to sparse
// hashed features (char 2/3-grams over a boundary-marked token plus a
// whole-token feature) and, for number tokens, four dense slots at the top
// of the feature space: is_numeric, digit count, has-decimal, and a clamped
// order-of-magnitude bucket. A learned linear projection then yields
// L2-normalized d-dimensional token rows.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ncb/model.hpp"

namespace ncb {

struct Feature {
    uint32_t slot;
    double value;
};

// Merged (unique slots, summed values), sorted by slot. Deterministic given
// the hashing seed in ModelConfig.
std::vector<Feature> base_embed(const std::string& token, const ModelConfig& cfg);

// Forward caches needed to backpropagate through projection + normalization.
struct EncodeCache {
    std::vector<std::vector<Feature>> feats;  // per token
    Mat x;                                    // pre-normalization projections
    std::vector<double> inv_norm;             // 1/||x_i|| (0 for degenerate rows)
};

// L2-normalized projections of base features; rows in token order.
Mat encode_tokens(const std::vector<std::string>& tokens, const ModelParams& params,
                  EncodeCache* cache = nullptr);

// d(loss)/d(normalized rows) -> projection gradients. dy is consumed row by
// row: dx_i = (dy_i - (dy_i . y_i) y_i) / ||x_i||, then scattered through the
// sparse features into proj_w / proj_b.
void encode_backward(const EncodeCache& cache, const Mat& y, const Mat& dy,
                     const ModelParams& params, std::vector<double>& grads);

struct DocEmbeddings {
    int64_t doc_id = -1;
    std::vector<std::string> tokens;
    Mat e;  // m x d, L2-normalized rows
};

// Standard (gate-free) document encoding. Empty/whitespace text yields an
// empty embedding set; the indexer refuses such documents upstream.
DocEmbeddings encode_document(std::string_view text, const ModelParams& params);

struct GateConfig {
    double tau = 0.5;     // detector routing threshold
    bool enabled = true;  // false: encode_query returns ungated rows
};

struct QueryEmbeddings {
    std::vector<std::string> tokens;
    Mat e;                              // gated rows (scoring input)
    Mat e_pre;                          // ungated normalized rows
    std::vector<double> num_probs;      // detector probability per token
    std::vector<double> gates;          // gate scalar g_i per token
    std::vector<uint8_t> numeric_mask;  // routing mask: labels if given, else p > tau
};

// Gated query encoding. `labels` (0/1 per token) teacher-forces the routing
// mask; detector probabilities are still reported. Throws data_error when the
// query has no tokens.
QueryEmbeddings encode_query(std::string_view text, const ModelParams& params,
                             const GateConfig& gate_cfg,
                             const std::vector<uint8_t>* labels = nullptr);

}  // namespace ncb
