#pragma once

// Late-interaction scoring: every query row contributes the maximum dot
// product over document rows, and the score is the sum of those maxima.

#include <optional>
#include <vector>

#include "ncb/embedder.hpp"

namespace ncb {

struct Score {
    double value = 0.0;
    std::vector<int> per_token_argmax;  // doc row index per query row (ties: lowest)
    std::vector<double> per_token_max;
};

// Q: m x d query rows (gated or not), D: n x d document rows. n must be > 0.
Score maxsim(const Mat& q, const Mat& d);

// Score-only MaxSim over n_rows packed rows of q.cols doubles. Identical
// arithmetic and accumulation order to maxsim().value, without the per-token
// bookkeeping (used by the search/benchmark hot paths).
double maxsim_value(const Mat& q, const double* rows, int n_rows);

// Convenience over encoded structures; scores the gated rows.
Score gated_maxsim(const QueryEmbeddings& q, const DocEmbeddings& d);

// Mean of the ungated rows flagged numeric; nullopt when no token is flagged.
std::optional<std::vector<double>> mean_pool_numeric(const QueryEmbeddings& q);

// Single-vector relaxation used by the contrastive objective:
// max over document rows of q_num . d_j.
double s_cont(const std::vector<double>& q_num, const Mat& d, int* argmax = nullptr);

}  // namespace ncb
