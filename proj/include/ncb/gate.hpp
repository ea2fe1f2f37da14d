#pragma once

// Numerical token detector + numerical gate. Both are two-layer MLPs over a
// single token row. Routing: a token flagged numeric (detector probability
// above tau, or a teacher-forced label) has its row scaled by
// g = |Q| * sigmoid(gate(q)); all other rows pass through unchanged.
// Work is O(|Q|) MLP evaluations and never touches document encodings.

#include <vector>

#include "ncb/embedder.hpp"
#include "ncb/model.hpp"

namespace ncb {

double detect_prob(const double* q, const MlpView& det);

// g in (0, m): m * sigmoid(gate MLP output).
double gate_scalar(const double* q, int m, const MlpView& gate);

// Per-token forward state kept for backprop.
struct GateTokenCache {
    double p = 0.0;      // detector probability
    double det_a = 0.0;  // detector pre-sigmoid
    double z = 0.0;      // gate pre-sigmoid
    double sg = 0.0;  // sigmoid(z)
    double g = 0.0;   // m * sg
    bool routed = false;
    std::vector<double> det_hpre, det_hpost;    // detector hidden states
    std::vector<double> gate_hpre, gate_hpost;  // gate hidden states
};

struct GateDiag {
    int detector_evals = 0;
    int gate_evals = 0;
};

// Applies routing to `rows` in place (rows starts as a copy of `pre`).
// Fills mask/probs/gates and, when cache != nullptr, per-token backprop state.
GateDiag gate_forward(const Mat& pre, Mat& rows, const ModelParams& params, const GateConfig& cfg,
                      const std::vector<uint8_t>* labels, std::vector<uint8_t>& mask_out,
                      std::vector<double>& probs_out, std::vector<double>& gates_out,
                      std::vector<GateTokenCache>* cache);

// dL/d(gated rows) -> gate-MLP gradients (into the flat grad buffer) plus
// dL/d(pre rows), accumulated into dpre. The routing decision is a constant:
// detector parameters receive no gradient from this path.
void gate_backward(const Mat& pre, const std::vector<GateTokenCache>& cache,
                   const Mat& dgated, const ModelParams& params, std::vector<double>& grads,
                   Mat& dpre);

}  // namespace ncb
