#include "ncb/gate.hpp"

namespace ncb {

double detect_prob(const double* q, const MlpView& det) {
    std::vector<double> hpre(static_cast<size_t>(det.hidden)), hpost(hpre.size());
    double out = 0.0;
    mlp_forward(det, q, hpre.data(), hpost.data(), &out);
    return sigmoid(out);
}

double gate_scalar(const double* q, int m, const MlpView& gate) {
    std::vector<double> hpre(static_cast<size_t>(gate.hidden)), hpost(hpre.size());
    double out = 0.0;
    mlp_forward(gate, q, hpre.data(), hpost.data(), &out);
    return static_cast<double>(m) * sigmoid(out);
}

GateDiag gate_forward(const Mat& pre, Mat& rows, const ModelParams& params, const GateConfig& cfg,
                      const std::vector<uint8_t>* labels, std::vector<uint8_t>& mask_out,
                      std::vector<double>& probs_out, std::vector<double>& gates_out,
                      std::vector<GateTokenCache>* cache) {
    const int m = pre.rows;
    const int d = pre.cols;
    if (labels && static_cast<int>(labels->size()) != m) {
        throw data_error("routing label count does not match token count");
    }
    const MlpView det = params.detector();
    const MlpView gat = params.gate();
    mask_out.assign(static_cast<size_t>(m), 0);
    probs_out.assign(static_cast<size_t>(m), 0.0);
    gates_out.assign(static_cast<size_t>(m), 0.0);
    if (cache) cache->assign(static_cast<size_t>(m), GateTokenCache{});

    GateDiag diag;
    for (int i = 0; i < m; ++i) {
        const double* qi = pre.row(i);
        GateTokenCache local;
        GateTokenCache& c = cache ? (*cache)[static_cast<size_t>(i)] : local;
        c.det_hpre.resize(static_cast<size_t>(det.hidden));
        c.det_hpost.resize(static_cast<size_t>(det.hidden));
        mlp_forward(det, qi, c.det_hpre.data(), c.det_hpost.data(), &c.det_a);
        ++diag.detector_evals;
        c.p = sigmoid(c.det_a);

        c.gate_hpre.resize(static_cast<size_t>(gat.hidden));
        c.gate_hpost.resize(static_cast<size_t>(gat.hidden));
        mlp_forward(gat, qi, c.gate_hpre.data(), c.gate_hpost.data(), &c.z);
        ++diag.gate_evals;
        c.sg = sigmoid(c.z);
        c.g = static_cast<double>(m) * c.sg;

        const bool flagged = labels ? ((*labels)[static_cast<size_t>(i)] != 0) : (c.p > cfg.tau);
        c.routed = cfg.enabled && flagged;

        mask_out[static_cast<size_t>(i)] = flagged ? 1 : 0;
        probs_out[static_cast<size_t>(i)] = c.p;
        gates_out[static_cast<size_t>(i)] = c.g;

        double* out = rows.row(i);
        if (c.routed) {
            for (int r = 0; r < d; ++r) out[r] = c.g * qi[r];
        } else if (out != qi) {
            for (int r = 0; r < d; ++r) out[r] = qi[r];
        }
    }
    return diag;
}

void gate_backward(const Mat& pre, const std::vector<GateTokenCache>& cache, const Mat& dgated,
                   const ModelParams& params, std::vector<double>& grads, Mat& dpre) {
    const int m = pre.rows;
    const int d = pre.cols;
    const MlpView gat = params.gate();
    const MlpGrad ggrad = params.grad_gate(grads);
    for (int i = 0; i < m; ++i) {
        const GateTokenCache& c = cache[static_cast<size_t>(i)];
        const double* qi = pre.row(i);
        const double* dout = dgated.row(i);
        double* dq = dpre.row(i);
        if (!c.routed) {
            for (int r = 0; r < d; ++r) dq[r] += dout[r];
            continue;
        }
        // q~ = g(q) * q with g = m * sigmoid(z(q)):
        //   dL/dg = dout . q, dL/dz = dL/dg * m * sg * (1 - sg)
        //   dL/dq = g * dout + dL/dz * dz/dq
        const double dl_dg = dot(dout, qi, d);
        const double dl_dz = dl_dg * static_cast<double>(m) * c.sg * (1.0 - c.sg);
        for (int r = 0; r < d; ++r) dq[r] += c.g * dout[r];
        mlp_backward(gat, ggrad, qi, c.gate_hpre.data(), c.gate_hpost.data(), &dl_dz, dq);
    }
}

}  // namespace ncb
