#pragma once

// Trainable parameters: one flat f64 vector with named block views.
// Blocks, in order:
//   proj_w      feature-major projection, f rows of d  (x = W^T phi + b)
//   proj_b      d
//   detector    two-layer MLP d -> h -> 1
//   gate        two-layer MLP d -> h -> 1
//   head_unit   two-layer MLP d -> h -> n_unit_classes
//   head_mant   two-layer MLP d -> h -> 1
//   head_exp    two-layer MLP d -> h -> 1
//   head_cond   two-layer MLP d -> h -> 3
// Gradients use the same flat layout, so optimizer steps and finite-difference
// sweeps address parameters uniformly.

#include <cstdint>
#include <string>
#include <vector>

#include "ncb/common.hpp"

namespace ncb {

struct ModelConfig {
    int dim = 64;           // token embedding width d
    int feat_dim = 512;     // hashed feature width f
    int hidden = 32;        // MLP hidden width h
    int unit_classes = 23;  // |unit table| + 1 for "no unit"
    uint64_t seed = 17;     // init + feature hashing seed
};

struct MlpView {
    const double* w1;  // [hidden][in] row-major
    const double* b1;  // [hidden]
    const double* w2;  // [out][hidden] row-major
    const double* b2;  // [out]
    int in, hidden, out;
};

struct MlpGrad {
    double *w1, *b1, *w2, *b2;
    int in, hidden, out;
};

struct ParamBlock {
    std::string name;
    size_t offset;
    size_t size;
};

class ModelParams {
  public:
    ModelParams() = default;
    explicit ModelParams(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    std::vector<double>& theta() { return theta_; }
    const std::vector<double>& theta() const { return theta_; }
    size_t total() const { return theta_.size(); }

    // projection (feature-major): column for feature slot s is proj_w() + s*d
    const double* proj_w() const { return theta_.data() + off_proj_w_; }
    double* proj_w() { return theta_.data() + off_proj_w_; }
    const double* proj_b() const { return theta_.data() + off_proj_b_; }
    double* proj_b() { return theta_.data() + off_proj_b_; }

    MlpView detector() const { return mlp_view(off_det_, 1); }
    MlpView gate() const { return mlp_view(off_gate_, 1); }
    MlpView head_unit() const { return mlp_view(off_unit_, cfg_.unit_classes); }
    MlpView head_mantissa() const { return mlp_view(off_mant_, 1); }
    MlpView head_exponent() const { return mlp_view(off_exp_, 1); }
    MlpView head_cond() const { return mlp_view(off_cond_, 3); }

    // Gradient views into an external flat buffer laid out like theta.
    double* grad_proj_w(std::vector<double>& g) const { return g.data() + off_proj_w_; }
    double* grad_proj_b(std::vector<double>& g) const { return g.data() + off_proj_b_; }
    MlpGrad grad_detector(std::vector<double>& g) const { return mlp_grad(g, off_det_, 1); }
    MlpGrad grad_gate(std::vector<double>& g) const { return mlp_grad(g, off_gate_, 1); }
    MlpGrad grad_head_unit(std::vector<double>& g) const {
        return mlp_grad(g, off_unit_, cfg_.unit_classes);
    }
    MlpGrad grad_head_mantissa(std::vector<double>& g) const { return mlp_grad(g, off_mant_, 1); }
    MlpGrad grad_head_exponent(std::vector<double>& g) const { return mlp_grad(g, off_exp_, 1); }
    MlpGrad grad_head_cond(std::vector<double>& g) const { return mlp_grad(g, off_cond_, 3); }

    // Named blocks for finite-difference sweeps and reporting.
    std::vector<ParamBlock> blocks() const;

    void serialize(ByteSink& out) const;
    static ModelParams deserialize(ByteSource& in);
    void save(const std::string& path) const;
    static ModelParams load(const std::string& path);

  private:
    ModelConfig cfg_;
    std::vector<double> theta_;
    size_t off_proj_w_ = 0, off_proj_b_ = 0, off_det_ = 0, off_gate_ = 0;
    size_t off_unit_ = 0, off_mant_ = 0, off_exp_ = 0, off_cond_ = 0;

    void compute_offsets();
    size_t mlp_size(int out) const;
    MlpView mlp_view(size_t off, int out) const;
    MlpGrad mlp_grad(std::vector<double>& g, size_t off, int out) const;
};

// Seeded Gaussian init: projection entries scaled by 1/sqrt(f), MLP first
// layers by 1/sqrt(in), second layers by 1/sqrt(hidden); biases zero.
ModelParams init_model(const ModelConfig& cfg);

// y = W2 * relu(W1 x + b1) + b2. h_pre/h_post must hold `hidden` doubles,
// out must hold `out` doubles.
void mlp_forward(const MlpView& v, const double* x, double* h_pre, double* h_post, double* out);

// Backprop for the block above. Accumulates parameter gradients into g and,
// when dx != nullptr, input gradients into dx.
void mlp_backward(const MlpView& v, const MlpGrad& g, const double* x, const double* h_pre,
                  const double* h_post, const double* dout, double* dx);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace ncb
