#include "ncb/model.hpp"

namespace ncb {

size_t ModelParams::mlp_size(int out) const {
    const size_t h = static_cast<size_t>(cfg_.hidden);
    const size_t d = static_cast<size_t>(cfg_.dim);
    const size_t o = static_cast<size_t>(out);
    return h * d + h + o * h + o;
}

void ModelParams::compute_offsets() {
    const size_t d = static_cast<size_t>(cfg_.dim);
    const size_t f = static_cast<size_t>(cfg_.feat_dim);
    size_t off = 0;
    off_proj_w_ = off;
    off += f * d;
    off_proj_b_ = off;
    off += d;
    off_det_ = off;
    off += mlp_size(1);
    off_gate_ = off;
    off += mlp_size(1);
    off_unit_ = off;
    off += mlp_size(cfg_.unit_classes);
    off_mant_ = off;
    off += mlp_size(1);
    off_exp_ = off;
    off += mlp_size(1);
    off_cond_ = off;
    off += mlp_size(3);
    theta_.assign(off, 0.0);
}

ModelParams::ModelParams(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.dim <= 0 || cfg.feat_dim <= 0 || cfg.hidden <= 0 || cfg.unit_classes <= 0) {
        throw data_error("model dimensions must be positive");
    }
    if (cfg.feat_dim < 8) throw data_error("feat_dim too small for dense numeric slots");
    compute_offsets();
}

MlpView ModelParams::mlp_view(size_t off, int out) const {
    const size_t h = static_cast<size_t>(cfg_.hidden);
    const size_t d = static_cast<size_t>(cfg_.dim);
    MlpView v;
    v.w1 = theta_.data() + off;
    v.b1 = v.w1 + h * d;
    v.w2 = v.b1 + h;
    v.b2 = v.w2 + static_cast<size_t>(out) * h;
    v.in = cfg_.dim;
    v.hidden = cfg_.hidden;
    v.out = out;
    return v;
}

MlpGrad ModelParams::mlp_grad(std::vector<double>& g, size_t off, int out) const {
    if (g.size() != theta_.size()) throw data_error("gradient buffer size mismatch");
    const size_t h = static_cast<size_t>(cfg_.hidden);
    const size_t d = static_cast<size_t>(cfg_.dim);
    MlpGrad v;
    v.w1 = g.data() + off;
    v.b1 = v.w1 + h * d;
    v.w2 = v.b1 + h;
    v.b2 = v.w2 + static_cast<size_t>(out) * h;
    v.in = cfg_.dim;
    v.hidden = cfg_.hidden;
    v.out = out;
    return v;
}

std::vector<ParamBlock> ModelParams::blocks() const {
    const size_t d = static_cast<size_t>(cfg_.dim);
    const size_t f = static_cast<size_t>(cfg_.feat_dim);
    return {
        {"proj_w", off_proj_w_, f * d},
        {"proj_b", off_proj_b_, d},
        {"detector", off_det_, mlp_size(1)},
        {"gate", off_gate_, mlp_size(1)},
        {"head_unit", off_unit_, mlp_size(cfg_.unit_classes)},
        {"head_mantissa", off_mant_, mlp_size(1)},
        {"head_exponent", off_exp_, mlp_size(1)},
        {"head_cond", off_cond_, mlp_size(3)},
    };
}

// ----------------------------- checkpoint IO --------------------------------
// "NCBM" | version u32 | d u32 | f u32 | seed u64 | h u32 | unit_classes u32 |
// theta as f64[total] in block order.

static constexpr char kModelMagic[4] = {'N', 'C', 'B', 'M'};
static constexpr uint32_t kModelVersion = 1;

void ModelParams::serialize(ByteSink& out) const {
    out.put(kModelMagic, 4);
    write_pod<uint32_t>(out, kModelVersion);
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg_.dim));
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg_.feat_dim));
    write_pod<uint64_t>(out, cfg_.seed);
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg_.hidden));
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg_.unit_classes));
    write_vec(out, theta_);
}

ModelParams ModelParams::deserialize(ByteSource& in) {
    char magic[4];
    in.get(magic, 4);
    if (std::memcmp(magic, kModelMagic, 4) != 0) throw format_error("bad checkpoint magic");
    const auto version = read_pod<uint32_t>(in);
    if (version != kModelVersion) {
        throw format_error("unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig cfg;
    cfg.dim = static_cast<int>(read_pod<uint32_t>(in));
    cfg.feat_dim = static_cast<int>(read_pod<uint32_t>(in));
    cfg.seed = read_pod<uint64_t>(in);
    cfg.hidden = static_cast<int>(read_pod<uint32_t>(in));
    cfg.unit_classes = static_cast<int>(read_pod<uint32_t>(in));
    ModelParams p(cfg);
    read_vec(in, p.theta_, p.theta_.size());
    if (in.left != 0) throw format_error("trailing bytes in checkpoint");
    return p;
}

void ModelParams::save(const std::string& path) const {
    ByteSink sink;
    serialize(sink);
    write_file(path, sink.bytes);
}

ModelParams ModelParams::load(const std::string& path) {
    const std::string bytes = read_file(path);
    ByteSource src(bytes);
    return deserialize(src);
}

// ----------------------------- init + MLP ops --------------------------------

namespace {
void init_mlp(double* base, int in, int hidden, int out, Rng& rng) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    double* w1 = base;
    double* b1 = w1 + static_cast<size_t>(hidden) * in;
    double* w2 = b1 + hidden;
    double* b2 = w2 + static_cast<size_t>(out) * hidden;
    for (size_t i = 0; i < static_cast<size_t>(hidden) * in; ++i) w1[i] = rng.normal() * s1;
    for (int i = 0; i < hidden; ++i) b1[i] = 0.0;
    for (size_t i = 0; i < static_cast<size_t>(out) * hidden; ++i) w2[i] = rng.normal() * s2;
    for (int i = 0; i < out; ++i) b2[i] = 0.0;
}
}  // namespace

ModelParams init_model(const ModelConfig& cfg) {
    ModelParams p(cfg);
    Rng rng(cfg.seed);
    const double sp = 1.0 / std::sqrt(static_cast<double>(cfg.feat_dim));
    double* w = p.proj_w();
    for (size_t i = 0; i < static_cast<size_t>(cfg.feat_dim) * cfg.dim; ++i) {
        w[i] = rng.normal() * sp;
    }
    double* b = p.proj_b();
    for (int i = 0; i < cfg.dim; ++i) b[i] = 0.0;
    for (const auto& blk : p.blocks()) {
        if (blk.name == "proj_w" || blk.name == "proj_b") continue;
        int out = 1;
        if (blk.name == "head_unit") out = cfg.unit_classes;
        if (blk.name == "head_cond") out = 3;
        init_mlp(p.theta().data() + blk.offset, cfg.dim, cfg.hidden, out, rng);
    }
    return p;
}

void mlp_forward(const MlpView& v, const double* x, double* h_pre, double* h_post, double* out) {
    for (int i = 0; i < v.hidden; ++i) {
        const double* row = v.w1 + static_cast<size_t>(i) * v.in;
        double s = v.b1[i];
        for (int j = 0; j < v.in; ++j) s += row[j] * x[j];
        h_pre[i] = s;
        h_post[i] = s > 0.0 ? s : 0.0;
    }
    for (int o = 0; o < v.out; ++o) {
        const double* row = v.w2 + static_cast<size_t>(o) * v.hidden;
        double s = v.b2[o];
        for (int i = 0; i < v.hidden; ++i) s += row[i] * h_post[i];
        out[o] = s;
    }
}

void mlp_backward(const MlpView& v, const MlpGrad& g, const double* x, const double* h_pre,
                  const double* h_post, const double* dout, double* dx) {
    // second layer
    std::vector<double> dh(static_cast<size_t>(v.hidden), 0.0);
    for (int o = 0; o < v.out; ++o) {
        const double go = dout[o];
        if (go == 0.0) continue;
        const double* row = v.w2 + static_cast<size_t>(o) * v.hidden;
        double* grow = g.w2 + static_cast<size_t>(o) * v.hidden;
        for (int i = 0; i < v.hidden; ++i) {
            grow[i] += go * h_post[i];
            dh[static_cast<size_t>(i)] += go * row[i];
        }
        g.b2[o] += go;
    }
    // relu + first layer
    for (int i = 0; i < v.hidden; ++i) {
        const double di = h_pre[i] > 0.0 ? dh[static_cast<size_t>(i)] : 0.0;
        if (di == 0.0) continue;
        const double* row = v.w1 + static_cast<size_t>(i) * v.in;
        double* grow = g.w1 + static_cast<size_t>(i) * v.in;
        for (int j = 0; j < v.in; ++j) {
            grow[j] += di * x[j];
            if (dx) dx[j] += di * row[j];
        }
        g.b1[i] += di;
    }
}

}  // namespace ncb
