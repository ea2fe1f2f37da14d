#include "ncb/embedder.hpp"

#include <algorithm>
#include <cmath>

#include "ncb/gate.hpp"
#include "ncb/quantity.hpp"

namespace ncb {

namespace {
constexpr int kDenseSlots = 4;  // is_numeric, digit_count, has_decimal, magnitude bucket

void add_hashed(std::vector<Feature>& out, uint64_t seed, uint32_t hash_slots, const char* data,
                size_t len) {
    out.push_back({static_cast<uint32_t>(hash64(seed, data, len) % hash_slots), 1.0});
}
}  // namespace

std::vector<Feature> base_embed(const std::string& token, const ModelConfig& cfg) {
    const uint32_t hash_slots = static_cast<uint32_t>(cfg.feat_dim - kDenseSlots);
    std::vector<Feature> feats;

    const std::string marked = "^" + token + "$";
    for (int n = 2; n <= 3; ++n) {
        if (marked.size() < static_cast<size_t>(n)) continue;
        for (size_t i = 0; i + n <= marked.size(); ++i) {
            add_hashed(feats, cfg.seed + static_cast<uint64_t>(n), hash_slots, marked.data() + i,
                       static_cast<size_t>(n));
        }
    }
    const std::string whole = "tok=" + token;
    add_hashed(feats, cfg.seed, hash_slots, whole.data(), whole.size());

    if (const auto v = parse_number(token)) {
        int digits = 0;
        bool decimal = false;
        for (char c : token) {
            if (c >= '0' && c <= '9') ++digits;
            if (c == '.') decimal = true;
        }
        const double av = std::fabs(*v);
        double bucket = -6.0;
        if (av > 0.0) {
            bucket = std::floor(std::log10(av));
            bucket = std::min(12.0, std::max(-6.0, bucket));
        }
        feats.push_back({hash_slots + 0, 1.0});
        feats.push_back({hash_slots + 1, static_cast<double>(digits)});
        feats.push_back({hash_slots + 2, decimal ? 1.0 : 0.0});
        feats.push_back({hash_slots + 3, bucket});
    }

    std::sort(feats.begin(), feats.end(),
              [](const Feature& a, const Feature& b) { return a.slot < b.slot; });
    std::vector<Feature> merged;
    merged.reserve(feats.size());
    for (const auto& f : feats) {
        if (!merged.empty() && merged.back().slot == f.slot) {
            merged.back().value += f.value;
        } else {
            merged.push_back(f);
        }
    }
    return merged;
}

Mat encode_tokens(const std::vector<std::string>& tokens, const ModelParams& params,
                  EncodeCache* cache) {
    const ModelConfig& cfg = params.config();
    const int d = cfg.dim;
    const int m = static_cast<int>(tokens.size());
    Mat y(m, d);
    if (cache) {
        cache->feats.clear();
        cache->feats.reserve(static_cast<size_t>(m));
        cache->x = Mat(m, d);
        cache->inv_norm.assign(static_cast<size_t>(m), 0.0);
    }
    std::vector<double> x(static_cast<size_t>(d));
    for (int i = 0; i < m; ++i) {
        auto feats = base_embed(tokens[static_cast<size_t>(i)], cfg);
        const double* b = params.proj_b();
        for (int r = 0; r < d; ++r) x[static_cast<size_t>(r)] = b[r];
        for (const auto& f : feats) {
            const double* col = params.proj_w() + static_cast<size_t>(f.slot) * d;
            for (int r = 0; r < d; ++r) x[static_cast<size_t>(r)] += f.value * col[r];
        }
        const double n2 = norm2(x.data(), d);
        const double inv = n2 > 1e-300 ? 1.0 / n2 : 0.0;
        double* row = y.row(i);
        for (int r = 0; r < d; ++r) row[r] = x[static_cast<size_t>(r)] * inv;
        if (cache) {
            std::copy(x.begin(), x.end(), cache->x.row(i));
            cache->inv_norm[static_cast<size_t>(i)] = inv;
            cache->feats.push_back(std::move(feats));
        }
    }
    return y;
}

void encode_backward(const EncodeCache& cache, const Mat& y, const Mat& dy,
                     const ModelParams& params, std::vector<double>& grads) {
    const int d = y.cols;
    std::vector<double> dx(static_cast<size_t>(d));
    double* gw = params.grad_proj_w(grads);
    double* gb = params.grad_proj_b(grads);
    for (int i = 0; i < y.rows; ++i) {
        const double* yi = y.row(i);
        const double* dyi = dy.row(i);
        const double inv = cache.inv_norm[static_cast<size_t>(i)];
        const double proj = dot(dyi, yi, d);
        for (int r = 0; r < d; ++r) dx[static_cast<size_t>(r)] = (dyi[r] - proj * yi[r]) * inv;
        for (const auto& f : cache.feats[static_cast<size_t>(i)]) {
            double* col = gw + static_cast<size_t>(f.slot) * d;
            for (int r = 0; r < d; ++r) col[r] += f.value * dx[static_cast<size_t>(r)];
        }
        for (int r = 0; r < d; ++r) gb[r] += dx[static_cast<size_t>(r)];
    }
}

DocEmbeddings encode_document(std::string_view text, const ModelParams& params) {
    DocEmbeddings doc;
    doc.tokens = tokenize(text);
    doc.e = encode_tokens(doc.tokens, params, nullptr);
    return doc;
}

QueryEmbeddings encode_query(std::string_view text, const ModelParams& params,
                             const GateConfig& gate_cfg, const std::vector<uint8_t>* labels) {
    QueryEmbeddings q;
    q.tokens = tokenize(text);
    if (q.tokens.empty()) throw data_error("empty query");
    q.e_pre = encode_tokens(q.tokens, params, nullptr);
    q.e = q.e_pre;
    gate_forward(q.e_pre, q.e, params, gate_cfg, labels, q.numeric_mask, q.num_probs, q.gates,
                 nullptr);
    return q;
}

}  // namespace ncb
