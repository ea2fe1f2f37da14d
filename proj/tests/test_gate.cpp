#include "doctest.h"

#include <cmath>

#include "ncb/gate.hpp"
#include "ncb/quantity.hpp"

using namespace ncb;

namespace {
ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.feat_dim = 32;
    cfg.hidden = 4;
    cfg.unit_classes = UnitTable::builtin().size() + 1;
    cfg.seed = 7;
    return cfg;
}

void set_block(ModelParams& p, const char* name, double value) {
    for (const auto& blk : p.blocks()) {
        if (blk.name == name) {
            std::fill_n(p.theta().begin() + static_cast<long>(blk.offset), blk.size, value);
        }
    }
}
}  // namespace

TEST_CASE("gate output range and zero-weight midpoint") {
    ModelParams p = init_model(tiny_cfg());
    set_block(p, "gate", 0.0);
    const Mat rows = encode_tokens({"500", "gb", "over", "laptops"}, p, nullptr);
    // zero gate MLP -> sigmoid(0) = 0.5 -> g = 0.5 * |Q|
    CHECK(gate_scalar(rows.row(0), 4, p.gate()) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(gate_scalar(rows.row(0), 1, p.gate()) == doctest::Approx(0.5).epsilon(1e-15));

    // random params: strict bounds 0 < g < m
    ModelParams q = init_model(tiny_cfg());
    for (int m : {1, 3, 9}) {
        for (int i = 0; i < rows.rows; ++i) {
            const double g = gate_scalar(rows.row(i), m, q.gate());
            CHECK(g > 0.0);
            CHECK(g < static_cast<double>(m));
        }
    }
}

TEST_CASE("gate saturation under extreme pre-activations") {
    ModelParams p = init_model(tiny_cfg());
    set_block(p, "gate", 0.0);
    // force b2 to +-40: g should saturate to ~m and ~0 without inf/nan
    for (const auto& blk : p.blocks()) {
        if (blk.name != "gate") continue;
        const Mat rows = encode_tokens({"500"}, p, nullptr);
        p.theta()[blk.offset + blk.size - 1] = 40.0;
        double g = gate_scalar(rows.row(0), 5, p.gate());
        CHECK(g == doctest::Approx(5.0).epsilon(1e-10));
        CHECK(std::isfinite(g));
        p.theta()[blk.offset + blk.size - 1] = -40.0;
        g = gate_scalar(rows.row(0), 5, p.gate());
        CHECK(g < 1e-10);
        CHECK(g >= 0.0);
    }
}

TEST_CASE("gate_forward routing, diagnostics, and bitwise else-branch") {
    ModelParams p = init_model(tiny_cfg());
    const std::vector<std::string> toks = {"drives", "over", "2", "tb", "fast"};
    const Mat pre = encode_tokens(toks, p, nullptr);
    Mat rows = pre;
    const std::vector<uint8_t> labels = {0, 0, 1, 1, 0};
    std::vector<uint8_t> mask;
    std::vector<double> probs, gates;
    GateConfig cfg;
    const GateDiag diag =
        gate_forward(pre, rows, p, cfg, &labels, mask, probs, gates, nullptr);

    CHECK(diag.detector_evals == 5);  // O(|Q|): one evaluation per token
    CHECK(diag.gate_evals == 5);
    CHECK(mask == labels);
    for (int i : {0, 1, 4}) {
        for (int r = 0; r < pre.cols; ++r) CHECK(rows.row(i)[r] == pre.row(i)[r]);  // bitwise
    }
    for (int i : {2, 3}) {
        const double g = gates[static_cast<size_t>(i)];
        for (int r = 0; r < pre.cols; ++r) {
            CHECK(rows.row(i)[r] == doctest::Approx(g * pre.row(i)[r]).epsilon(1e-14));
        }
    }

    // all detector outputs below tau (no labels): output bitwise equals input
    ModelParams low = init_model(tiny_cfg());
    for (const auto& blk : low.blocks()) {
        if (blk.name == "detector") low.theta()[blk.offset + blk.size - 1] = -60.0;
    }
    Mat rows2 = pre;
    const Mat pre2 = encode_tokens(toks, low, nullptr);
    Mat gated2 = pre2;
    gate_forward(pre2, gated2, low, cfg, nullptr, mask, probs, gates, nullptr);
    CHECK(gated2.a == pre2.a);
}

TEST_CASE("detector perturbation with margin does not change apply output") {
    ModelParams p = init_model(tiny_cfg());
    for (const auto& blk : p.blocks()) {
        if (blk.name == "detector") p.theta()[blk.offset + blk.size - 1] = -30.0;
    }
    const Mat pre = encode_tokens({"ssds", "over", "500", "gb"}, p, nullptr);
    Mat a = pre;
    std::vector<uint8_t> mask;
    std::vector<double> probs, gates;
    GateConfig cfg;
    gate_forward(pre, a, p, cfg, nullptr, mask, probs, gates, nullptr);

    ModelParams q = p;  // small detector weight perturbation, same routing side
    for (const auto& blk : q.blocks()) {
        if (blk.name == "detector") q.theta()[blk.offset] += 1e-3;
    }
    const Mat preq = encode_tokens({"ssds", "over", "500", "gb"}, q, nullptr);
    Mat b = preq;
    gate_forward(preq, b, q, cfg, nullptr, mask, probs, gates, nullptr);
    CHECK(a.a == b.a);  // detector affects routing only, not magnitudes
}

TEST_CASE("gate_backward matches finite differences") {
    ModelParams p = init_model(tiny_cfg());
    const std::vector<std::string> toks = {"over", "500", "gb"};
    const Mat pre = encode_tokens(toks, p, nullptr);
    const std::vector<uint8_t> labels = {0, 1, 1};
    GateConfig cfg;

    // fixed random upstream gradient; F = sum_{i,r} c[i][r] * gated[i][r]
    Rng rng(3);
    Mat c(pre.rows, pre.cols);
    for (double& v : c.a) v = rng.unit() * 2 - 1;

    auto forward_f = [&](const ModelParams& params, const Mat& prem) {
        Mat rows = prem;
        std::vector<uint8_t> mask;
        std::vector<double> probs, gates;
        gate_forward(prem, rows, params, cfg, &labels, mask, probs, gates, nullptr);
        double f = 0.0;
        for (size_t i = 0; i < rows.a.size(); ++i) f += c.a[i] * rows.a[i];
        return f;
    };

    // analytic
    Mat rows = pre;
    std::vector<uint8_t> mask;
    std::vector<double> probs, gates;
    std::vector<GateTokenCache> cache;
    gate_forward(pre, rows, p, cfg, &labels, mask, probs, gates, &cache);
    std::vector<double> grads(p.total(), 0.0);
    Mat dpre(pre.rows, pre.cols);
    gate_backward(pre, cache, c, p, grads, dpre);

    const double h = 1e-6;
    // gate parameter block
    for (const auto& blk : p.blocks()) {
        if (blk.name != "gate") continue;
        for (size_t i = 0; i < blk.size; ++i) {
            const size_t idx = blk.offset + i;
            ModelParams pp = p;
            pp.theta()[idx] += h;
            ModelParams pm = p;
            pm.theta()[idx] -= h;
            const double num = (forward_f(pp, pre) - forward_f(pm, pre)) / (2 * h);
            CHECK(grads[idx] == doctest::Approx(num).epsilon(1e-5).scale(1.0));
        }
    }
    // input rows
    for (int i = 0; i < pre.rows; ++i) {
        for (int r = 0; r < pre.cols; ++r) {
            Mat pp = pre;
            pp.row(i)[r] += h;
            Mat pm = pre;
            pm.row(i)[r] -= h;
            const double num = (forward_f(p, pp) - forward_f(p, pm)) / (2 * h);
            CHECK(dpre.row(i)[r] == doctest::Approx(num).epsilon(1e-5).scale(1.0));
        }
    }

    // zero upstream -> zero gradients
    std::vector<double> zg(p.total(), 0.0);
    Mat zero_up(pre.rows, pre.cols);
    Mat zdpre(pre.rows, pre.cols);
    gate_backward(pre, cache, zero_up, p, zg, zdpre);
    for (double v : zg) CHECK(v == 0.0);
    for (double v : zdpre.a) CHECK(v == 0.0);
}
