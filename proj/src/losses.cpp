#include "ncb/losses.hpp"

#include <algorithm>
#include <cmath>

namespace ncb {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::UnitOnly: return "unit_only";
        case Strategy::NumericOnly: return "numeric_only";
        case Strategy::Joint: return "joint";
        case Strategy::Separate: return "separate";
    }
    return "unit_only";
}

std::optional<Strategy> strategy_from_name(std::string_view s) {
    if (s == "unit_only") return Strategy::UnitOnly;
    if (s == "numeric_only") return Strategy::NumericOnly;
    if (s == "joint") return Strategy::Joint;
    if (s == "separate") return Strategy::Separate;
    return std::nullopt;
}

LossWeights LossWeights::only(const char* which) {
    LossWeights w;
    const std::string_view s = which;
    if (s == "ret") w.ret = 1.0;
    else if (s == "cont") w.cont = 1.0;
    else if (s == "det") w.det = 1.0;
    else if (s == "unit") w.unit = 1.0;
    else if (s == "mant") w.mant = 1.0;
    else if (s == "exp") w.exp = 1.0;
    else if (s == "cond") w.cond = 1.0;
    else if (s == "prop") w.unit = w.mant = w.exp = w.cond = 1.0;
    else throw data_error(std::string("unknown loss component: ") + which);
    return w;
}

PositiveSets positive_sets(const NumericalCondition& cond, const std::vector<DocAnnotation>& anns,
                           const UnitTable& table, double eq_tol) {
    PositiveSets out;
    for (int c = 0; c < static_cast<int>(anns.size()); ++c) {
        const auto& q = anns[static_cast<size_t>(c)].quantity;
        if (!q) continue;
        if (q->unit == cond.unit) out.unit_pos.push_back(c);
        if (satisfies(*q, cond, table, eq_tol) == CondCheck::Satisfied) out.num_pos.push_back(c);
    }
    return out;
}

std::vector<std::vector<int>> positives_for_strategy(Strategy s, const PositiveSets& sets) {
    switch (s) {
        case Strategy::UnitOnly: return {sets.unit_pos};
        case Strategy::NumericOnly: return {sets.num_pos};
        case Strategy::Joint: {
            std::vector<int> joint;
            std::set_intersection(sets.unit_pos.begin(), sets.unit_pos.end(),
                                  sets.num_pos.begin(), sets.num_pos.end(),
                                  std::back_inserter(joint));
            return {joint};
        }
        case Strategy::Separate: return {sets.unit_pos, sets.num_pos};
    }
    return {sets.unit_pos};
}

namespace {

struct QueryState {
    std::vector<std::string> tokens;
    EncodeCache cache;
    Mat pre, gated;
    std::vector<GateTokenCache> gcache;
    std::vector<uint8_t> mask;
    std::vector<double> probs, gates;
    Mat dpre, dgated;
    std::vector<double> qnum, dqnum;
    int nmask = 0;
    bool has_qnum = false;
};

struct CandState {
    std::vector<std::string> tokens;
    EncodeCache cache;
    Mat e, de;
    const DocAnnotation* ann = nullptr;
};

struct HeadCache {
    std::vector<double> hpre, hpost, out;
};

void head_forward(const MlpView& v, const double* x, HeadCache& hc) {
    hc.hpre.resize(static_cast<size_t>(v.hidden));
    hc.hpost.resize(static_cast<size_t>(v.hidden));
    hc.out.resize(static_cast<size_t>(v.out));
    mlp_forward(v, x, hc.hpre.data(), hc.hpost.data(), hc.out.data());
}

// Cross-entropy over logits; fills dlogits (softmax - onehot) when requested.
double cross_entropy(const std::vector<double>& logits, int target, std::vector<double>* dlogits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    if (dlogits) {
        dlogits->resize(logits.size());
        for (size_t i = 0; i < logits.size(); ++i) {
            (*dlogits)[i] = std::exp(logits[i] - lse);
        }
        (*dlogits)[static_cast<size_t>(target)] -= 1.0;
    }
    return lse - logits[static_cast<size_t>(target)];
}

}  // namespace

LossBreakdown evaluate_batch(const std::vector<TrainExample>& batch, const ModelParams& params,
                             const LossConfig& cfg, const LossWeights& w, const UnitTable& table,
                             std::vector<double>* grads) {
    const int B = static_cast<int>(batch.size());
    if (B == 0) throw data_error("empty batch");
    const int C = 2 * B;
    const int d = params.config().dim;
    if (grads && grads->size() != params.total()) {
        throw data_error("gradient buffer size mismatch");
    }

    // ---------------- encode queries ----------------
    std::vector<QueryState> qs(static_cast<size_t>(B));
    const GateConfig gate_cfg{cfg.gate_tau, cfg.gating_enabled};
    for (int k = 0; k < B; ++k) {
        QueryState& q = qs[static_cast<size_t>(k)];
        const TrainExample& ex = batch[static_cast<size_t>(k)];
        q.tokens = tokenize(ex.query_text);
        if (q.tokens.empty()) throw data_error("empty query in batch: " + ex.query_text);
        if (ex.token_labels.size() != q.tokens.size()) {
            throw data_error("token labels misaligned for query: " + ex.query_text);
        }
        q.pre = encode_tokens(q.tokens, params, &q.cache);
        q.gated = q.pre;
        const std::vector<uint8_t>* labels = cfg.route_by_labels ? &ex.token_labels : nullptr;
        gate_forward(q.pre, q.gated, params, gate_cfg, labels, q.mask, q.probs, q.gates,
                     &q.gcache);
        for (uint8_t m : q.mask) q.nmask += m;
        q.dpre = Mat(q.pre.rows, d);
        q.dgated = Mat(q.pre.rows, d);
    }

    // ---------------- encode candidates ----------------
    std::vector<CandState> cs(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) {
        CandState& cd = cs[static_cast<size_t>(c)];
        const TrainExample& ex = batch[static_cast<size_t>(c % B)];
        const bool is_pos = c < B;
        cd.tokens = tokenize(is_pos ? ex.pos_text : ex.neg_text);
        if (cd.tokens.empty()) throw data_error("empty candidate document in batch");
        cd.e = encode_tokens(cd.tokens, params, &cd.cache);
        cd.de = Mat(cd.e.rows, d);
        cd.ann = is_pos ? &ex.pos_ann : &ex.neg_ann;
    }
    std::vector<DocAnnotation> anns(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) anns[static_cast<size_t>(c)] = *cs[static_cast<size_t>(c)].ann;

    LossBreakdown out;

    // ---------------- retrieval ----------------
    if (w.ret != 0.0) {
        std::vector<Score> scores(static_cast<size_t>(B) * C);
        std::vector<double> logits(static_cast<size_t>(C));
        std::vector<double> probs(static_cast<size_t>(C));
        for (int k = 0; k < B; ++k) {
            const QueryState& q = qs[static_cast<size_t>(k)];
            for (int c = 0; c < C; ++c) {
                Score sc = maxsim(q.gated, cs[static_cast<size_t>(c)].e);
                logits[static_cast<size_t>(c)] = sc.value / cfg.tau_ret;
                scores[static_cast<size_t>(k) * C + c] = std::move(sc);
            }
            double mx = logits[0];
            for (double v : logits) mx = std::max(mx, v);
            double sum = 0.0;
            for (double v : logits) sum += std::exp(v - mx);
            const double lse = mx + std::log(sum);
            out.ret += (lse - logits[static_cast<size_t>(k)]) / B;
            if (grads) {
                for (int c = 0; c < C; ++c) {
                    probs[static_cast<size_t>(c)] = std::exp(logits[static_cast<size_t>(c)] - lse);
                }
                probs[static_cast<size_t>(k)] -= 1.0;
                QueryState& qm = qs[static_cast<size_t>(k)];
                for (int c = 0; c < C; ++c) {
                    const double ds = w.ret * probs[static_cast<size_t>(c)] / (cfg.tau_ret * B);
                    if (ds == 0.0) continue;
                    const Score& sc = scores[static_cast<size_t>(k) * C + c];
                    CandState& cd = cs[static_cast<size_t>(c)];
                    for (int i = 0; i < qm.gated.rows; ++i) {
                        const int j = sc.per_token_argmax[static_cast<size_t>(i)];
                        const double* drow = cd.e.row(j);
                        const double* qrow = qm.gated.row(i);
                        double* dq = qm.dgated.row(i);
                        double* dd = cd.de.row(j);
                        for (int r = 0; r < d; ++r) {
                            dq[r] += ds * drow[r];
                            dd[r] += ds * qrow[r];
                        }
                    }
                }
            }
        }
    }

    // ---------------- pooled numeric vector ----------------
    const bool need_qnum = w.cont != 0.0 || w.unit != 0.0 || w.mant != 0.0 || w.exp != 0.0 ||
                           w.cond != 0.0;
    if (need_qnum) {
        for (int k = 0; k < B; ++k) {
            QueryState& q = qs[static_cast<size_t>(k)];
            if (!batch[static_cast<size_t>(k)].cond || q.nmask == 0) continue;
            const Mat& src = cfg.cont_uses_gated ? q.gated : q.pre;
            q.qnum.assign(static_cast<size_t>(d), 0.0);
            for (int i = 0; i < src.rows; ++i) {
                if (!q.mask[static_cast<size_t>(i)]) continue;
                const double* row = src.row(i);
                for (int r = 0; r < d; ++r) q.qnum[static_cast<size_t>(r)] += row[r];
            }
            for (double& v : q.qnum) v /= q.nmask;
            q.dqnum.assign(static_cast<size_t>(d), 0.0);
            q.has_qnum = true;
        }
    }

    // ---------------- contrastive ----------------
    if (w.cont != 0.0) {
        struct ContActive {
            int k;
            std::vector<std::vector<int>> sets;
        };
        std::vector<ContActive> active;
        for (int k = 0; k < B; ++k) {
            const QueryState& q = qs[static_cast<size_t>(k)];
            if (!q.has_qnum) continue;
            auto ps = positive_sets(*batch[static_cast<size_t>(k)].cond, anns, table, cfg.eq_tol);
            auto sets = positives_for_strategy(cfg.strategy, ps);
            sets.erase(std::remove_if(sets.begin(), sets.end(),
                                      [](const std::vector<int>& s) { return s.empty(); }),
                       sets.end());
            if (!sets.empty()) active.push_back({k, std::move(sets)});
        }
        out.cont_queries = static_cast<int>(active.size());
        if (!active.empty()) {
            const double kinv = 1.0 / static_cast<double>(active.size());
            std::vector<double> logits(static_cast<size_t>(C));
            std::vector<int> argmax(static_cast<size_t>(C));
            for (const auto& act : active) {
                QueryState& q = qs[static_cast<size_t>(act.k)];
                for (int c = 0; c < C; ++c) {
                    logits[static_cast<size_t>(c)] =
                        s_cont(q.qnum, cs[static_cast<size_t>(c)].e,
                               &argmax[static_cast<size_t>(c)]) /
                        cfg.tau_cont;
                }
                double mx = logits[0];
                for (double v : logits) mx = std::max(mx, v);
                double sum = 0.0;
                for (double v : logits) sum += std::exp(v - mx);
                const double lse = mx + std::log(sum);
                const double setinv = 1.0 / static_cast<double>(act.sets.size());
                double lk = 0.0;
                std::vector<double> dlogit(static_cast<size_t>(C), 0.0);
                for (const auto& set : act.sets) {
                    const double pinv = 1.0 / static_cast<double>(set.size());
                    for (int c : set) lk += setinv * pinv * (lse - logits[static_cast<size_t>(c)]);
                    if (grads) {
                        for (int c = 0; c < C; ++c) {
                            dlogit[static_cast<size_t>(c)] +=
                                setinv * std::exp(logits[static_cast<size_t>(c)] - lse);
                        }
                        for (int c : set) dlogit[static_cast<size_t>(c)] -= setinv * pinv;
                    }
                }
                out.cont += kinv * lk;
                if (grads) {
                    for (int c = 0; c < C; ++c) {
                        const double dt =
                            w.cont * kinv * dlogit[static_cast<size_t>(c)] / cfg.tau_cont;
                        if (dt == 0.0) continue;
                        CandState& cd = cs[static_cast<size_t>(c)];
                        const int j = argmax[static_cast<size_t>(c)];
                        const double* drow = cd.e.row(j);
                        double* dd = cd.de.row(j);
                        for (int r = 0; r < d; ++r) {
                            q.dqnum[static_cast<size_t>(r)] += dt * drow[r];
                            dd[r] += dt * q.qnum[static_cast<size_t>(r)];
                        }
                    }
                }
            }
        }
    }

    // ---------------- property heads ----------------
    if (w.unit != 0.0 || w.mant != 0.0 || w.exp != 0.0 || w.cond != 0.0) {
        std::vector<int> kp;
        for (int k = 0; k < B; ++k) {
            if (qs[static_cast<size_t>(k)].has_qnum) kp.push_back(k);
        }
        out.prop_queries = static_cast<int>(kp.size());
        if (!kp.empty()) {
            const double kinv = 1.0 / static_cast<double>(kp.size());
            const int n_unit = params.config().unit_classes;
            for (int k : kp) {
                QueryState& q = qs[static_cast<size_t>(k)];
                const NumericalCondition& cond = *batch[static_cast<size_t>(k)].cond;
                const int unit_target = cond.unit ? (*cond.unit + 1) : 0;
                if (unit_target >= n_unit) {
                    throw data_error("unit id exceeds the model's unit-class head");
                }
                const ScientificForm sci = to_scientific(cond.value);
                const double mant_target = sci.sign < 0 ? -sci.mantissa : sci.mantissa;
                const double exp_target = static_cast<double>(sci.exponent);
                const int cond_target = cond.cmp == Cmp::EQ ? 0 : (cond.cmp == Cmp::GT ? 1 : 2);

                HeadCache hu, hm, he, hc;
                head_forward(params.head_unit(), q.qnum.data(), hu);
                head_forward(params.head_mantissa(), q.qnum.data(), hm);
                head_forward(params.head_exponent(), q.qnum.data(), he);
                head_forward(params.head_cond(), q.qnum.data(), hc);

                std::vector<double> du, dc;
                const double l_unit = cross_entropy(hu.out, unit_target, grads ? &du : nullptr);
                const double em = hm.out[0] - mant_target;
                const double ee = he.out[0] - exp_target;
                const double l_cond = cross_entropy(hc.out, cond_target, grads ? &dc : nullptr);

                out.prop_unit += kinv * l_unit;
                out.prop_mant += kinv * em * em;
                out.prop_exp += kinv * ee * ee;
                out.prop_cond += kinv * l_cond;

                if (grads) {
                    for (double& v : du) v *= w.unit * kinv;
                    const double dm = w.mant * kinv * 2.0 * em;
                    const double de = w.exp * kinv * 2.0 * ee;
                    for (double& v : dc) v *= w.cond * kinv;
                    mlp_backward(params.head_unit(), params.grad_head_unit(*grads), q.qnum.data(),
                                 hu.hpre.data(), hu.hpost.data(), du.data(), q.dqnum.data());
                    mlp_backward(params.head_mantissa(), params.grad_head_mantissa(*grads),
                                 q.qnum.data(), hm.hpre.data(), hm.hpost.data(), &dm,
                                 q.dqnum.data());
                    mlp_backward(params.head_exponent(), params.grad_head_exponent(*grads),
                                 q.qnum.data(), he.hpre.data(), he.hpost.data(), &de,
                                 q.dqnum.data());
                    mlp_backward(params.head_cond(), params.grad_head_cond(*grads), q.qnum.data(),
                                 hc.hpre.data(), hc.hpost.data(), dc.data(), q.dqnum.data());
                }
            }
        }
    }

    // ---------------- detection ----------------
    if (w.det != 0.0) {
        size_t total_tokens = 0;
        for (const auto& q : qs) total_tokens += q.tokens.size();
        const double minv = 1.0 / static_cast<double>(total_tokens);
        for (int k = 0; k < B; ++k) {
            QueryState& q = qs[static_cast<size_t>(k)];
            const auto& labels = batch[static_cast<size_t>(k)].token_labels;
            for (int i = 0; i < q.pre.rows; ++i) {
                const double a = q.gcache[static_cast<size_t>(i)].det_a;
                const double y = labels[static_cast<size_t>(i)] ? 1.0 : 0.0;
                out.det += minv * (softplus(-a) + (1.0 - y) * a);
                if (grads) {
                    const double da = w.det * minv * (sigmoid(a) - y);
                    mlp_backward(params.detector(), params.grad_detector(*grads), q.pre.row(i),
                                 q.gcache[static_cast<size_t>(i)].det_hpre.data(),
                                 q.gcache[static_cast<size_t>(i)].det_hpost.data(), &da,
                                 q.dpre.row(i));
                }
            }
        }
    }

    // ---------------- backward: pooled vector, gate, encoder ----------------
    if (grads) {
        for (int k = 0; k < B; ++k) {
            QueryState& q = qs[static_cast<size_t>(k)];
            if (q.has_qnum) {
                Mat& target = cfg.cont_uses_gated ? q.dgated : q.dpre;
                const double inv = 1.0 / q.nmask;
                for (int i = 0; i < target.rows; ++i) {
                    if (!q.mask[static_cast<size_t>(i)]) continue;
                    double* row = target.row(i);
                    for (int r = 0; r < d; ++r) row[r] += inv * q.dqnum[static_cast<size_t>(r)];
                }
            }
            gate_backward(q.pre, q.gcache, q.dgated, params, *grads, q.dpre);
            encode_backward(q.cache, q.pre, q.dpre, params, *grads);
        }
        for (int c = 0; c < C; ++c) {
            CandState& cd = cs[static_cast<size_t>(c)];
            encode_backward(cd.cache, cd.e, cd.de, params, *grads);
        }
    }

    out.prop = out.prop_unit + out.prop_mant + out.prop_exp + out.prop_cond;
    out.total = w.ret * out.ret + w.cont * out.cont + w.det * out.det + w.unit * out.prop_unit +
                w.mant * out.prop_mant + w.exp * out.prop_exp + w.cond * out.prop_cond;
    return out;
}

}  // namespace ncb
