#include "ncb/scoring.hpp"

namespace ncb {

Score maxsim(const Mat& q, const Mat& d) {
    if (d.rows <= 0) throw data_error("maxsim: document has no rows");
    if (q.cols != d.cols) throw data_error("maxsim: dimension mismatch");
    Score s;
    s.per_token_argmax.resize(static_cast<size_t>(q.rows));
    s.per_token_max.resize(static_cast<size_t>(q.rows));
    for (int i = 0; i < q.rows; ++i) {
        const double* qi = q.row(i);
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int j = 0; j < d.rows; ++j) {
            const double v = dot(qi, d.row(j), q.cols);
            if (v > best) {  // strict: ties keep the lowest j
                best = v;
                arg = j;
            }
        }
        s.per_token_argmax[static_cast<size_t>(i)] = arg;
        s.per_token_max[static_cast<size_t>(i)] = best;
        s.value += best;
    }
    return s;
}

double maxsim_value(const Mat& q, const double* rows, int n_rows) {
    double value = 0.0;
    for (int i = 0; i < q.rows; ++i) {
        const double* qi = q.row(i);
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_rows; ++j) {
            const double v = dot(qi, rows + static_cast<size_t>(j) * q.cols, q.cols);
            if (v > best) best = v;
        }
        value += best;
    }
    return value;
}

Score gated_maxsim(const QueryEmbeddings& q, const DocEmbeddings& d) { return maxsim(q.e, d.e); }

std::optional<std::vector<double>> mean_pool_numeric(const QueryEmbeddings& q) {
    const int d = q.e_pre.cols;
    std::vector<double> pooled(static_cast<size_t>(d), 0.0);
    int count = 0;
    for (int i = 0; i < q.e_pre.rows; ++i) {
        if (!q.numeric_mask[static_cast<size_t>(i)]) continue;
        const double* row = q.e_pre.row(i);
        for (int r = 0; r < d; ++r) pooled[static_cast<size_t>(r)] += row[r];
        ++count;
    }
    if (count == 0) return std::nullopt;
    const double inv = 1.0 / count;
    for (double& v : pooled) v *= inv;
    return pooled;
}

double s_cont(const std::vector<double>& q_num, const Mat& d, int* argmax) {
    if (d.rows <= 0) throw data_error("s_cont: document has no rows");
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int j = 0; j < d.rows; ++j) {
        const double v = dot(q_num.data(), d.row(j), d.cols);
        if (v > best) {
            best = v;
            arg = j;
        }
    }
    if (argmax) *argmax = arg;
    return best;
}

}  // namespace ncb
