#include "ncb/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <thread>

#include "ncb/common.hpp"

namespace ncb {

namespace {

constexpr char kMagic[4] = {'N', 'C', 'B', 'I'};
constexpr uint32_t kVersion = 1;

double sqdist(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int j = 0; j < d; j++) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return s;
}

// Runs fn(lo, hi) over fixed-order partitions of [0, n). The partitioning
// depends only on (n, threads), so results written per element stay
// deterministic regardless of scheduling.
void parallel_ranges(int64_t n, int threads, const std::function<void(int64_t, int64_t)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || n < 1024) {
        fn(0, n);
        return;
    }
    const int64_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; t++) {
        const int64_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(fn, lo, hi);
    }
    for (auto& th : pool) th.join();
}

// Nearest centroid by squared distance, lowest id on ties.
int nearest(const double* x, const std::vector<double>& centroids, int k, int d) {
    int best = 0;
    double best_d = sqdist(x, centroids.data(), d);
    for (int c = 1; c < k; c++) {
        const double dist = sqdist(x, centroids.data() + (size_t)c * d, d);
        if (dist < best_d) {
            best_d = dist;
            best = c;
        }
    }
    return best;
}

void write_bytes(std::string& out, const void* p, size_t n) {
    out.append(reinterpret_cast<const char*>(p), n);
}

template <typename T>
void write_pod(std::string& out, T v) {
    write_bytes(out, &v, sizeof(T));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void read(void* p, size_t n) {
        if (pos + n > buf.size()) throw format_error("index file truncated");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    template <typename T>
    T pod() {
        T v;
        read(&v, sizeof(T));
        return v;
    }
    template <typename T>
    std::vector<T> array(size_t n) {
        std::vector<T> v(n);
        if (n) read(v.data(), n * sizeof(T));
        return v;
    }
};

}  // namespace

int default_k_centroids(int64_t n_tokens) {
    const double target = 4.0 * std::sqrt((double)n_tokens);
    int k = 1 << std::max(0, (int)std::lround(std::log2(std::max(1.0, target))));
    k = std::max(k, 16);
    return (int)std::min<int64_t>(k, n_tokens);
}

std::vector<double> kmeans(const std::vector<double>& points, int64_t n, int d, int k, int iters,
                           uint64_t seed, int threads) {
    if (n <= 0 || d <= 0 || k <= 0) throw data_error("kmeans: empty input");
    if ((int64_t)points.size() != n * d) throw data_error("kmeans: size mismatch");
    if (n < k) throw data_error("kmeans: fewer points than centroids");

    Rng rng(seed);
    std::vector<double> centroids((size_t)k * d);
    const double* pts = points.data();

    // k-means++ seeding: first centroid uniform, then D^2 sampling.
    std::vector<double> dist2((size_t)n, std::numeric_limits<double>::infinity());
    {
        const int64_t first = (int64_t)rng.below((uint64_t)n);
        std::copy_n(pts + first * d, d, centroids.begin());
    }
    for (int c = 1; c < k; c++) {
        const double* prev = centroids.data() + (size_t)(c - 1) * d;
        double total = 0.0;
        for (int64_t i = 0; i < n; i++) {
            dist2[(size_t)i] = std::min(dist2[(size_t)i], sqdist(pts + i * d, prev, d));
            total += dist2[(size_t)i];
        }
        int64_t pick = -1;
        if (total > 0.0) {
            const double target = rng.unit() * total;
            double acc = 0.0;
            for (int64_t i = 0; i < n; i++) {
                acc += dist2[(size_t)i];
                if (acc >= target && dist2[(size_t)i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick < 0) pick = (int64_t)rng.below((uint64_t)n);  // all points coincide
        std::copy_n(pts + pick * d, d, centroids.begin() + (size_t)c * d);
    }

    std::vector<int> assign((size_t)n, 0);
    for (int it = 0; it < iters; it++) {
        parallel_ranges(n, threads, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; i++) assign[(size_t)i] = nearest(pts + i * d, centroids, k, d);
        });

        std::vector<double> sums((size_t)k * d, 0.0);
        std::vector<int64_t> counts((size_t)k, 0);
        for (int64_t i = 0; i < n; i++) {
            const int c = assign[(size_t)i];
            counts[(size_t)c]++;
            double* s = sums.data() + (size_t)c * d;
            const double* x = pts + i * d;
            for (int j = 0; j < d; j++) s[j] += x[j];
        }
        for (int c = 0; c < k; c++) {
            if (counts[(size_t)c] == 0) continue;
            double* ctr = centroids.data() + (size_t)c * d;
            const double inv = 1.0 / (double)counts[(size_t)c];
            for (int j = 0; j < d; j++) ctr[j] = sums[(size_t)c * d + j] * inv;
        }

        // Re-seed empty clusters (ascending id) from the farthest point of
        // the current assignment, skipping points already taken this round.
        std::vector<int64_t> taken;
        for (int c = 0; c < k; c++) {
            if (counts[(size_t)c] != 0) continue;
            int64_t far_i = -1;
            double far_d = -1.0;
            for (int64_t i = 0; i < n; i++) {
                if (std::find(taken.begin(), taken.end(), i) != taken.end()) continue;
                const double dist =
                    sqdist(pts + i * d, centroids.data() + (size_t)assign[(size_t)i] * d, d);
                if (dist > far_d) {
                    far_d = dist;
                    far_i = i;
                }
            }
            if (far_i < 0) break;
            std::copy_n(pts + far_i * d, d, centroids.begin() + (size_t)c * d);
            taken.push_back(far_i);
        }
    }
    return centroids;
}

QuantizedVec quantize_residual(const double* r, int d, int nbits) {
    if (nbits != 1 && nbits != 2 && nbits != 4 && nbits != 8)
        throw data_error("quantize_residual: nbits must be 1, 2, 4, or 8");
    QuantizedVec out;
    out.codes.resize((size_t)d);
    double lo = r[0], hi = r[0];
    for (int j = 1; j < d; j++) {
        lo = std::min(lo, r[j]);
        hi = std::max(hi, r[j]);
    }
    const uint32_t levels = (1u << nbits) - 1u;
    out.offset = (float)lo;
    out.scale = hi > lo ? (float)((hi - lo) / (double)levels) : 0.0f;
    if (out.scale == 0.0f) return out;  // constant residual: all codes zero
    const double off = (double)out.offset, sc = (double)out.scale;
    for (int j = 0; j < d; j++) {
        const long long c = std::llround((r[j] - off) / sc);
        out.codes[(size_t)j] = (uint32_t)std::clamp(c, 0ll, (long long)levels);
    }
    return out;
}

void CompressedIndex::finalize() {
    if ((int64_t)tok_doc.size() != n_tokens || (int64_t)tok_centroid.size() != n_tokens ||
        (int64_t)scale.size() != n_tokens || (int64_t)offset.size() != n_tokens ||
        (int64_t)doc_len.size() != n_docs || (int64_t)centroids.size() != (int64_t)k * d)
        throw format_error("index: inconsistent table sizes");
    const size_t want = (size_t)((n_tokens * d * nbits + 7) / 8);
    if (codes.size() != want) throw format_error("index: code region size mismatch");
    if (has_raw && (int64_t)raw.size() != n_tokens * d)
        throw format_error("index: raw residual size mismatch");

    doc_start.assign((size_t)n_docs + 1, 0);
    for (int64_t i = 0; i < n_docs; i++)
        doc_start[(size_t)i + 1] = doc_start[(size_t)i] + doc_len[(size_t)i];
    if (doc_start.back() != n_tokens) throw format_error("index: doc lengths do not sum to tokens");

    centroid_docs.assign((size_t)k, {});
    for (int64_t t = 0; t < n_tokens; t++) {
        if (tok_centroid[(size_t)t] >= (uint32_t)k) throw format_error("index: centroid id out of range");
        if (tok_doc[(size_t)t] >= (uint64_t)n_docs) throw format_error("index: doc id out of range");
        auto& lst = centroid_docs[tok_centroid[(size_t)t]];
        if (lst.empty() || lst.back() != tok_doc[(size_t)t]) lst.push_back(tok_doc[(size_t)t]);
    }
    for (auto& lst : centroid_docs) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }
}

uint32_t CompressedIndex::code_at(int64_t t, int j) const {
    const int64_t idx = t * d + j;              // code index in the global stream
    const int per_byte = 8 / nbits;             // nbits divides 8
    const size_t byte = (size_t)(idx / per_byte);
    const int slot = (int)(idx % per_byte);
    return (uint32_t)(codes[byte] >> (slot * nbits)) & ((1u << nbits) - 1u);
}

void CompressedIndex::reconstruct(int64_t t, double* out) const {
    if (has_raw) {  // lossless debug mode: the exact row was kept
        std::copy_n(raw.data() + (size_t)t * d, d, out);
        return;
    }
    const float* ctr = centroids.data() + (size_t)tok_centroid[(size_t)t] * d;
    const double sc = (double)scale[(size_t)t], off = (double)offset[(size_t)t];
    for (int j = 0; j < d; j++) out[j] = (double)ctr[j] + off + sc * (double)code_at(t, j);
}

size_t CompressedIndex::file_bytes() const {
    size_t n = 4 + 4 + 4 + 4 + 1 + 8 + 8;          // magic, version, d, k, nbits, n_docs, n_tokens
    n += (size_t)k * d * 4;                        // centroids
    n += (size_t)n_tokens * (4 + 4 + 4 + 4);       // tok_doc, tok_centroid, scale, offset
    n += codes.size();                             // packed code region
    n += (size_t)n_docs * 4;                       // doc lengths
    n += 1;                                        // raw flag
    if (has_raw) n += (size_t)n_tokens * d * 8;    // exact residuals
    return n;
}

CompressedIndex build_index(const std::vector<DocEmbeddings>& corpus, const IndexConfig& cfg) {
    if (corpus.empty()) throw data_error("build_index: empty corpus");
    if (cfg.nbits != 1 && cfg.nbits != 2 && cfg.nbits != 4 && cfg.nbits != 8)
        throw data_error("build_index: nbits must be 1, 2, 4, or 8");

    const int d = corpus[0].e.cols;
    int64_t n_tokens = 0;
    for (size_t i = 0; i < corpus.size(); i++) {
        const auto& doc = corpus[i];
        if (doc.e.rows <= 0) throw data_error("build_index: empty document " + std::to_string(i));
        if (doc.e.cols != d) throw data_error("build_index: dimension mismatch");
        if (doc.doc_id != (int64_t)i)
            throw data_error("build_index: documents must carry dense ids 0..n-1 in order");
        n_tokens += doc.e.rows;
    }

    // Flatten all token rows in (doc, position) order.
    std::vector<double> pts((size_t)n_tokens * d);
    {
        size_t at = 0;
        for (const auto& doc : corpus) {
            std::copy(doc.e.a.begin(), doc.e.a.end(), pts.begin() + (int64_t)at);
            at += doc.e.a.size();
        }
    }

    CompressedIndex index;
    index.d = d;
    index.nbits = cfg.nbits;
    index.n_docs = (int64_t)corpus.size();
    index.n_tokens = n_tokens;
    index.k = cfg.k_centroids > 0 ? cfg.k_centroids : default_k_centroids(n_tokens);
    if (n_tokens < index.k) throw data_error("build_index: fewer tokens than centroids");

    const std::vector<double> ctr64 =
        kmeans(pts, n_tokens, d, index.k, cfg.kmeans_iters, cfg.seed, cfg.threads);
    index.centroids.assign(ctr64.begin(), ctr64.end());  // f64 -> f32 storage

    index.tok_doc.resize((size_t)n_tokens);
    index.tok_centroid.resize((size_t)n_tokens);
    index.scale.resize((size_t)n_tokens);
    index.offset.resize((size_t)n_tokens);
    index.codes.assign((size_t)((n_tokens * (int64_t)d * cfg.nbits + 7) / 8), 0);
    if (cfg.store_raw) {
        index.has_raw = true;
        index.raw.resize((size_t)n_tokens * d);
    }
    index.doc_len.resize(corpus.size());
    {
        size_t t = 0;
        for (size_t i = 0; i < corpus.size(); i++) {
            index.doc_len[i] = (uint32_t)corpus[i].e.rows;
            for (int r = 0; r < corpus[i].e.rows; r++) index.tok_doc[t++] = (uint32_t)i;
        }
    }

    // Assign against the stored f32 centroids so search sees the same
    // geometry, then quantize the residuals.
    std::vector<double> ctr_stored((size_t)index.k * d);
    for (size_t i = 0; i < ctr_stored.size(); i++) ctr_stored[i] = (double)index.centroids[i];
    const int per_byte = 8 / cfg.nbits;
    parallel_ranges(n_tokens, cfg.threads, [&](int64_t lo, int64_t hi) {
        std::vector<double> resid((size_t)d);
        for (int64_t t = lo; t < hi; t++) {
            const double* x = pts.data() + t * d;
            const int c = nearest(x, ctr_stored, index.k, d);
            index.tok_centroid[(size_t)t] = (uint32_t)c;
            const double* ctr = ctr_stored.data() + (size_t)c * d;
            for (int j = 0; j < d; j++) resid[(size_t)j] = x[j] - ctr[j];
            const QuantizedVec qv = quantize_residual(resid.data(), d, cfg.nbits);
            index.scale[(size_t)t] = qv.scale;
            index.offset[(size_t)t] = qv.offset;
            for (int j = 0; j < d; j++) {
                const int64_t idx = t * d + j;
                index.codes[(size_t)(idx / per_byte)] |=
                    (uint8_t)(qv.codes[(size_t)j] << ((idx % per_byte) * cfg.nbits));
            }
            if (index.has_raw) std::copy_n(x, d, index.raw.begin() + t * d);
        }
    });

    index.finalize();
    return index;
}

std::vector<std::pair<int64_t, double>> search(const CompressedIndex& index,
                                               const QueryEmbeddings& q, int top_k, int nprobe) {
    if (top_k < 1) throw data_error("search: top_k must be >= 1");
    if (q.e.cols != index.d) throw data_error("search: dimension mismatch");
    nprobe = std::clamp(nprobe, 1, index.k);

    // Stage 1: union of documents under each row's top-nprobe centroids.
    std::vector<uint8_t> in_cand((size_t)index.n_docs, 0);
    std::vector<std::pair<double, int>> cd((size_t)index.k);
    for (int i = 0; i < q.e.rows; i++) {
        const double* qi = q.e.row(i);
        for (int c = 0; c < index.k; c++) {
            const float* ctr = index.centroids.data() + (size_t)c * index.d;
            double dot = 0.0;
            for (int j = 0; j < index.d; j++) dot += qi[j] * (double)ctr[j];
            cd[(size_t)c] = {-dot, c};
        }
        std::partial_sort(cd.begin(), cd.begin() + nprobe, cd.end());
        for (int p = 0; p < nprobe; p++)
            for (uint32_t doc : index.centroid_docs[(size_t)cd[(size_t)p].second]) in_cand[doc] = 1;
    }

    // Stage 2: exact gated MaxSim over reconstructed candidate documents.
    std::vector<std::pair<int64_t, double>> scored;
    Mat doc_mat;
    for (int64_t doc = 0; doc < index.n_docs; doc++) {
        if (!in_cand[(size_t)doc]) continue;
        const int len = (int)index.doc_len[(size_t)doc];
        doc_mat = Mat(len, index.d);
        for (int r = 0; r < len; r++)
            index.reconstruct(index.doc_start[(size_t)doc] + r, doc_mat.row(r));
        scored.emplace_back(doc, maxsim(q.e, doc_mat).value);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if ((int)scored.size() > top_k) scored.resize((size_t)top_k);
    return scored;
}

void save_index(const CompressedIndex& index, const std::string& path) {
    std::string out;
    out.reserve(index.file_bytes());
    write_bytes(out, kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, (uint32_t)index.d);
    write_pod(out, (uint32_t)index.k);
    write_pod(out, (uint8_t)index.nbits);
    write_pod(out, (uint64_t)index.n_docs);
    write_pod(out, (uint64_t)index.n_tokens);
    write_bytes(out, index.centroids.data(), index.centroids.size() * 4);
    write_bytes(out, index.tok_doc.data(), index.tok_doc.size() * 4);
    write_bytes(out, index.tok_centroid.data(), index.tok_centroid.size() * 4);
    write_bytes(out, index.scale.data(), index.scale.size() * 4);
    write_bytes(out, index.offset.data(), index.offset.size() * 4);
    write_bytes(out, index.codes.data(), index.codes.size());
    write_bytes(out, index.doc_len.data(), index.doc_len.size() * 4);
    write_pod(out, (uint8_t)(index.has_raw ? 1 : 0));
    if (index.has_raw) write_bytes(out, index.raw.data(), index.raw.size() * 8);
    if (out.size() != index.file_bytes()) throw format_error("index: serialized size mismatch");
    write_file(path, out);
}

CompressedIndex load_index(const std::string& path) {
    const std::string buf = read_file(path);
    Reader in{buf};
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw format_error("index: bad magic");
    if (in.pod<uint32_t>() != kVersion) throw format_error("index: unsupported version");

    CompressedIndex index;
    index.d = (int)in.pod<uint32_t>();
    index.k = (int)in.pod<uint32_t>();
    index.nbits = (int)in.pod<uint8_t>();
    index.n_docs = (int64_t)in.pod<uint64_t>();
    index.n_tokens = (int64_t)in.pod<uint64_t>();
    if (index.d <= 0 || index.k <= 0 || index.n_docs <= 0 || index.n_tokens <= 0)
        throw format_error("index: bad header counts");
    if (index.nbits != 1 && index.nbits != 2 && index.nbits != 4 && index.nbits != 8)
        throw format_error("index: bad nbits");

    index.centroids = in.array<float>((size_t)index.k * index.d);
    index.tok_doc = in.array<uint32_t>((size_t)index.n_tokens);
    index.tok_centroid = in.array<uint32_t>((size_t)index.n_tokens);
    index.scale = in.array<float>((size_t)index.n_tokens);
    index.offset = in.array<float>((size_t)index.n_tokens);
    index.codes = in.array<uint8_t>((size_t)((index.n_tokens * index.d * index.nbits + 7) / 8));
    index.doc_len = in.array<uint32_t>((size_t)index.n_docs);
    index.has_raw = in.pod<uint8_t>() != 0;
    if (index.has_raw) index.raw = in.array<double>((size_t)index.n_tokens * index.d);
    if (in.pos != buf.size()) throw format_error("index: trailing bytes");

    index.finalize();
    return index;
}

}  // namespace ncb
