#pragma once

// Compressed late-interaction index: k-means centroids over document token
// embeddings, per-token residual scalar quantization (1/2/4/8 bits), probe-
// based candidate generation, and exact decompress-and-rerank scoring. The
// on-disk format ("NCBI") is little-endian with no padding.

#include <cstdint>
#include <string>
#include <vector>

#include "ncb/embedder.hpp"
#include "ncb/scoring.hpp"

namespace ncb {

struct IndexConfig {
    int k_centroids = 0;    // 0: auto = 4*sqrt(n_tokens) rounded to a power of two
    int nbits = 8;          // bits per residual code, one of {1, 2, 4, 8}
    int nprobe = 8;         // centroids probed per query row at search time
    int kmeans_iters = 20;  // Lloyd iterations after seeding
    uint64_t seed = 42;
    bool store_raw = false;  // also keep exact residuals (lossless debug mode)
    int threads = 1;         // assignment/quantization parallelism
};

// Auto centroid count: 4*sqrt(n) rounded to the nearest power of two,
// floor 16, capped at n.
int default_k_centroids(int64_t n_tokens);

// Lloyd's algorithm with seeded k-means++ initialization. `points` is n x d
// row-major. Assignment ties break toward the lowest centroid id; a cluster
// left empty is re-seeded from the point farthest from its assigned centroid.
// iters = 0 returns the initialization unchanged. Throws data_error if n < k.
std::vector<double> kmeans(const std::vector<double>& points, int64_t n, int d, int k, int iters,
                           uint64_t seed, int threads = 1);

// Uniform per-token scalar quantization of a residual vector. offset = min(r),
// scale = (max(r) - min(r)) / (2^nbits - 1) (0 for a constant vector); both
// are stored as f32 and codes are derived from the stored values so the
// reconstruction bound |err| <= scale/2 holds against what the file records.
struct QuantizedVec {
    std::vector<uint32_t> codes;
    float scale = 0.0f;
    float offset = 0.0f;
};
QuantizedVec quantize_residual(const double* r, int d, int nbits);

struct CompressedIndex {
    int d = 0;
    int k = 0;
    int nbits = 8;
    int64_t n_docs = 0;
    int64_t n_tokens = 0;
    std::vector<float> centroids;      // k x d
    std::vector<uint32_t> tok_doc;     // per token: owning document
    std::vector<uint32_t> tok_centroid;  // per token: assigned centroid
    std::vector<float> scale;          // per token
    std::vector<float> offset;         // per token
    std::vector<uint8_t> codes;        // bit-packed, ceil(n_tokens*d*nbits/8) bytes
    std::vector<uint32_t> doc_len;     // tokens per document
    bool has_raw = false;
    std::vector<double> raw;           // exact token rows when has_raw (lossless debug)

    // Derived at build/load time; not serialized.
    std::vector<int64_t> doc_start;                 // n_docs + 1 prefix sums
    std::vector<std::vector<uint32_t>> centroid_docs;  // centroid -> sorted doc list

    void finalize();  // recompute the derived members and validate counts

    // Unpack token t's code for dimension j.
    uint32_t code_at(int64_t t, int j) const;
    // Reconstruct token t into out[0..d): centroid + offset + scale*code,
    // or the stored exact row when has_raw.
    void reconstruct(int64_t t, double* out) const;

    size_t code_region_bytes() const { return codes.size(); }
    size_t file_bytes() const;  // exact serialized size
};

// Builds the index over gate-free document encodings. Documents must be
// nonempty and carry dense ids 0..n-1 in order (the on-disk format stores no
// id table). Byte-deterministic given (corpus, cfg).
CompressedIndex build_index(const std::vector<DocEmbeddings>& corpus, const IndexConfig& cfg);

// Stage 1: per query row, rank centroids by dot product and take the union of
// documents owning tokens in the top-nprobe centroids. Stage 2: reconstruct
// candidates and score with exact gated MaxSim. Descending score, ascending
// doc id on ties. Fewer candidates than top_k yields a shorter list.
std::vector<std::pair<int64_t, double>> search(const CompressedIndex& index,
                                               const QueryEmbeddings& q, int top_k, int nprobe);

void save_index(const CompressedIndex& index, const std::string& path);
CompressedIndex load_index(const std::string& path);

}  // namespace ncb
