#pragma once

// Shared plumbing: error types, deterministic RNG, a minimal row-major
// matrix, little-endian binary IO, and a chunked parallel_for.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncb {

// Malformed or unreadable input files / byte streams.
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Semantically invalid data (empty corpus, bad labels, non-finite loss, ...).
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 raw draws are specified bit-exactly by the
// standard; the distributions below are hand-rolled because std::*_distribution
// sequences are implementation-defined and we need cross-platform determinism.
// ---------------------------------------------------------------------------
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
    uint64_t below(uint64_t n) { return gen_() % n; }

    // Standard normal via Box-Muller (cached second value).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = unit(), u2 = unit();
        while (u1 <= 0.0) u1 = unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a 64-bit, seed folded into the offset basis. Used for feature hashing.
inline uint64_t hash64(uint64_t seed, const char* data, size_t len) {
    uint64_t h = 0xcbf29ce484222325ull ^ seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ull;
    }
    h ^= h >> 32;
    return h;
}

// ---------------------------------------------------------------------------
// Minimal row-major f64 matrix.
// ---------------------------------------------------------------------------
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
    bool empty() const { return rows == 0; }
};

inline double dot(const double* x, const double* y, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const double* x, int n) { return std::sqrt(dot(x, x, n)); }

// ---------------------------------------------------------------------------
// Little-endian binary IO over an abstract byte sink/source, so indexes and
// checkpoints can be built in memory (byte-identity tests) or on disk.
// ---------------------------------------------------------------------------
struct ByteSink {
    std::string bytes;
    void put(const void* p, size_t n) { bytes.append(static_cast<const char*>(p), n); }
};

struct ByteSource {
    const char* p;
    size_t left;
    explicit ByteSource(const std::string& s) : p(s.data()), left(s.size()) {}
    void get(void* out, size_t n) {
        if (n > left) throw format_error("truncated input: wanted " + std::to_string(n) +
                                         " bytes, have " + std::to_string(left));
        std::memcpy(out, p, n);
        p += n;
        left -= n;
    }
};

// All supported targets are little-endian; memcpy of the native representation
// is the on-disk format. A static_assert guards the assumption.
static_assert(std::endian::native == std::endian::little, "little-endian target required");

template <typename T>
void write_pod(ByteSink& s, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    s.put(&v, sizeof(T));
}

template <typename T>
T read_pod(ByteSource& s) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    s.get(&v, sizeof(T));
    return v;
}

template <typename T>
void write_vec(ByteSink& s, const std::vector<T>& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if (!v.empty()) s.put(v.data(), v.size() * sizeof(T));
}

template <typename T>
void read_vec(ByteSource& s, std::vector<T>& v, size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    v.resize(count);
    if (count) s.get(v.data(), count * sizeof(T));
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

// Runs fn(i) for i in [0, n). Deterministic as long as iterations touch
// disjoint output slots; thread count never changes results.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

}  // namespace ncb
