#pragma once

// Binary exchange formats. All integers and floats are little-endian; floats
// are IEEE-754 binary32.
//
//   embeddings:  "FLIPEMB1" | u32 rows | u32 dim | rows*dim f32 (row-major)
//   checkpoint:  "FLIPCKP1" | u32 kind | u32 |V| | u32 d | u32 r | u64 vocab_hash
//                | u32 epoch | f64 dev_recall | u32 config_len | config bytes
//                | parameters (A, B, b  or  W, b), f32 row-major
//
// Writers go through a temporary file and rename, so readers never observe a
// partially written file.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flip/diagnostics.hpp"
#include "flip/model.hpp"

namespace flip {

enum class IoErrc {
    open_failed = 1,
    bad_magic,
    truncated,
    non_finite,
    kind_dims_mismatch,
    hash_mismatch,
    bad_manifest,
    row_mismatch,
};

inline const char* to_string(IoErrc e) {
    switch (e) {
        case IoErrc::open_failed: return "open failed";
        case IoErrc::bad_magic: return "bad magic";
        case IoErrc::truncated: return "truncated payload";
        case IoErrc::non_finite: return "non-finite value";
        case IoErrc::kind_dims_mismatch: return "kind/dims mismatch";
        case IoErrc::hash_mismatch: return "vocabulary hash mismatch";
        case IoErrc::bad_manifest: return "bad manifest";
        case IoErrc::row_mismatch: return "row count mismatch";
    }
    return "unknown";
}

class IoError : public std::runtime_error {
public:
    IoError(IoErrc code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}
    IoErrc code() const noexcept { return code_; }

private:
    IoErrc code_;
};

inline constexpr std::array<char, 8> kEmbeddingMagic{'F', 'L', 'I', 'P', 'E', 'M', 'B', '1'};
inline constexpr std::array<char, 8> kCheckpointMagic{'F', 'L', 'I', 'P', 'C', 'K', 'P', '1'};

/// N x d row-major float32 matrix of sentence embeddings.
struct EmbeddingSet {
    std::uint32_t rows = 0;
    std::uint32_t dim = 0;
    std::vector<float> data;

    EmbeddingSet() = default;
    EmbeddingSet(std::uint32_t n, std::uint32_t d) : rows(n), dim(d), data(static_cast<std::size_t>(n) * d, 0.0f) {}

    std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
    std::span<float> row(std::size_t i) { return {data.data() + i * dim, dim}; }

    Matrix<float> matrix() const {
        return Eigen::Map<const Matrix<float>>(data.data(), rows, dim);
    }
    static EmbeddingSet from_matrix(const Matrix<float>& m) {
        EmbeddingSet s(static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols()));
        Eigen::Map<Matrix<float>>(s.data.data(), m.rows(), m.cols()) = m;
        return s;
    }
    friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

namespace detail {

class ByteWriter {
public:
    void raw(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    template <typename Real>
    void f32s(const Real* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) f32(static_cast<float>(p[i]));
    }
    const std::vector<char>& bytes() const { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    ByteReader(std::vector<char> bytes, std::string path) : buf_(std::move(bytes)), path_(std::move(path)) {}

    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw IoError(IoErrc::truncated, path_);
    }
    std::span<const char> raw(std::size_t n) {
        need(n);
        std::span<const char> s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() {
        auto s = raw(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
        return v;
    }
    std::uint64_t u64() {
        auto s = raw(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
        return v;
    }
    float f32() {
        const float v = std::bit_cast<float>(u32());
        if (!std::isfinite(v)) throw IoError(IoErrc::non_finite, path_);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    template <typename Real>
    void f32s(Real* out, std::size_t n) {
        need(n * 4);
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<Real>(f32());
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    const std::string& path() const { return path_; }

private:
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    std::string path_;
};

inline std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrc::open_failed, path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_atomically(const std::string& path, std::span<const char> bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(IoErrc::open_failed, tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError(IoErrc::open_failed, tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(IoErrc::open_failed, path + " (" + ec.message() + ")");
}

inline void expect_magic(ByteReader& r, const std::array<char, 8>& magic) {
    auto got = r.raw(8);
    if (!std::equal(got.begin(), got.end(), magic.begin())) throw IoError(IoErrc::bad_magic, r.path());
}

}  // namespace detail

inline void write_embeddings(const EmbeddingSet& set, const std::string& path) {
    if (set.data.size() != static_cast<std::size_t>(set.rows) * set.dim)
        throw IoError(IoErrc::kind_dims_mismatch, "embedding data size does not match rows*dim");
    for (float v : set.data)
        if (!std::isfinite(v)) throw IoError(IoErrc::non_finite, path);
    detail::ByteWriter w;
    w.raw(kEmbeddingMagic.data(), kEmbeddingMagic.size());
    w.u32(set.rows);
    w.u32(set.dim);
    w.f32s(set.data.data(), set.data.size());
    detail::write_atomically(path, w.bytes());
}

inline EmbeddingSet read_embeddings(const std::string& path) {
    detail::ByteReader r(detail::slurp(path), path);
    detail::expect_magic(r, kEmbeddingMagic);
    EmbeddingSet set;
    set.rows = r.u32();
    set.dim = r.u32();
    if (set.dim == 0) throw IoError(IoErrc::kind_dims_mismatch, path + ": dim must be >= 1");
    const std::size_t n = static_cast<std::size_t>(set.rows) * set.dim;
    r.need(n * 4);
    set.data.resize(n);
    r.f32s(set.data.data(), n);
    if (r.remaining() != 0) throw IoError(IoErrc::kind_dims_mismatch, path + ": payload larger than rows*dim");
    return set;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::span<const char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t hash_file(const std::string& path) {
    const auto bytes = detail::slurp(path);
    return fnv1a64(bytes);
}

struct CheckpointMeta {
    std::uint32_t epoch = 0;
    double dev_recall = 0.0;
    std::string config;  // JSON echo of the effective training configuration
    friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
    ModelParams<float> params;
    std::uint64_t vocab_hash = 0;
    CheckpointMeta meta;
    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline std::vector<char> encode_checkpoint(const Checkpoint& ck) {
    const auto& p = ck.params;
    p.validate();
    detail::ByteWriter w;
    w.raw(kCheckpointMagic.data(), kCheckpointMagic.size());
    w.u32(static_cast<std::uint32_t>(p.kind));
    w.u32(static_cast<std::uint32_t>(p.vocab_size()));
    w.u32(static_cast<std::uint32_t>(p.dim()));
    w.u32(static_cast<std::uint32_t>(p.rank()));
    w.u64(ck.vocab_hash);
    w.u32(ck.meta.epoch);
    w.f64(ck.meta.dev_recall);
    w.u32(static_cast<std::uint32_t>(ck.meta.config.size()));
    w.raw(ck.meta.config.data(), ck.meta.config.size());
    if (p.kind == ModelKind::Factorized) {
        w.f32s(p.A.data(), static_cast<std::size_t>(p.A.size()));
        w.f32s(p.B.data(), static_cast<std::size_t>(p.B.size()));
    } else {
        w.f32s(p.W.data(), static_cast<std::size_t>(p.W.size()));
    }
    w.f32s(p.b.data(), static_cast<std::size_t>(p.b.size()));
    return w.bytes();
}

inline void write_checkpoint(const Checkpoint& ck, const std::string& path) {
    detail::write_atomically(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::string& path) {
    detail::ByteReader r(detail::slurp(path), path);
    detail::expect_magic(r, kCheckpointMagic);
    Checkpoint ck;
    const std::uint32_t kind = r.u32();
    const std::uint32_t V = r.u32(), d = r.u32(), rank = r.u32();
    ck.vocab_hash = r.u64();
    ck.meta.epoch = r.u32();
    ck.meta.dev_recall = r.f64();
    const std::uint32_t config_len = r.u32();
    auto cfg = r.raw(config_len);
    ck.meta.config.assign(cfg.begin(), cfg.end());

    const bool dims_ok = V > 0 && d > 0 &&
                         ((kind == static_cast<std::uint32_t>(ModelKind::Factorized) && rank > 0 && rank <= d) ||
                          (kind == static_cast<std::uint32_t>(ModelKind::Full) && rank == 0));
    if (!dims_ok) throw IoError(IoErrc::kind_dims_mismatch, path);

    auto& p = ck.params;
    p.kind = static_cast<ModelKind>(kind);
    if (p.kind == ModelKind::Factorized) {
        p.A.resize(V, rank);
        p.B.resize(rank, d);
        r.f32s(p.A.data(), static_cast<std::size_t>(p.A.size()));
        r.f32s(p.B.data(), static_cast<std::size_t>(p.B.size()));
    } else {
        p.W.resize(V, d);
        r.f32s(p.W.data(), static_cast<std::size_t>(p.W.size()));
    }
    p.b.resize(V);
    r.f32s(p.b.data(), V);
    if (r.remaining() != 0) throw IoError(IoErrc::kind_dims_mismatch, path + ": trailing bytes after parameters");
    return ck;
}

/// Checks that a checkpoint belongs to the vocabulary with hash `vocab_hash`.
/// Strict mode throws; otherwise a warning is emitted and false returned.
inline bool verify_vocabulary(const Checkpoint& ck, std::uint64_t vocab_hash, bool strict) {
    if (ck.vocab_hash == vocab_hash) return true;
    const std::string msg = "checkpoint was trained with a different vocabulary";
    if (strict) throw IoError(IoErrc::hash_mismatch, msg);
    warn(msg);
    return false;
}

// ---- manifest ----------------------------------------------------------------

/// Flat `key: value` lines; relative paths resolve against the manifest's directory.
struct DatasetManifest {
    std::string primary_embeddings;
    std::optional<std::string> secondary_embeddings;
    std::string corpus;
    std::string vocabulary;
    double alpha = 0.5;
};

namespace detail {
inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    const auto end = s.find_last_not_of(ws);
    s.erase(end == std::string::npos ? 0 : end + 1);
    return s;
}
}  // namespace detail

inline DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {},
                                      const std::string& origin = "<manifest>") {
    DatasetManifest m;
    bool have_primary = false, have_corpus = false, have_vocab = false, have_alpha = false;
    auto resolve = [&](const std::string& v) {
        std::filesystem::path p(v);
        return (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal().string();
    };
    std::size_t line_no = 0;
    std::string line;
    for (std::size_t pos = 0; pos <= text.size();) {
        auto nl = text.find('\n', pos);
        line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw IoError(IoErrc::bad_manifest, origin + ":" + std::to_string(line_no) + ": expected key: value");
        const auto key = detail::trim(line.substr(0, colon));
        const auto value = detail::trim(line.substr(colon + 1));
        if (key == "primary_embeddings") {
            m.primary_embeddings = resolve(value);
            have_primary = true;
        } else if (key == "secondary_embeddings") {
            if (!value.empty()) m.secondary_embeddings = resolve(value);
        } else if (key == "corpus") {
            m.corpus = resolve(value);
            have_corpus = true;
        } else if (key == "vocabulary") {
            m.vocabulary = resolve(value);
            have_vocab = true;
        } else if (key == "alpha") {
            try {
                std::size_t used = 0;
                m.alpha = std::stod(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
            } catch (const std::exception&) {
                throw IoError(IoErrc::bad_manifest, origin + ": alpha is not a number: " + value);
            }
            if (!(m.alpha >= 0.0 && m.alpha <= 1.0)) throw IoError(IoErrc::bad_manifest, origin + ": alpha outside [0,1]");
            have_alpha = true;
        } else {
            throw IoError(IoErrc::bad_manifest, origin + ": unknown key '" + key + "'");
        }
    }
    if (!have_primary || !have_corpus || !have_vocab || !have_alpha)
        throw IoError(IoErrc::bad_manifest, origin + ": requires primary_embeddings, corpus, vocabulary and alpha");
    return m;
}

inline DatasetManifest read_manifest(const std::string& path) {
    const auto bytes = detail::slurp(path);
    auto m = parse_manifest(std::string(bytes.begin(), bytes.end()), std::filesystem::path(path).parent_path(), path);
    for (const auto* f : {&m.primary_embeddings, &m.corpus, &m.vocabulary})
        if (!std::filesystem::exists(*f)) throw IoError(IoErrc::open_failed, path + ": referenced file missing: " + *f);
    if (m.secondary_embeddings && !std::filesystem::exists(*m.secondary_embeddings))
        throw IoError(IoErrc::open_failed, path + ": referenced file missing: " + *m.secondary_embeddings);
    return m;
}

/// Paths are written as given; pass paths relative to the manifest location to keep datasets relocatable.
inline void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::string text = "primary_embeddings: " + m.primary_embeddings + "\n";
    text += "secondary_embeddings: " + m.secondary_embeddings.value_or("") + "\n";
    text += "corpus: " + m.corpus + "\n";
    text += "vocabulary: " + m.vocabulary + "\n";
    char alpha[32];
    std::snprintf(alpha, sizeof alpha, "%.17g", m.alpha);
    text += std::string("alpha: ") + alpha + "\n";
    detail::write_atomically(path, text);
}

}  // namespace flip
