#pragma once

// Keyword extraction: rank vocabulary concepts by raw logit and keep the top k.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flip/corpus.hpp"
#include "flip/diagnostics.hpp"
#include "flip/model.hpp"

namespace flip {

struct Keyword {
    std::uint32_t index;
    std::string text;
    double score;
    friend bool operator==(const Keyword&, const Keyword&) = default;
};

struct Extraction {
    std::vector<Keyword> keywords;  // scores non-increasing
    std::size_t k = 0;              // requested count
    bool used_bias = true;
    friend bool operator==(const Extraction&, const Extraction&) = default;
};

/// Indices of the k largest scores; equal scores rank the lower index first.
inline std::vector<std::uint32_t> top_k_indices(std::span<const double> scores, std::size_t k) {
    k = std::min(k, scores.size());
    std::vector<std::uint32_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0u);
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    idx.resize(k);
    return idx;
}

namespace detail {

inline Extraction make_extraction(std::span<const double> z, const Vocabulary& vocab, std::size_t k, bool use_bias) {
    Extraction ex;
    ex.k = k;
    ex.used_bias = use_bias;
    for (auto i : top_k_indices(z, k)) ex.keywords.push_back({i, vocab.concept_at(i), z[i]});
    return ex;
}

template <typename Real>
void check_vocab(const ModelParams<Real>& p, const Vocabulary& vocab) {
    if (vocab.size() != p.vocab_size())
        throw ModelError("vocabulary has " + std::to_string(vocab.size()) + " concepts, model expects " +
                         std::to_string(p.vocab_size()));
}

inline std::size_t clamp_k(std::size_t k, std::size_t vocab_size) {
    if (k > vocab_size) {
        warn("k=" + std::to_string(k) + " exceeds vocabulary size " + std::to_string(vocab_size) + "; clamped");
        return vocab_size;
    }
    return k;
}

}  // namespace detail

template <typename Real>
Extraction extract_keywords(const ModelParams<Real>& params, const Vocabulary& vocab, std::span<const float> u,
                            std::size_t k, bool use_bias = true) {
    if (k == 0) throw ModelError("k must be >= 1");
    detail::check_vocab(params, vocab);
    if (u.size() != params.dim()) throw ModelError("embedding length does not match model dim");
    // Same code path as batch_extract so single and batched scores agree bit for bit.
    const Matrix<float> row = Eigen::Map<const Matrix<float>>(u.data(), 1, static_cast<Eigen::Index>(u.size()));
    const Matrix<double> z = logits_rows(params, row, use_bias);
    return detail::make_extraction({z.data(), static_cast<std::size_t>(z.size())}, vocab, detail::clamp_k(k, vocab.size()),
                                   use_bias);
}

/// Either one k for every row or a per-row k (k = 0 rows give empty extractions).
struct KPolicy {
    std::variant<std::size_t, std::vector<std::size_t>> value;

    static KPolicy fixed(std::size_t k) { return {k}; }
    static KPolicy per_row(std::vector<std::size_t> ks) { return {std::move(ks)}; }
    /// k per row = number of in-vocabulary reference tokens.
    static KPolicy reference_counts(std::span<const Tokens> refs) {
        std::vector<std::size_t> ks;
        ks.reserve(refs.size());
        for (const auto& r : refs) ks.push_back(r.size());
        return per_row(std::move(ks));
    }

    std::size_t at(std::size_t row) const {
        if (const auto* k = std::get_if<std::size_t>(&value)) return *k;
        return std::get<std::vector<std::size_t>>(value).at(row);
    }
};

/// Row-aligned extractions; identical to calling extract_keywords per row.
template <typename Real>
std::vector<Extraction> batch_extract(const ModelParams<Real>& params, const Vocabulary& vocab,
                                      const Matrix<float>& embeddings, const KPolicy& policy, bool use_bias = true,
                                      std::size_t chunk_rows = 512) {
    detail::check_vocab(params, vocab);
    const auto n = static_cast<std::size_t>(embeddings.rows());
    if (const auto* ks = std::get_if<std::vector<std::size_t>>(&policy.value); ks && ks->size() != n)
        throw ModelError("per-row k list does not match embedding rows");
    if (const auto* k = std::get_if<std::size_t>(&policy.value); k && *k == 0) throw ModelError("k must be >= 1");

    std::vector<Extraction> out(n);
    bool warned = false;
    for (std::size_t begin = 0; begin < n; begin += chunk_rows) {
        const std::size_t end = std::min(n, begin + chunk_rows);
        const Matrix<float> rows = embeddings.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
        const Matrix<double> Z = logits_rows(params, rows, use_bias);
        for (std::size_t i = begin; i < end; ++i) {
            std::size_t k = policy.at(i);
            if (k > vocab.size()) {
                if (!warned) k = detail::clamp_k(k, vocab.size());
                k = std::min(k, vocab.size());
                warned = true;
            }
            const auto row = Z.row(static_cast<Eigen::Index>(i - begin));
            out[i] = detail::make_extraction({row.data(), static_cast<std::size_t>(row.size())}, vocab, k, use_bias);
        }
    }
    return out;
}

/// Keeps the first k keywords of an extraction (prefix of the ranking).
inline Extraction truncate(const Extraction& ex, std::size_t k) {
    Extraction out = ex;
    out.k = k;
    if (out.keywords.size() > k) out.keywords.resize(k);
    return out;
}

}  // namespace flip
