#pragma once

// In-memory view of a manifest: vocabulary, normalised sentences, BoW
// targets and the row-aligned embedding matrices.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flip/corpus.hpp"
#include "flip/model.hpp"
#include "flip/tensor_io.hpp"

namespace flip {

struct Dataset {
    Vocabulary vocab;
    std::uint64_t vocab_hash = 0;
    std::vector<Tokens> sentences;
    std::vector<BowVector> bows;
    Matrix<float> primary;
    std::optional<Matrix<float>> secondary;
    double alpha = 0.5;

    std::size_t size() const { return sentences.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(primary.cols()); }

    /// In-vocabulary reference tokens per row (duplicates kept).
    std::vector<Tokens> references() const {
        std::vector<Tokens> refs;
        refs.reserve(sentences.size());
        for (const auto& s : sentences) refs.push_back(in_vocab_tokens(s, vocab));
        return refs;
    }
};

inline Dataset make_dataset(Vocabulary vocab, std::vector<Tokens> sentences, Matrix<float> primary,
                            std::optional<Matrix<float>> secondary = std::nullopt, double alpha = 0.5,
                            std::uint64_t vocab_hash = 0) {
    const auto n = static_cast<Eigen::Index>(sentences.size());
    if (primary.rows() != n) throw IoError(IoErrc::row_mismatch, "primary embeddings vs corpus lines");
    if (secondary) {
        if (secondary->rows() != n) throw IoError(IoErrc::row_mismatch, "secondary embeddings vs corpus lines");
        if (secondary->cols() != primary.cols())
            throw IoError(IoErrc::kind_dims_mismatch, "primary and secondary embeddings differ in dimension");
    }
    Dataset ds;
    ds.bows.reserve(sentences.size());
    for (const auto& s : sentences) ds.bows.push_back(bow(s, vocab));
    ds.vocab = std::move(vocab);
    ds.vocab_hash = vocab_hash;
    ds.sentences = std::move(sentences);
    ds.primary = std::move(primary);
    ds.secondary = std::move(secondary);
    ds.alpha = alpha;
    return ds;
}

inline Dataset load_dataset(const DatasetManifest& m) {
    auto vocab = read_vocabulary(m.vocabulary);
    auto sentences = read_corpus(m.corpus);
    auto primary = read_embeddings(m.primary_embeddings);
    if (primary.rows != sentences.size())
        throw IoError(IoErrc::row_mismatch, m.primary_embeddings + " has " + std::to_string(primary.rows) +
                                                " rows, corpus has " + std::to_string(sentences.size()) + " lines");
    std::optional<Matrix<float>> secondary;
    if (m.secondary_embeddings) {
        auto s = read_embeddings(*m.secondary_embeddings);
        if (s.rows != sentences.size())
            throw IoError(IoErrc::row_mismatch, *m.secondary_embeddings + " has " + std::to_string(s.rows) +
                                                    " rows, corpus has " + std::to_string(sentences.size()) + " lines");
        secondary = s.matrix();
    }
    return make_dataset(std::move(vocab), std::move(sentences), primary.matrix(), std::move(secondary), m.alpha,
                        hash_file(m.vocabulary));
}

inline Dataset load_dataset(const std::string& manifest_path) { return load_dataset(read_manifest(manifest_path)); }

}  // namespace flip
