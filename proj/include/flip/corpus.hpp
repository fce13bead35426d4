#pragma once

// Text normalisation, vocabularies, bag-of-words encoding and greedy span
// matching. Every function here is pure; Vocabulary is immutable once built.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "flip/diagnostics.hpp"

namespace flip {

using Tokens = std::vector<std::string>;

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool error = false;
    U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, c, error);
    if (!error) out.append(buf, static_cast<std::size_t>(len));
}

template <typename Fn>
void for_each_code_point(std::string_view text, Fn&& fn) {
    const auto* s = reinterpret_cast<const uint8_t*>(text.data());
    const auto n = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < n) {
        UChar32 c;
        U8_NEXT(s, i, n, c);
        fn(c < 0 ? UChar32{0xFFFD} : c);
    }
}

}  // namespace detail

/// Lowercases with Unicode simple case folding, removes every code point of
/// general category P, collapses whitespace runs to one ASCII space and trims.
/// Malformed UTF-8 bytes become U+FFFD.
inline std::string normalize_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    detail::for_each_code_point(raw, [&](UChar32 c) {
        if (U_GET_GC_MASK(c) & U_GC_P_MASK) return;
        if (u_isUWhiteSpace(c)) {
            pending_space = !out.empty();
            return;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        detail::append_utf8(out, u_foldCase(c, U_FOLD_CASE_DEFAULT));
    });
    return out;
}

/// Splits on Unicode white space; never yields empty tokens.
inline Tokens tokenize(std::string_view normalized) {
    Tokens tokens;
    std::string current;
    detail::for_each_code_point(normalized, [&](UChar32 c) {
        if (u_isUWhiteSpace(c)) {
            if (!current.empty()) tokens.push_back(std::exchange(current, {}));
        } else {
            detail::append_utf8(current, c);
        }
    });
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

inline Tokens normalize_and_tokenize(std::string_view raw) { return tokenize(normalize_text(raw)); }

/// Ordered concept list with a stable concept -> index bijection. Concepts are
/// unigrams or space-joined bigrams.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Takes the concepts in index order. `freqs` may be empty (unknown).
    explicit Vocabulary(std::vector<std::string> concepts, std::vector<std::uint64_t> freqs = {})
        : concepts_(std::move(concepts)), freqs_(std::move(freqs)) {
        if (freqs_.empty()) freqs_.assign(concepts_.size(), 0);
        if (freqs_.size() != concepts_.size())
            throw CorpusError("vocabulary frequency count does not match concept count");
        index_.reserve(concepts_.size());
        for (std::size_t i = 0; i < concepts_.size(); ++i) {
            if (concepts_[i].empty()) throw CorpusError("empty concept in vocabulary");
            if (!index_.emplace(concepts_[i], static_cast<std::uint32_t>(i)).second)
                throw CorpusError("duplicate concept in vocabulary: " + concepts_[i]);
        }
    }

    std::size_t size() const noexcept { return concepts_.size(); }
    bool empty() const noexcept { return concepts_.empty(); }

    const std::string& concept_at(std::size_t i) const { return concepts_.at(i); }
    std::uint64_t frequency(std::size_t i) const { return freqs_.at(i); }
    const std::vector<std::string>& concepts() const noexcept { return concepts_; }
    const std::vector<std::uint64_t>& frequencies() const noexcept { return freqs_; }

    std::optional<std::uint32_t> find(const std::string& concept_text) const {
        auto it = index_.find(concept_text);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    bool contains(const std::string& concept_text) const { return index_.count(concept_text) != 0; }

    bool has_bigrams() const {
        return std::any_of(concepts_.begin(), concepts_.end(),
                           [](const std::string& c) { return c.find(' ') != std::string::npos; });
    }

private:
    std::vector<std::string> concepts_;
    std::vector<std::uint64_t> freqs_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

namespace detail {

// Descending frequency, ties broken lexicographically.
inline Vocabulary vocabulary_from_counts(std::vector<std::pair<std::string, std::uint64_t>> counts,
                                         std::size_t limit) {
    auto by_rank = [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    };
    limit = std::min(limit, counts.size());
    std::partial_sort(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(limit), counts.end(), by_rank);
    counts.resize(limit);
    std::vector<std::string> concepts;
    std::vector<std::uint64_t> freqs;
    for (auto& [w, c] : counts) {
        concepts.push_back(std::move(w));
        freqs.push_back(c);
    }
    return Vocabulary(std::move(concepts), std::move(freqs));
}

inline std::unordered_map<std::string, std::uint64_t> count_unigrams(std::span<const Tokens> corpus) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& sentence : corpus)
        for (const auto& tok : sentence) ++counts[tok];
    return counts;
}

inline std::string join_bigram(const std::string& a, const std::string& b) {
    std::string s;
    s.reserve(a.size() + b.size() + 1);
    s.append(a).push_back(' ');
    s.append(b);
    return s;
}

}  // namespace detail

/// Top-`size` unigrams by corpus frequency.
inline Vocabulary build_vocabulary(std::span<const Tokens> corpus, std::size_t size) {
    if (size == 0) throw CorpusError("vocabulary size must be >= 1");
    auto counts = detail::count_unigrams(corpus);
    if (counts.empty()) throw CorpusError("empty corpus");
    return detail::vocabulary_from_counts({counts.begin(), counts.end()}, size);
}

struct ConceptVocabularyParams {
    std::uint64_t f_min = 20;
    double pmi_min = 1.5;
    std::size_t n_uni = 6500;
    std::size_t n_bi = 3500;
};

struct BigramStats {
    std::uint64_t count = 0;
    double pmi = 0.0;
};

/// Adjacent-pair counts within sentences plus their PMI under maximum
/// likelihood estimates: ln( (c12/N_pairs) / ((c1/N_tokens)(c2/N_tokens)) ).
inline std::map<std::pair<std::string, std::string>, BigramStats> bigram_statistics(std::span<const Tokens> corpus) {
    auto unigrams = detail::count_unigrams(corpus);
    std::map<std::pair<std::string, std::string>, BigramStats> bigrams;
    std::uint64_t n_tokens = 0, n_pairs = 0;
    for (const auto& sentence : corpus) {
        n_tokens += sentence.size();
        for (std::size_t i = 0; i + 1 < sentence.size(); ++i) {
            ++bigrams[{sentence[i], sentence[i + 1]}].count;
            ++n_pairs;
        }
    }
    for (auto& [pair, stats] : bigrams) {
        const double p12 = static_cast<double>(stats.count) / static_cast<double>(n_pairs);
        const double p1 = static_cast<double>(unigrams[pair.first]) / static_cast<double>(n_tokens);
        const double p2 = static_cast<double>(unigrams[pair.second]) / static_cast<double>(n_tokens);
        stats.pmi = std::log(p12 / (p1 * p2));
    }
    return bigrams;
}

/// Frequency- and PMI-filtered mixed unigram/bigram concept vocabulary.
/// Emits a warning when fewer candidates survive than were requested.
inline Vocabulary build_concept_vocabulary(std::span<const Tokens> corpus, const ConceptVocabularyParams& p = {}) {
    if (p.f_min == 0 || !(p.pmi_min > 0.0) || p.n_uni == 0 || p.n_bi == 0)
        throw CorpusError("concept vocabulary parameters must be positive");
    auto unigrams = detail::count_unigrams(corpus);
    if (unigrams.empty()) throw CorpusError("empty corpus");

    std::vector<std::pair<std::string, std::uint64_t>> uni_candidates;
    for (auto& [w, c] : unigrams)
        if (c >= p.f_min) uni_candidates.emplace_back(w, c);

    std::vector<std::pair<std::string, std::uint64_t>> bi_candidates;
    for (auto& [pair, stats] : bigram_statistics(corpus))
        if (stats.count >= p.f_min && stats.pmi >= p.pmi_min)
            bi_candidates.emplace_back(detail::join_bigram(pair.first, pair.second), stats.count);

    if (uni_candidates.size() < p.n_uni)
        warn("concept vocabulary: only " + std::to_string(uni_candidates.size()) + " unigram candidates survive (requested " +
             std::to_string(p.n_uni) + ")");
    if (bi_candidates.size() < p.n_bi)
        warn("concept vocabulary: only " + std::to_string(bi_candidates.size()) + " bigram candidates survive (requested " +
             std::to_string(p.n_bi) + ")");

    auto uni = detail::vocabulary_from_counts(std::move(uni_candidates), p.n_uni);
    auto bi = detail::vocabulary_from_counts(std::move(bi_candidates), p.n_bi);
    std::vector<std::pair<std::string, std::uint64_t>> merged;
    for (std::size_t i = 0; i < uni.size(); ++i) merged.emplace_back(uni.concept_at(i), uni.frequency(i));
    for (std::size_t i = 0; i < bi.size(); ++i) merged.emplace_back(bi.concept_at(i), bi.frequency(i));
    const auto total = merged.size();
    return detail::vocabulary_from_counts(std::move(merged), total);
}

struct BowEntry {
    std::uint32_t index;
    std::uint32_t count;
    friend bool operator==(const BowEntry&, const BowEntry&) = default;
};

/// Sparse unigram counts; indices strictly increasing, counts >= 1.
struct BowVector {
    std::vector<BowEntry> entries;
    std::uint64_t total = 0;

    bool empty() const noexcept { return entries.empty(); }
    friend bool operator==(const BowVector&, const BowVector&) = default;
};

/// Unigram-only counts; out-of-vocabulary tokens (and bigram concepts) are ignored.
inline BowVector bow(std::span<const std::string> tokens, const Vocabulary& vocab) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens)
        if (auto id = vocab.find(t)) ids.push_back(*id);
    std::sort(ids.begin(), ids.end());
    BowVector v;
    for (auto id : ids) {
        if (!v.entries.empty() && v.entries.back().index == id)
            ++v.entries.back().count;
        else
            v.entries.push_back({id, 1});
    }
    v.total = ids.size();
    return v;
}

/// In-vocabulary reference tokens of a sentence, in order (duplicates kept).
inline Tokens in_vocab_tokens(std::span<const std::string> tokens, const Vocabulary& vocab) {
    Tokens out;
    for (const auto& t : tokens)
        if (vocab.contains(t)) out.push_back(t);
    return out;
}

struct SpanUnit {
    std::string text;
    std::size_t order;   // token position of the span start
    std::size_t length;  // 1 or 2
    friend bool operator==(const SpanUnit&, const SpanUnit&) = default;
};

/// Greedy left-to-right longest match over n <= 2.
inline std::vector<SpanUnit> greedy_spans(std::span<const std::string> tokens, const Vocabulary& vocab) {
    std::vector<SpanUnit> spans;
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (i + 1 < tokens.size()) {
            auto bigram = detail::join_bigram(tokens[i], tokens[i + 1]);
            if (vocab.contains(bigram)) {
                spans.push_back({std::move(bigram), i, 2});
                i += 2;
                continue;
            }
        }
        if (vocab.contains(tokens[i])) spans.push_back({tokens[i], i, 1});
        ++i;
    }
    return spans;
}

// ---- files -----------------------------------------------------------------

/// One sentence per line; a trailing CR is stripped.
inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open corpus file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

inline std::vector<Tokens> read_corpus(const std::string& path) {
    std::vector<Tokens> out;
    for (const auto& line : read_lines(path)) out.push_back(normalize_and_tokenize(line));
    return out;
}

/// One concept per line in index order, optionally followed by TAB frequency.
inline Vocabulary read_vocabulary(const std::string& path) {
    std::vector<std::string> concepts;
    std::vector<std::uint64_t> freqs;
    for (auto& line : read_lines(path)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            concepts.push_back(line);
            freqs.push_back(0);
        } else {
            concepts.push_back(line.substr(0, tab));
            try {
                freqs.push_back(std::stoull(line.substr(tab + 1)));
            } catch (const std::exception&) {
                throw CorpusError("bad frequency field in vocabulary file " + path + ": " + line);
            }
        }
    }
    return Vocabulary(std::move(concepts), std::move(freqs));
}

/// Serialised vocabulary file contents: `concept<TAB>frequency` per line.
inline std::string vocabulary_text(const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < vocab.size(); ++i)
        out.append(vocab.concept_at(i)).append("\t").append(std::to_string(vocab.frequency(i))).append("\n");
    return out;
}

inline void write_vocabulary(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CorpusError("cannot write vocabulary file: " + path);
    out << vocabulary_text(vocab);
}

inline void write_lines(std::span<const std::string> lines, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CorpusError("cannot write file: " + path);
    for (const auto& l : lines) out << l << '\n';
}

}  // namespace flip
