#pragma once

// Keyword-extraction metrics: accuracy, span-aware accuracy, inter-model
// Jaccard on hit sets and named-entity recall@k. Every metric is reported as
// mean +- standard error over the rows (or entities) it is defined on.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flip/corpus.hpp"
#include "flip/inference.hpp"

namespace flip {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EvalReport {
    std::string metric;
    double mean = 0.0;
    double se = 0.0;  // sample stddev / sqrt(n)
    std::size_t n = 0;
    std::optional<std::size_t> k;
    std::vector<double> values;
};

inline EvalReport summarize(std::string metric, std::vector<double> values, std::optional<std::size_t> k = std::nullopt) {
    EvalReport r;
    r.metric = std::move(metric);
    r.k = k;
    r.n = values.size();
    if (r.n > 0) {
        double sum = 0.0;
        for (double v : values) sum += v;
        r.mean = sum / static_cast<double>(r.n);
        if (r.n > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - r.mean) * (v - r.mean);
            r.se = std::sqrt(ss / static_cast<double>(r.n - 1)) / std::sqrt(static_cast<double>(r.n));
        }
    }
    r.values = std::move(values);
    return r;
}

using HitSet = std::set<std::string>;

namespace detail {

inline std::set<std::string> extracted_set(const Extraction& ex) {
    std::set<std::string> s;
    for (const auto& kw : ex.keywords) s.insert(kw.text);
    return s;
}

inline void check_rows(std::size_t a, std::size_t b) {
    if (a != b) throw EvalError("row-count mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

// |extracted ∩ reference types| / k, k = reference unit count; k = 0 rows are skipped.
template <typename Units, typename TextOf>
EvalReport set_accuracy(std::string metric, std::span<const Extraction> extractions, std::span<const Units> refs,
                        TextOf text_of) {
    check_rows(extractions.size(), refs.size());
    std::vector<double> values;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const std::size_t k = refs[i].size();
        if (k == 0) continue;
        std::set<std::string> types;
        for (const auto& u : refs[i]) types.insert(text_of(u));
        std::size_t hits = 0;
        for (const auto& w : extracted_set(extractions[i])) hits += types.count(w);
        values.push_back(static_cast<double>(hits) / static_cast<double>(k));
    }
    return summarize(std::move(metric), std::move(values));
}

}  // namespace detail

/// Per row: |extracted ∩ reference types| / k with k = number of in-vocabulary reference tokens.
inline EvalReport accuracy(std::span<const Extraction> extractions, std::span<const Tokens> references) {
    return detail::set_accuracy("accuracy", extractions, references, [](const std::string& s) { return s; });
}

/// Accuracy over greedy span units (k = number of units per row).
inline EvalReport span_accuracy(std::span<const Extraction> extractions, std::span<const std::vector<SpanUnit>> spans) {
    return detail::set_accuracy("span_accuracy", extractions, spans, [](const SpanUnit& u) { return u.text; });
}

/// Per-row intersection of extracted concepts and reference types.
inline std::vector<HitSet> hit_sets(std::span<const Extraction> extractions, std::span<const Tokens> references) {
    detail::check_rows(extractions.size(), references.size());
    std::vector<HitSet> out(references.size());
    for (std::size_t i = 0; i < references.size(); ++i) {
        const std::set<std::string> types(references[i].begin(), references[i].end());
        for (const auto& w : detail::extracted_set(extractions[i]))
            if (types.count(w)) out[i].insert(w);
    }
    return out;
}

struct JaccardResult {
    EvalReport per_utterance;  // headline number
    double pooled = 0.0;       // |∪(A∩B)| / |∪(A∪B)| over (row, concept) pairs
};

inline JaccardResult jaccard_hits(std::span<const HitSet> a, std::span<const HitSet> b) {
    detail::check_rows(a.size(), b.size());
    std::vector<double> values;
    std::size_t pooled_inter = 0, pooled_union = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::size_t inter = 0;
        for (const auto& w : a[i]) inter += b[i].count(w);
        const std::size_t uni = a[i].size() + b[i].size() - inter;
        pooled_inter += inter;
        pooled_union += uni;
        if (uni == 0) continue;
        values.push_back(static_cast<double>(inter) / static_cast<double>(uni));
    }
    JaccardResult r;
    r.per_utterance = summarize("jaccard", std::move(values));
    r.pooled = pooled_union == 0 ? 0.0 : static_cast<double>(pooled_inter) / static_cast<double>(pooled_union);
    return r;
}

struct EntityAnnotation {
    std::size_t utterance;
    std::string surface;  // normalised
    Tokens constituents;
};

inline EntityAnnotation make_entity(std::size_t utterance, std::string_view surface) {
    auto norm = normalize_text(surface);
    auto parts = tokenize(norm);
    return {utterance, std::move(norm), std::move(parts)};
}

/// Sidecar format: `utterance_index<TAB>entity_surface`, one entity per line.
inline std::vector<EntityAnnotation> read_entities(const std::string& path) {
    std::vector<EntityAnnotation> out;
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw EvalError(path + ":" + std::to_string(line_no) + ": expected index<TAB>entity");
        std::size_t idx = 0;
        try {
            std::size_t used = 0;
            idx = std::stoull(line.substr(0, tab), &used);
            if (used != tab) throw std::invalid_argument("index");
        } catch (const std::exception&) {
            throw EvalError(path + ":" + std::to_string(line_no) + ": bad utterance index");
        }
        auto e = make_entity(idx, line.substr(tab + 1));
        if (e.constituents.empty()) continue;
        out.push_back(std::move(e));
    }
    return out;
}

inline void write_entities(std::span<const EntityAnnotation> entities, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EvalError("cannot write " + path);
    for (const auto& e : entities) out << e.utterance << '\t' << e.surface << '\n';
}

enum class NeMode { Strict, Partial };

inline const char* to_string(NeMode m) { return m == NeMode::Strict ? "strict" : "partial"; }

/// Entity recall over the top-k prefix of each row's extraction. Strict credits
/// an entity when all constituents are retrieved, partial when any is.
/// Extractions must be ranked to at least k (or to |V|).
inline EvalReport ne_recall(std::span<const Extraction> extractions, std::span<const EntityAnnotation> entities,
                            std::size_t k, NeMode mode) {
    std::vector<double> values;
    values.reserve(entities.size());
    for (const auto& e : entities) {
        if (e.utterance >= extractions.size())
            throw EvalError("entity annotation references utterance " + std::to_string(e.utterance) + " of " +
                            std::to_string(extractions.size()));
        const auto& kws = extractions[e.utterance].keywords;
        std::set<std::string> top;
        for (std::size_t j = 0; j < std::min(k, kws.size()); ++j) top.insert(kws[j].text);
        std::size_t found = 0;
        for (const auto& c : e.constituents) found += top.count(c);
        const bool credit = mode == NeMode::Strict ? found == e.constituents.size() : found > 0;
        values.push_back(credit ? 1.0 : 0.0);
    }
    return summarize(std::string("ne_recall_") + to_string(mode), std::move(values), k);
}

inline std::vector<EvalReport> ne_recall(std::span<const Extraction> extractions,
                                         std::span<const EntityAnnotation> entities, std::span<const std::size_t> ks,
                                         NeMode mode) {
    std::vector<EvalReport> out;
    for (auto k : ks) out.push_back(ne_recall(extractions, entities, k, mode));
    return out;
}

// ---- reporting -----------------------------------------------------------------

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// CSV with header `metric,k,mean,se,n`; k is empty when not applicable.
inline std::string reports_csv(std::span<const EvalReport> reports) {
    std::string out = "metric,k,mean,se,n\n";
    for (const auto& r : reports) {
        out += r.metric + "," + (r.k ? std::to_string(*r.k) : "") + "," + format_number(r.mean) + "," +
               format_number(r.se) + "," + std::to_string(r.n) + "\n";
    }
    return out;
}

inline std::string reports_table(std::span<const EvalReport> reports) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-26s %6s %10s %10s %8s\n", "metric", "k", "mean(%)", "se(%)", "n");
    os << line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-26s %6s %10.2f %10.2f %8zu\n", r.metric.c_str(),
                      r.k ? std::to_string(*r.k).c_str() : "-", 100.0 * r.mean, 100.0 * r.se, r.n);
        os << line;
    }
    return os.str();
}

}  // namespace flip
