#pragma once

// Synthetic corpora with planted linear structure, and the convex oracle.
//
// Each generator word w owns a row G_w of a rank-`planted_rank` matrix
// G = F1 F2 / sqrt(planted_rank). A sentence's primary embedding is the
// L2-normalised sum of its word rows plus N(0, noise_sigma^2) noise; the
// secondary embedding adds a further N(0, pair_noise_sigma^2) perturbation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "flip/corpus.hpp"
#include "flip/dataset.hpp"
#include "flip/eval.hpp"
#include "flip/model.hpp"
#include "flip/tensor_io.hpp"

namespace flip {

struct SynthConfig {
    std::size_t vocab_size = 2000;
    std::size_t dim = 64;
    std::size_t min_len = 5;
    std::size_t max_len = 15;
    std::size_t n_train = 20000;
    std::size_t n_dev = 2000;
    std::size_t n_test = 2000;
    double noise_sigma = 0.01;
    double zipf_exponent = 1.0;
    std::size_t planted_rank = 64;
    double pair_noise_sigma = 0.05;
    std::uint64_t seed = 0;
    double alpha = 0.5;  // written into the manifests
    // Designated entities: words taken from the tail of the generator
    // vocabulary, inserted as contiguous 1- or 2-word spans.
    std::size_t n_entities = 0;
    double entity_rate = 0.3;

    void validate() const {
        if (vocab_size == 0 || dim == 0 || planted_rank == 0) throw ModelError("synth sizes must be positive");
        if (planted_rank > dim) throw ModelError("planted_rank must be <= dim");
        if (min_len == 0 || min_len > max_len) throw ModelError("invalid sentence length range");
        if (n_train == 0) throw ModelError("n_train must be positive");
        if (noise_sigma < 0 || pair_noise_sigma < 0 || zipf_exponent < 0) throw ModelError("negative synth parameter");
        if (entity_words() >= vocab_size) throw ModelError("too many entities for the vocabulary");
        if (entity_rate < 0 || entity_rate > 1) throw ModelError("entity_rate must lie in [0,1]");
    }

    /// Entity j has (j % 2) + 1 words.
    std::size_t entity_words() const { return n_entities + n_entities / 2; }
};

inline std::string synth_word(std::size_t id) { return "w" + std::to_string(id); }

struct SynthSplit {
    std::vector<Tokens> sentences;
    Matrix<float> primary;
    Matrix<float> secondary;
    std::vector<EntityAnnotation> entities;
};

struct SynthData {
    SynthConfig config;
    Matrix<float> G;  // generator word id x d
    Vocabulary vocab;  // built from the training split
    SynthSplit train, dev, test;

    std::uint64_t vocab_hash() const {
        const auto text = vocabulary_text(vocab);
        return fnv1a64(text);
    }
    Dataset dataset(const SynthSplit& split) const {
        return make_dataset(vocab, split.sentences, split.primary, split.secondary, config.alpha, vocab_hash());
    }
};

namespace detail {

class SynthSampler {
public:
    SynthSampler(const SynthConfig& cfg, const Matrix<double>& G, std::mt19937_64& rng)
        : cfg_(cfg), G_(G), rng_(rng) {
        const std::size_t plain = cfg.vocab_size - cfg.entity_words();
        std::vector<double> w(plain);
        for (std::size_t i = 0; i < plain; ++i) w[i] = std::pow(static_cast<double>(i + 1), -cfg.zipf_exponent);
        zipf_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
        std::size_t next = plain;
        for (std::size_t e = 0; e < cfg.n_entities; ++e) {
            std::vector<std::size_t> words;
            for (std::size_t j = 0; j < e % 2 + 1; ++j) words.push_back(next++);
            entities_.push_back(std::move(words));
        }
    }

    SynthSplit split(std::size_t n) {
        SynthSplit s;
        s.primary.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg_.dim));
        s.secondary.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg_.dim));
        std::uniform_int_distribution<std::size_t> len(cfg_.min_len, cfg_.max_len);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::normal_distribution<double> noise(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> ids(len(rng_));
            for (auto& id : ids) id = zipf_(rng_);
            if (!entities_.empty() && coin(rng_) < cfg_.entity_rate) {
                const auto& ent = entities_[std::uniform_int_distribution<std::size_t>(0, entities_.size() - 1)(rng_)];
                const auto at = std::uniform_int_distribution<std::size_t>(0, ids.size())(rng_);
                ids.insert(ids.begin() + static_cast<std::ptrdiff_t>(at), ent.begin(), ent.end());
                std::string surface;
                for (auto w : ent) surface += (surface.empty() ? "" : " ") + synth_word(w);
                s.entities.push_back(make_entity(i, surface));
            }
            Vector<double> t = Vector<double>::Zero(static_cast<Eigen::Index>(cfg_.dim));
            Tokens toks;
            for (auto id : ids) {
                t += G_.row(static_cast<Eigen::Index>(id)).transpose();
                toks.push_back(synth_word(id));
            }
            const double norm = t.norm();
            if (norm > 0) t /= norm;
            for (Eigen::Index j = 0; j < t.size(); ++j) t(j) += cfg_.noise_sigma * noise(rng_);
            Vector<double> sec = t;
            for (Eigen::Index j = 0; j < sec.size(); ++j) sec(j) += cfg_.pair_noise_sigma * noise(rng_);
            s.primary.row(static_cast<Eigen::Index>(i)) = t.cast<float>().transpose();
            s.secondary.row(static_cast<Eigen::Index>(i)) = sec.cast<float>().transpose();
            s.sentences.push_back(std::move(toks));
        }
        return s;
    }

private:
    const SynthConfig& cfg_;
    const Matrix<double>& G_;
    std::mt19937_64& rng_;
    std::discrete_distribution<std::size_t> zipf_;
    std::vector<std::vector<std::size_t>> entities_;
};

}  // namespace detail

inline SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix<double> F1(static_cast<Eigen::Index>(cfg.vocab_size), static_cast<Eigen::Index>(cfg.planted_rank));
    Matrix<double> F2(static_cast<Eigen::Index>(cfg.planted_rank), static_cast<Eigen::Index>(cfg.dim));
    for (Eigen::Index i = 0; i < F1.size(); ++i) F1.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < F2.size(); ++i) F2.data()[i] = normal(rng);
    const Matrix<double> G = F1 * F2 / std::sqrt(static_cast<double>(cfg.planted_rank));

    SynthData data;
    data.config = cfg;
    data.G = G.cast<float>();
    detail::SynthSampler sampler(cfg, G, rng);
    data.train = sampler.split(cfg.n_train);
    data.dev = sampler.split(cfg.n_dev);
    data.test = sampler.split(cfg.n_test);
    data.vocab = build_vocabulary(data.train.sentences, cfg.vocab_size);
    return data;
}

struct SynthPaths {
    std::string train_manifest, dev_manifest, test_manifest, vocabulary, ground_truth;
    std::string train_entities, dev_entities, test_entities;
};

/// Writes corpus, embedding, manifest and entity files for every split plus
/// the shared vocabulary and the ground-truth generator matrix (G.emb).
inline SynthPaths write_synth(const SynthData& data, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto at = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
    SynthPaths paths;
    paths.vocabulary = at("vocab.txt");
    write_vocabulary(data.vocab, paths.vocabulary);
    paths.ground_truth = at("G.emb");
    write_embeddings(EmbeddingSet::from_matrix(data.G), paths.ground_truth);

    auto emit = [&](const SynthSplit& split, const std::string& name, std::string& manifest_path,
                    std::string& entities_path) {
        std::vector<std::string> lines;
        for (const auto& s : split.sentences) {
            std::string line;
            for (const auto& t : s) line += (line.empty() ? "" : " ") + t;
            lines.push_back(std::move(line));
        }
        write_lines(lines, at(name + ".txt"));
        write_embeddings(EmbeddingSet::from_matrix(split.primary), at(name + ".primary.emb"));
        write_embeddings(EmbeddingSet::from_matrix(split.secondary), at(name + ".secondary.emb"));
        entities_path = at(name + ".entities.tsv");
        write_entities(split.entities, entities_path);
        DatasetManifest m;
        m.primary_embeddings = name + ".primary.emb";
        m.secondary_embeddings = name + ".secondary.emb";
        m.corpus = name + ".txt";
        m.vocabulary = "vocab.txt";
        m.alpha = data.config.alpha;
        manifest_path = at(name + ".manifest");
        write_manifest(m, manifest_path);
    };
    emit(data.train, "train", paths.train_manifest, paths.train_entities);
    emit(data.dev, "dev", paths.dev_manifest, paths.dev_entities);
    emit(data.test, "test", paths.test_manifest, paths.test_entities);
    return paths;
}

// ---- convex oracle -----------------------------------------------------------------

struct OracleOptions {
    double alpha = 1.0;
    double grad_tol = 1e-8;
    std::size_t max_iters = 200000;
};

struct OracleResult {
    double nll = 0.0;
    ModelParams<double> params;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
};

/// Unregularised Full model fitted by full-batch gradient descent with
/// Barzilai-Borwein step proposals and a non-monotone Armijo backtracking
/// line search. The objective is convex in (W, b), so the result is the global
/// optimum. Rows with an empty BoW are dropped, as in training.
inline OracleResult convex_oracle(const Dataset& ds, const OracleOptions& opts = {}) {
    if (ds.vocab.size() > 50 || ds.dim() > 16 || ds.size() > 500)
        throw ModelError("convex oracle is limited to |V| <= 50, d <= 16, N <= 500");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (!ds.bows[i].empty()) rows.push_back(i);
    if (rows.empty()) throw ModelError("convex oracle: no row has an in-vocabulary token");
    const Batch batch = [&] {
        Batch b;
        b.primary.resize(static_cast<Eigen::Index>(rows.size()), ds.primary.cols());
        if (opts.alpha < 1.0) b.secondary.emplace(static_cast<Eigen::Index>(rows.size()), ds.secondary.value().cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            b.primary.row(static_cast<Eigen::Index>(i)) = ds.primary.row(static_cast<Eigen::Index>(rows[i]));
            if (b.secondary) b.secondary->row(static_cast<Eigen::Index>(i)) = ds.secondary->row(static_cast<Eigen::Index>(rows[i]));
            b.bows.push_back(ds.bows[rows[i]]);
        }
        return b;
    }();

    ModelParams<double> p;
    p.kind = ModelKind::Full;
    p.W = Matrix<double>::Zero(static_cast<Eigen::Index>(ds.vocab.size()), ds.primary.cols());
    p.b = Vector<double>::Zero(static_cast<Eigen::Index>(ds.vocab.size()));

    auto grad_norm = [](const Gradients& g) { return std::sqrt(g.W.squaredNorm() + g.b.squaredNorm()); };
    Gradients g = gradients(p, batch, opts.alpha);
    double step = 1.0;
    std::vector<double> recent{g.loss};
    for (std::size_t it = 0; it < opts.max_iters; ++it) {
        const double gn = grad_norm(g);
        if (gn < opts.grad_tol) return {g.loss, std::move(p), it, gn};

        const double f_ref = *std::max_element(recent.begin(), recent.end());
        const double slack = 1e-13 * std::max(1.0, std::abs(g.loss));
        ModelParams<double> trial = p;
        Gradients gt;
        double t = step;
        for (int bt = 0;; ++bt) {
            trial.W = p.W - t * g.W;
            trial.b = p.b - t * g.b;
            gt = gradients(trial, batch, opts.alpha);
            if (std::isfinite(gt.loss) && gt.loss <= f_ref - 1e-4 * t * gn * gn + slack) break;
            if (bt > 60) throw ModelError("convex oracle: line search failed (gradient norm " + std::to_string(gn) + ")");
            t *= 0.5;
        }
        // Barzilai-Borwein proposal for the next step.
        const double sy = -t * ((gt.W - g.W).cwiseProduct(g.W).sum() + (gt.b - g.b).cwiseProduct(g.b).sum());
        const double ss = t * t * gn * gn;
        step = sy > 0 ? std::clamp(ss / sy, 1e-10, 1e10) : 1.0;
        p = std::move(trial);
        g = std::move(gt);
        recent.push_back(g.loss);
        if (recent.size() > 10) recent.erase(recent.begin());
    }
    throw ModelError("convex oracle did not converge; final gradient norm " + std::to_string(grad_norm(g)));
}

}  // namespace flip
