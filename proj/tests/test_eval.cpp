#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "flip/eval.hpp"

using namespace flip;

namespace {

// Extraction with the given concepts in rank order; indices are positional.
Extraction ranked(std::vector<std::string> words) {
    Extraction ex;
    ex.k = words.size();
    double score = 0;
    std::uint32_t i = 0;
    for (auto& w : words) ex.keywords.push_back({i++, std::move(w), score--});
    return ex;
}

}  // namespace

TEST(Summary, MeanAndStandardError) {
    const auto r = summarize("m", {1.0, 0.0, 0.5, 0.5});
    EXPECT_DOUBLE_EQ(r.mean, 0.5);
    // sample sd = sqrt(0.5 / 3)
    EXPECT_NEAR(r.se, std::sqrt(0.5 / 3.0) / 2.0, 1e-15);
    EXPECT_EQ(r.n, 4u);
    EXPECT_EQ(summarize("m", {0.3}).se, 0.0);
    EXPECT_EQ(summarize("m", {}).n, 0u);
}

TEST(Accuracy, Examples) {
    const std::vector<Extraction> ex{ranked({"a", "b", "x"})};
    const std::vector<Tokens> refs{{"a", "b", "c"}};
    EXPECT_NEAR(accuracy(ex, refs).mean, 2.0 / 3.0, 1e-15);

    const std::vector<Extraction> perfect{ranked({"c", "a", "b"})};
    EXPECT_DOUBLE_EQ(accuracy(perfect, refs).mean, 1.0);
    const std::vector<Extraction> disjoint{ranked({"x", "y", "z"})};
    EXPECT_DOUBLE_EQ(accuracy(disjoint, refs).mean, 0.0);

    // Duplicate reference tokens: k counts tokens, hits count types.
    const std::vector<Extraction> dup{ranked({"the", "cat", "dog"})};
    const std::vector<Tokens> dup_refs{{"the", "the", "cat"}};
    EXPECT_NEAR(accuracy(dup, dup_refs).mean, 2.0 / 3.0, 1e-15);
}

TEST(Accuracy, HandBuiltThreeSentenceSet) {
    // Row 1: refs {red, car} k=2, extracted [car, blue] -> 1/2
    // Row 2: no in-vocab refs -> excluded
    // Row 3: refs {sun, is, hot, sun} k=4, extracted [sun, hot, cold, is] -> 3/4
    const std::vector<Extraction> ex{ranked({"car", "blue"}), ranked({}), ranked({"sun", "hot", "cold", "is"})};
    const std::vector<Tokens> refs{{"red", "car"}, {}, {"sun", "is", "hot", "sun"}};
    const auto r = accuracy(ex, refs);
    EXPECT_EQ(r.n, 2u);
    EXPECT_NEAR(r.mean, (0.5 + 0.75) / 2.0, 1e-15);
    EXPECT_NEAR(r.se, std::sqrt(((0.5 - 0.625) * (0.5 - 0.625) + (0.75 - 0.625) * (0.75 - 0.625)) / 1.0) / std::sqrt(2.0),
                1e-15);
    EXPECT_THROW(accuracy(std::span(ex).first(2), refs), EvalError);
}

TEST(Accuracy, OrderInvariantAndBounded) {
    std::mt19937 rng(4);
    const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f", "g"};
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1), len(0, 6);
    for (int t = 0; t < 200; ++t) {
        Tokens ref;
        for (std::size_t j = 0, L = len(rng); j < L; ++j) ref.push_back(pool[pick(rng)]);
        std::vector<std::string> ext;
        for (std::size_t j = 0; j < ref.size(); ++j) ext.push_back(pool[pick(rng)]);
        auto shuffled = ext;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const std::vector<Tokens> refs{ref};
        const std::vector<Extraction> e1{ranked(ext)}, e2{ranked(shuffled)};
        const auto r1 = accuracy(e1, refs), r2 = accuracy(e2, refs);
        EXPECT_EQ(r1.mean, r2.mean);
        EXPECT_GE(r1.mean, 0.0);
        EXPECT_LE(r1.mean, 1.0);
    }
}

TEST(SpanAccuracy, Examples) {
    const std::vector<Extraction> ex{ranked({"new york", "river"})};
    const std::vector<std::vector<SpanUnit>> spans{{{"new york", 0, 2}, {"city", 1, 1}}};
    EXPECT_DOUBLE_EQ(span_accuracy(ex, spans).mean, 0.5);
}

TEST(SpanAccuracy, EqualsAccuracyForUnigramVocabulary) {
    std::mt19937 rng(8);
    std::vector<std::string> words;
    for (int i = 0; i < 15; ++i) words.push_back("w" + std::to_string(i));
    const Vocabulary vocab(std::vector<std::string>(words.begin(), words.begin() + 10));
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1), len(0, 8);
    std::vector<Extraction> ex;
    std::vector<Tokens> refs;
    std::vector<std::vector<SpanUnit>> spans;
    for (int t = 0; t < 100; ++t) {
        Tokens sentence;
        for (std::size_t j = 0, L = len(rng); j < L; ++j) sentence.push_back(words[pick(rng)]);
        refs.push_back(in_vocab_tokens(sentence, vocab));
        spans.push_back(greedy_spans(sentence, vocab));
        std::vector<std::string> guess;
        for (std::size_t j = 0; j < refs.back().size(); ++j) guess.push_back(vocab.concept_at(pick(rng) % 10));
        ex.push_back(ranked(guess));
    }
    const auto a = accuracy(ex, refs), s = span_accuracy(ex, spans);
    EXPECT_EQ(a.n, s.n);
    EXPECT_DOUBLE_EQ(a.mean, s.mean);
    EXPECT_DOUBLE_EQ(a.se, s.se);
}

TEST(HitSets, SubsetOfBoth) {
    const std::vector<Extraction> ex{ranked({"a", "x", "b"}), ranked({"q"})};
    const std::vector<Tokens> refs{{"b", "a", "a", "c"}, {"r"}};
    const auto hits = hit_sets(ex, refs);
    EXPECT_EQ(hits[0], (HitSet{"a", "b"}));
    EXPECT_TRUE(hits[1].empty());
}

TEST(Jaccard, Examples) {
    const std::vector<HitSet> a{{"a", "b"}, {}, {}}, b{{"b", "c"}, {"x"}, {}};
    const auto j = jaccard_hits(a, b);
    EXPECT_EQ(j.per_utterance.n, 2u);  // both-empty row excluded
    EXPECT_NEAR(j.per_utterance.mean, (1.0 / 3.0 + 0.0) / 2.0, 1e-15);
    EXPECT_NEAR(j.pooled, 1.0 / 4.0, 1e-15);

    const auto same = jaccard_hits(a, a);
    EXPECT_DOUBLE_EQ(same.per_utterance.mean, 1.0);
    EXPECT_DOUBLE_EQ(same.pooled, 1.0);
    EXPECT_THROW(jaccard_hits(std::span(a).first(1), b), EvalError);
}

TEST(Jaccard, Symmetric) {
    std::mt19937 rng(2);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int t = 0; t < 50; ++t) {
        std::vector<HitSet> a(10), b(10);
        for (std::size_t i = 0; i < 10; ++i)
            for (const char* w : {"a", "b", "c", "d"}) {
                if (bit(rng)) a[i].insert(w);
                if (bit(rng)) b[i].insert(w);
            }
        const auto ab = jaccard_hits(a, b), ba = jaccard_hits(b, a);
        EXPECT_EQ(ab.per_utterance.mean, ba.per_utterance.mean);
        EXPECT_EQ(ab.pooled, ba.pooled);
    }
}

TEST(NeRecall, Examples) {
    const std::vector<Extraction> ex{ranked({"brooklyn", "york", "new", "staten", "island", "was", "born", "a", "b", "c"}),
                                     ranked({"york", "x", "y"})};
    const std::vector<EntityAnnotation> staten{make_entity(0, "Staten Island")};
    EXPECT_DOUBLE_EQ(ne_recall(ex, staten, 10, NeMode::Strict).mean, 1.0);
    EXPECT_DOUBLE_EQ(ne_recall(ex, staten, 10, NeMode::Partial).mean, 1.0);
    EXPECT_DOUBLE_EQ(ne_recall(ex, staten, 4, NeMode::Strict).mean, 0.0);
    EXPECT_DOUBLE_EQ(ne_recall(ex, staten, 4, NeMode::Partial).mean, 1.0);

    const std::vector<EntityAnnotation> ny{make_entity(1, "New York")};
    EXPECT_DOUBLE_EQ(ne_recall(ex, ny, 3, NeMode::Strict).mean, 0.0);
    EXPECT_DOUBLE_EQ(ne_recall(ex, ny, 3, NeMode::Partial).mean, 1.0);

    const std::vector<EntityAnnotation> bad{make_entity(5, "x")};
    EXPECT_THROW(ne_recall(ex, bad, 1, NeMode::Strict), EvalError);
}

TEST(NeRecall, FullRankingGivesInVocabularyFraction) {
    const Vocabulary vocab(std::vector<std::string>{"new", "york", "paris", "the"});
    Extraction all;
    for (std::uint32_t i = 0; i < 4; ++i) all.keywords.push_back({i, vocab.concept_at(i), -double(i)});
    const std::vector<Extraction> ex{all, all};
    const std::vector<EntityAnnotation> ents{make_entity(0, "New York"), make_entity(0, "New Jersey"),
                                             make_entity(1, "Paris"), make_entity(1, "Berlin")};
    EXPECT_DOUBLE_EQ(ne_recall(ex, ents, 4, NeMode::Strict).mean, 0.5);
    EXPECT_DOUBLE_EQ(ne_recall(ex, ents, 4, NeMode::Partial).mean, 0.75);
}

TEST(NeRecall, MonotoneInKAndPartialDominatesStrict) {
    std::mt19937 rng(12);
    const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
    std::vector<Extraction> ex;
    std::vector<EntityAnnotation> ents;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t u = 0; u < 30; ++u) {
        auto order = pool;
        std::shuffle(order.begin(), order.end(), rng);
        ex.push_back(ranked(order));
        ents.push_back(make_entity(u, pool[pick(rng)] + " " + pool[pick(rng)]));
        ents.push_back(make_entity(u, pool[pick(rng)]));
    }
    const std::vector<std::size_t> ks{1, 2, 5, 10, 20, 50};
    const auto strict = ne_recall(ex, ents, ks, NeMode::Strict);
    const auto partial = ne_recall(ex, ents, ks, NeMode::Partial);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        EXPECT_GE(partial[i].mean, strict[i].mean);
        EXPECT_EQ(strict[i].k, ks[i]);
        if (i > 0) {
            EXPECT_GE(strict[i].mean, strict[i - 1].mean);
            EXPECT_GE(partial[i].mean, partial[i - 1].mean);
        }
    }
    EXPECT_DOUBLE_EQ(strict.back().mean, 1.0);
}

TEST(Entities, SidecarRoundTrip) {
    const auto path = (std::filesystem::temp_directory_path() / "flip_entities.tsv").string();
    const std::vector<EntityAnnotation> ents{make_entity(0, "Staten Island"), make_entity(3, "Brooklyn")};
    write_entities(ents, path);
    const auto back = read_entities(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].surface, "staten island");
    EXPECT_EQ(back[0].constituents, (Tokens{"staten", "island"}));
    EXPECT_EQ(back[1].utterance, 3u);

    write_lines(std::vector<std::string>{"x\tParis"}, path);
    EXPECT_THROW(read_entities(path), EvalError);
}

TEST(Reports, CsvAndTable) {
    std::vector<EvalReport> reports{summarize("accuracy", {1.0, 0.5}), summarize("ne_recall_strict", {1.0}, 5)};
    const auto csv = reports_csv(reports);
    EXPECT_EQ(csv,
              "metric,k,mean,se,n\n"
              "accuracy,,0.750000,0.250000,2\n"
              "ne_recall_strict,5,1.000000,0.000000,1\n");
    EXPECT_NE(reports_table(reports).find("75.00"), std::string::npos);
}
