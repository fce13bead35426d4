#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "flip/synth.hpp"
#include "flip/trainer.hpp"

using namespace flip;

namespace {

SynthConfig small_synth(std::uint64_t seed = 1) {
    SynthConfig c;
    c.vocab_size = 40;
    c.dim = 12;
    c.planted_rank = 12;
    c.min_len = 2;
    c.max_len = 5;
    c.n_train = 400;
    c.n_dev = 100;
    c.n_test = 10;
    c.seed = seed;
    return c;
}

TrainConfig quick_config() {
    TrainConfig cfg;
    cfg.rank = 6;
    cfg.max_epochs = 8;
    cfg.batch_size = 64;
    cfg.eta = 2e-2;
    cfg.alpha = 0.5;
    return cfg;
}

// One-word sentences over unit-norm, pairwise distinct word vectors: the word
// is recoverable by a linear map (W = c G attains the argmax for every row).
Dataset separable(std::size_t n, std::uint64_t seed) {
    const std::size_t V = 20, d = 8;
    std::mt19937_64 g_rng(7);
    std::normal_distribution<double> normal(0, 1);
    Matrix<double> G(V, d);
    for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = normal(g_rng);
    G.rowwise().normalize();
    std::vector<std::string> words;
    for (std::size_t i = 0; i < V; ++i) words.push_back(synth_word(i));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, V - 1);
    std::vector<Tokens> sentences;
    Matrix<float> emb(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        const auto w = i < V ? i : pick(rng);
        sentences.push_back({words[w]});
        emb.row(static_cast<Eigen::Index>(i)) = G.row(static_cast<Eigen::Index>(w)).cast<float>();
    }
    return make_dataset(Vocabulary(words), std::move(sentences), std::move(emb), std::nullopt, 1.0, 42);
}

}  // namespace

TEST(PlateauSchedule, HalvesOnceAfterFourthFlatEvaluation) {
    PlateauSchedule s(1.0, 3, 10, 1e-4);
    std::vector<bool> halved;
    for (double m : {0.5, 0.5, 0.5, 0.5}) halved.push_back(s.observe(m).halved);
    EXPECT_EQ(halved, (std::vector<bool>{false, false, false, true}));
    EXPECT_DOUBLE_EQ(s.lr(), 0.5);
}

TEST(PlateauSchedule, ImprovementBelowEpsIsAPlateau) {
    PlateauSchedule s(1.0, 2, 3, 1e-2);
    EXPECT_TRUE(s.observe(0.5).improved);
    EXPECT_FALSE(s.observe(0.505).improved);
    EXPECT_TRUE(s.observe(0.505).halved);
    EXPECT_TRUE(s.observe(0.52).improved);
    EXPECT_FALSE(s.observe(0.1).stop);
    EXPECT_FALSE(s.observe(0.1).stop);
    EXPECT_TRUE(s.observe(0.1).stop);
}

TEST(PlateauSchedule, LearningRateOnlyHalves) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> metric(0, 1);
    for (int run = 0; run < 20; ++run) {
        PlateauSchedule s(0.01, 1 + run % 4, 100, 1e-4);
        double prev = s.lr();
        for (int i = 0; i < 60; ++i) {
            s.observe(metric(rng) * 0.5 + 0.001 * i);
            EXPECT_TRUE(s.lr() == prev || s.lr() == prev / 2);
            prev = s.lr();
        }
    }
}

TEST(Train, HistoryScheduleAndSnapshotInvariants) {
    const auto data = generate(small_synth());
    auto cfg = quick_config();
    cfg.max_epochs = 15;
    cfg.plateau_patience = 1;
    const auto res = train(data.dataset(data.train), data.dataset(data.dev), cfg);
    const auto& h = res.history.epochs;
    ASSERT_FALSE(h.empty());
    EXPECT_LE(h.size(), cfg.max_epochs);
    double best = -1;
    std::size_t best_epoch = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        EXPECT_EQ(h[i].epoch, i + 1);
        if (i > 0) EXPECT_TRUE(h[i].lr == h[i - 1].lr || h[i].lr == h[i - 1].lr / 2);
        EXPECT_GE(h[i].dev_recall, 0.0);
        EXPECT_LE(h[i].dev_recall, 1.0);
        if (h[i].dev_recall > best) {
            best = h[i].dev_recall;
            best_epoch = h[i].epoch;
        }
    }
    EXPECT_EQ(res.checkpoint.meta.dev_recall, best);
    EXPECT_EQ(res.checkpoint.meta.epoch, best_epoch);  // ties resolve to the earlier epoch
    EXPECT_DOUBLE_EQ(dev_recall(res.checkpoint.params, data.dataset(data.dev)), best);
    EXPECT_EQ(res.checkpoint.vocab_hash, data.vocab_hash());
    EXPECT_EQ(res.history.to_csv().substr(0, 33), "epoch,loss,dev_recall,lr,sparsity");
    EXPECT_GT(best, h.front().dev_recall - 1e-12);
}

TEST(Train, DeterministicAcrossRunsAndThreadCounts) {
    const auto data = generate(small_synth());
    const auto train_set = data.dataset(data.train), dev = data.dataset(data.dev);
    auto cfg = quick_config();
    cfg.batch_size = 1000;  // several 512-row chunks per step
    const auto a = train(train_set, dev, cfg);
    const auto b = train(train_set, dev, cfg);
    cfg.threads = 3;
    const auto c = train(train_set, dev, cfg);
    EXPECT_EQ(encode_checkpoint(a.checkpoint), encode_checkpoint(b.checkpoint));
    EXPECT_EQ(encode_checkpoint(a.checkpoint), encode_checkpoint(c.checkpoint));
    EXPECT_EQ(a.history.to_csv(), c.history.to_csv());

    cfg.seed = 9;
    const auto d = train(train_set, dev, cfg);
    EXPECT_NE(encode_checkpoint(a.checkpoint), encode_checkpoint(d.checkpoint));
}

TEST(Train, FullModelOnSeparableDataReachesPerfectRecall) {
    const auto train_set = separable(200, 1), dev = separable(60, 2);
    TrainConfig cfg;
    cfg.kind = ModelKind::Full;
    cfg.alpha = 1.0;
    cfg.lambda1 = 0;
    cfg.lambda2 = 0;
    cfg.batch_size = 200;  // full batch
    cfg.eta = 0.05;
    cfg.max_epochs = 300;
    cfg.stop_patience = 1000;
    cfg.plateau_patience = 1000;
    cfg.snapshot = SnapshotPolicy::Last;
    const auto res = train(train_set, dev, cfg);
    const auto& h = res.history.epochs;
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LT(h[i].loss, h[i - 1].loss) << "epoch " << h[i].epoch;
    EXPECT_DOUBLE_EQ(h.back().dev_recall, 1.0);
}

TEST(Train, ProximalStepShrinksByExactlyLambdaTimesLr) {
    const auto data = generate(small_synth());
    const auto ds = data.dataset(data.train);
    auto params = init_params<float>(ModelKind::Factorized, ds.vocab.size(), ds.dim(), 5, 3);
    std::vector<std::size_t> rows(200);
    std::iota(rows.begin(), rows.end(), 0);
    const auto batch = detail::gather_batch(ds, rows, true);
    const auto g = gradients(params, batch, 0.5);

    const double lr = 0.01, lambda1 = 10.0;
    AdamW<float> plain_opt, prox_opt;
    std::vector<AdamW<float>::Slot> s1, s2;
    auto plain = params, prox = params;
    optimizer_step(plain, g, plain_opt, s1, lr, RegConfig{0.0, 0.0});
    optimizer_step(prox, g, prox_opt, s2, lr, RegConfig{lambda1, 0.0});
    const float tau = static_cast<float>(lambda1 * lr);
    std::size_t zeros = 0;
    for (Eigen::Index i = 0; i < plain.A.size(); ++i) {
        const float before = plain.A.data()[i], after = prox.A.data()[i];
        if (after == 0.0f) {
            ++zeros;
            EXPECT_LE(std::abs(before), tau);
        } else {
            // exact up to one float rounding of the shrunk value
            const float ulp = std::numeric_limits<float>::epsilon() * std::abs(before);
            EXPECT_NEAR(std::abs(before) - std::abs(after), tau, 2 * ulp) << before << " -> " << after;
            EXPECT_EQ(std::signbit(before), std::signbit(after));
        }
    }
    EXPECT_GT(zeros, 0u);
    EXPECT_TRUE(plain.B == prox.B);  // B and b are not thresholded
    EXPECT_TRUE(plain.b == prox.b);
}

TEST(Train, WeightDecayTouchesOnlyB) {
    const auto data = generate(small_synth());
    const auto ds = data.dataset(data.train);
    auto params = init_params<float>(ModelKind::Factorized, ds.vocab.size(), ds.dim(), 5, 3);
    std::vector<std::size_t> rows(100);
    std::iota(rows.begin(), rows.end(), 0);
    const auto g = gradients(params, detail::gather_batch(ds, rows, true), 0.5);
    AdamW<float> o1, o2;
    std::vector<AdamW<float>::Slot> s1, s2;
    auto a = params, b = params;
    optimizer_step(a, g, o1, s1, 0.01, RegConfig{0.0, 0.0});
    optimizer_step(b, g, o2, s2, 0.01, RegConfig{0.0, 0.5});
    EXPECT_TRUE(a.A == b.A);
    EXPECT_TRUE(a.b == b.b);
    EXPECT_FALSE(a.B == b.B);
}

TEST(Train, EmptyBowRowsDoNotChangeTraining) {
    const auto data = generate(small_synth());
    const auto clean = data.dataset(data.train);
    // Interleave rows whose tokens are all out of vocabulary.
    std::vector<Tokens> sentences;
    Matrix<float> primary(clean.primary.rows() + 50, clean.primary.cols());
    Matrix<float> secondary(primary.rows(), primary.cols());
    std::mt19937 rng(5);
    std::normal_distribution<float> g(0, 1);
    Eigen::Index out = 0;
    for (Eigen::Index i = 0; i < clean.primary.rows(); ++i) {
        if (i % 8 == 0 && out - i < 50) {
            sentences.push_back({"zzz", "qqq"});
            for (Eigen::Index j = 0; j < primary.cols(); ++j) primary(out, j) = secondary(out, j) = g(rng);
            ++out;
        }
        sentences.push_back(clean.sentences[static_cast<std::size_t>(i)]);
        primary.row(out) = clean.primary.row(i);
        secondary.row(out) = clean.secondary->row(i);
        ++out;
    }
    ASSERT_EQ(out, primary.rows());
    const auto noisy = make_dataset(clean.vocab, sentences, primary, secondary, 0.5, clean.vocab_hash);

    const auto dev = data.dataset(data.dev);
    const auto cfg = quick_config();
    const auto a = train(clean, dev, cfg);
    ScopedWarningCapture capture;
    const auto b = train(noisy, dev, cfg);
    EXPECT_EQ(b.skipped_rows, 50u);
    ASSERT_EQ(capture.messages().size(), 1u);
    EXPECT_NE(capture.messages()[0].find("50"), std::string::npos);
    EXPECT_EQ(encode_checkpoint(a.checkpoint), encode_checkpoint(b.checkpoint));
}

TEST(Train, Errors) {
    const auto data = generate(small_synth());
    const auto dev = data.dataset(data.dev);
    const auto cfg = quick_config();

    auto empty = make_dataset(data.vocab, {}, Matrix<float>(0, 12), Matrix<float>(0, 12), 0.5, data.vocab_hash());
    EXPECT_THROW(train(empty, dev, cfg), TrainingError);

    std::vector<Tokens> oov(10, Tokens{"nothing"});
    const auto all_oov = make_dataset(data.vocab, oov, Matrix<float>::Ones(10, 12), Matrix<float>::Ones(10, 12), 0.5,
                                      data.vocab_hash());
    ScopedWarningCapture capture;
    EXPECT_THROW(train(all_oov, dev, cfg), TrainingError);

    auto poisoned = data.dataset(data.train);
    poisoned.primary(3, 2) = std::numeric_limits<float>::quiet_NaN();
    try {
        train(poisoned, dev, cfg);
        FAIL();
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    }

    auto other = data.dataset(data.train);
    other.vocab_hash ^= 1;
    EXPECT_THROW(train(other, dev, cfg), TrainingError);

    auto bad = cfg;
    bad.alpha = 2;
    EXPECT_THROW(train(data.dataset(data.train), dev, bad), TrainingError);
}

TEST(Train, DevRecallHandOracle) {
    // Vocabulary {a, b, c}; W = I so the logits are the embedding itself.
    const Vocabulary vocab(std::vector<std::string>{"a", "b", "c"});
    ModelParams<float> p;
    p.kind = ModelKind::Full;
    p.W = Matrix<float>::Identity(3, 3);
    p.b = Vector<float>::Zero(3);
    // Row 0: refs [a, b] (k=2), top-2 = {a, c} -> 1/2
    // Row 1: refs [c] (k=1), top-1 = {c} -> 1
    // Row 2: refs [b, b, x] (k=2), top-2 = {b, a} -> 1/2
    Matrix<float> emb{{0.9f, 0.1f, 0.5f}, {0.0f, 0.2f, 0.7f}, {0.4f, 0.8f, 0.1f}};
    const auto dev = make_dataset(vocab, {{"a", "b"}, {"c"}, {"b", "b", "x"}}, emb);
    EXPECT_NEAR(dev_recall(p, dev), 2.0 / 3.0, 1e-15);
}

TEST(Sweep, GridOfOneMatchesTrain) {
    const auto data = generate(small_synth());
    const auto train_set = data.dataset(data.train), dev = data.dataset(data.dev);
    const auto cfg = quick_config();
    const auto single = train(train_set, dev, cfg);
    const auto cells = sweep(SweepGrid{{cfg.rank}, {cfg.lambda1}, {cfg.lambda2}, {cfg.alpha}}, train_set, dev, cfg);
    ASSERT_EQ(cells.size(), 1u);
    ASSERT_TRUE(cells[0].checkpoint);
    EXPECT_EQ(encode_checkpoint(*cells[0].checkpoint), encode_checkpoint(single.checkpoint));
    EXPECT_EQ(*cells[0].best_dev_recall, single.checkpoint.meta.dev_recall);
}

TEST(Sweep, RanksCellsAndIsolatesFailures) {
    const auto data = generate(small_synth());
    auto cfg = quick_config();
    cfg.threads = 2;
    // rank 20 exceeds d = 12 and fails; the rest of the grid still runs.
    const auto cells = sweep(SweepGrid{{1, 6, 20, 0}, {}, {}, {}}, data.dataset(data.train), data.dataset(data.dev), cfg);
    ASSERT_EQ(cells.size(), 4u);
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
        if (cells[i + 1].best_dev_recall) EXPECT_GE(*cells[i].best_dev_recall, *cells[i + 1].best_dev_recall);
    }
    EXPECT_FALSE(cells.back().best_dev_recall);
    EXPECT_EQ(cells.back().config.rank, 20u);
    EXPECT_NE(cells.back().error.find("exceeds"), std::string::npos);
    const auto csv = sweep_report_csv(cells);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "rank,kind,lambda1,lambda2,alpha,best_dev_recall,sparsity,error");
}

TEST(TrainConfig, JsonEchoListsEveryField) {
    const auto j = TrainConfig{}.to_json();
    for (const char* key : {"eta", "max_epochs", "batch_size", "alpha", "lambda1", "lambda2", "kind", "rank",
                            "plateau_patience", "stop_patience", "improvement_eps", "seed", "beta1", "beta2", "epsilon",
                            "deterministic", "dev_on_secondary", "snapshot"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j["rank"], 512);
    EXPECT_EQ(j["batch_size"], 6000);
    EXPECT_FALSE(j.contains("threads"));
}
