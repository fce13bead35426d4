#pragma once

// Mini-batch AdamW training with a proximal L1 step, plateau learning-rate
// halving, early stopping on development recall and a grid sweep driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "flip/adamw.hpp"
#include "flip/dataset.hpp"
#include "flip/diagnostics.hpp"
#include "flip/eval.hpp"
#include "flip/inference.hpp"
#include "flip/model.hpp"
#include "flip/parallel.hpp"
#include "flip/tensor_io.hpp"

namespace flip {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Which parameters train() returns.
enum class SnapshotPolicy { BestDev, Last };

struct TrainConfig {
    double eta = 5e-3;
    std::size_t max_epochs = 100;
    std::size_t batch_size = 6000;
    double alpha = 0.5;
    double lambda1 = 1e-4;
    double lambda2 = 0.0;
    ModelKind kind = ModelKind::Factorized;
    std::size_t rank = 512;
    std::size_t plateau_patience = 3;
    std::size_t stop_patience = 10;
    double improvement_eps = 1e-4;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool deterministic = true;
    bool dev_on_secondary = false;
    SnapshotPolicy snapshot = SnapshotPolicy::BestDev;
    unsigned threads = 1;  // not part of the echo: results must not depend on it

    void validate() const {
        if (!(eta > 0.0)) throw TrainingError("eta must be positive");
        if (max_epochs == 0) throw TrainingError("max_epochs must be positive");
        if (batch_size == 0) throw TrainingError("batch_size must be positive");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw TrainingError("alpha must lie in [0, 1]");
        if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw TrainingError("lambda1 and lambda2 must be >= 0");
        if (kind == ModelKind::Factorized && rank == 0) throw TrainingError("rank must be positive");
        if (plateau_patience == 0 || stop_patience == 0) throw TrainingError("patience values must be positive");
        if (!(improvement_eps >= 0.0)) throw TrainingError("improvement_eps must be >= 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
            throw TrainingError("invalid Adam betas/epsilon");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["eta"] = eta;
        j["max_epochs"] = max_epochs;
        j["batch_size"] = batch_size;
        j["alpha"] = alpha;
        j["lambda1"] = lambda1;
        j["lambda2"] = lambda2;
        j["kind"] = to_string(kind);
        j["rank"] = kind == ModelKind::Full ? 0 : rank;
        j["plateau_patience"] = plateau_patience;
        j["stop_patience"] = stop_patience;
        j["improvement_eps"] = improvement_eps;
        j["seed"] = seed;
        j["beta1"] = beta1;
        j["beta2"] = beta2;
        j["epsilon"] = epsilon;
        j["deterministic"] = deterministic;
        j["dev_on_secondary"] = dev_on_secondary;
        j["snapshot"] = snapshot == SnapshotPolicy::BestDev ? "best_dev" : "last";
        return j;
    }
};

struct EpochRecord {
    std::size_t epoch;
    double loss;
    double dev_recall;
    double lr;
    double sparsity;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;

    /// `epoch,loss,dev_recall,lr,sparsity`
    std::string to_csv() const {
        std::ostringstream os;
        os.precision(9);
        os << "epoch,loss,dev_recall,lr,sparsity\n";
        for (const auto& e : epochs) os << e.epoch << ',' << e.loss << ',' << e.dev_recall << ',' << e.lr << ',' << e.sparsity << '\n';
        return os.str();
    }
};

/// Learning-rate halving on plateau plus early stopping. A metric counts as
/// an improvement when it beats the best seen so far by more than eps.
class PlateauSchedule {
public:
    struct Decision {
        bool improved = false;
        bool halved = false;
        bool stop = false;
    };

    PlateauSchedule(double lr, std::size_t plateau_patience, std::size_t stop_patience, double eps)
        : lr_(lr), plateau_patience_(plateau_patience), stop_patience_(stop_patience), eps_(eps) {}

    Decision observe(double metric) {
        Decision d;
        if (!best_ || metric > *best_ + eps_) {
            best_ = metric;
            since_best_ = 0;
            since_halving_ = 0;
            d.improved = true;
            return d;
        }
        ++since_best_;
        ++since_halving_;
        if (since_halving_ >= plateau_patience_) {
            lr_ *= 0.5;
            since_halving_ = 0;
            d.halved = true;
        }
        d.stop = since_best_ >= stop_patience_;
        return d;
    }

    double lr() const noexcept { return lr_; }

private:
    double lr_;
    std::size_t plateau_patience_;
    std::size_t stop_patience_;
    double eps_;
    std::optional<double> best_;
    std::size_t since_best_ = 0;
    std::size_t since_halving_ = 0;
};

/// Dev-set accuracy with k per row set to its in-vocabulary reference count.
template <typename Real>
double dev_recall(const ModelParams<Real>& params, const Dataset& dev, bool use_secondary = false) {
    if (dev.size() == 0) throw TrainingError("empty dev set");
    const auto refs = dev.references();
    const Matrix<float>& emb = use_secondary ? dev.secondary.value() : dev.primary;
    const auto ex = batch_extract(params, dev.vocab, emb, KPolicy::reference_counts(refs), true);
    return accuracy(ex, refs).mean;
}

struct TrainResult {
    Checkpoint checkpoint;        // best-dev snapshot, or last state per SnapshotPolicy
    ModelParams<float> final_params;
    TrainHistory history;
    std::size_t skipped_rows = 0;  // rows with an empty BoW
};

namespace detail {

inline Batch gather_batch(const Dataset& ds, std::span<const std::size_t> rows, bool with_secondary) {
    Batch batch;
    const auto n = static_cast<Eigen::Index>(rows.size());
    batch.primary.resize(n, ds.primary.cols());
    if (with_secondary) batch.secondary.emplace(n, ds.secondary->cols());
    batch.bows.reserve(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
        batch.primary.row(i) = ds.primary.row(r);
        if (with_secondary) batch.secondary->row(i) = ds.secondary->row(r);
        batch.bows.push_back(ds.bows[static_cast<std::size_t>(r)]);
    }
    return batch;
}

inline std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
    return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1));
}

}  // namespace detail

/// One optimizer step: AdamW on every tensor (weight decay on B only), then
/// soft-thresholding of A (or W) by lambda1 * lr.
template <typename Real>
void optimizer_step(ModelParams<Real>& params, const Gradients& g, AdamW<Real>& opt,
                    std::vector<typename AdamW<Real>::Slot>& slots, double lr, const RegConfig& reg) {
    slots.resize(3);
    opt.begin_step();
    if (params.kind == ModelKind::Factorized) {
        opt.update(params.A, g.A, slots[0], lr, 0.0);
        opt.update(params.B, g.B, slots[1], lr, reg.lambda2);
    } else {
        opt.update(params.W, g.W, slots[0], lr, 0.0);
    }
    opt.update(params.b, g.b, slots[2], lr, 0.0);
    if (reg.lambda1 > 0.0) soft_threshold_inplace(params.sparse_matrix(), reg.lambda1 * lr);
}

inline TrainResult train(const Dataset& train_set, const Dataset& dev, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0) throw TrainingError("empty training set");
    if (train_set.vocab.size() != dev.vocab.size() || train_set.vocab_hash != dev.vocab_hash)
        throw TrainingError("train and dev datasets use different vocabularies");
    const bool need_secondary = cfg.alpha < 1.0;
    if (need_secondary && !train_set.secondary) throw TrainingError("alpha < 1 requires secondary training embeddings");
    if (cfg.dev_on_secondary && !dev.secondary) throw TrainingError("dev_on_secondary requires secondary dev embeddings");
    if (dev.dim() != train_set.dim()) throw TrainingError("train and dev embeddings differ in dimension");

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < train_set.size(); ++i)
        if (!train_set.bows[i].empty()) rows.push_back(i);
    TrainResult result;
    result.skipped_rows = train_set.size() - rows.size();
    if (rows.empty()) throw TrainingError("no training row has an in-vocabulary token");
    if (result.skipped_rows > 0)
        warn("skipped " + std::to_string(result.skipped_rows) + " training rows with no in-vocabulary tokens");

    auto params = init_params<float>(cfg.kind, train_set.vocab.size(), train_set.dim(),
                                     cfg.kind == ModelKind::Full ? 0 : cfg.rank, cfg.seed);
    AdamW<float> opt({cfg.beta1, cfg.beta2, cfg.epsilon});
    std::vector<AdamW<float>::Slot> slots;
    const RegConfig reg{cfg.lambda1, cfg.lambda2};
    ComputeOptions copts;
    copts.deterministic = cfg.deterministic;
    copts.threads = cfg.threads;

    PlateauSchedule schedule(cfg.eta, cfg.plateau_patience, cfg.stop_patience, cfg.improvement_eps);
    const std::string config_echo = cfg.to_json().dump();
    std::optional<Checkpoint> best;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double lr = schedule.lr();
        std::mt19937_64 rng(detail::epoch_seed(cfg.seed, epoch));
        std::shuffle(rows.begin(), rows.end(), rng);

        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < rows.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(rows.size(), begin + cfg.batch_size);
            const auto batch = detail::gather_batch(train_set, std::span(rows).subspan(begin, end - begin), need_secondary);
            const auto g = gradients(params, batch, cfg.alpha, copts);
            if (!std::isfinite(g.loss))
                throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + ", rows " +
                                    std::to_string(begin) + ".." + std::to_string(end) + " (lr=" + std::to_string(lr) +
                                    "); lower eta or check embeddings");
            optimizer_step(params, g, opt, slots, lr, reg);
            loss_sum += g.loss * static_cast<double>(end - begin);
        }

        const double recall = dev_recall(params, dev, cfg.dev_on_secondary);
        result.history.epochs.push_back({epoch, loss_sum / static_cast<double>(rows.size()), recall, lr, sparsity(params)});
        if (!best || recall > best->meta.dev_recall) {
            best = Checkpoint{params, train_set.vocab_hash, {static_cast<std::uint32_t>(epoch), recall, config_echo}};
        }
        if (schedule.observe(recall).stop) break;
    }

    result.final_params = params;
    if (cfg.snapshot == SnapshotPolicy::Last) {
        const auto& last = result.history.epochs.back();
        result.checkpoint = Checkpoint{std::move(params), train_set.vocab_hash,
                                       {static_cast<std::uint32_t>(last.epoch), last.dev_recall, config_echo}};
    } else {
        result.checkpoint = std::move(*best);
    }
    return result;
}

// ---- sweep ---------------------------------------------------------------------

struct SweepGrid {
    std::vector<std::size_t> ranks;  // 0 denotes the Full kind
    std::vector<double> lambda1s;
    std::vector<double> lambda2s;
    std::vector<double> alphas;
};

struct SweepCell {
    TrainConfig config;
    std::optional<double> best_dev_recall;
    double sparsity = 0.0;
    std::optional<Checkpoint> checkpoint;
    std::string error;
};

/// Cartesian product of the grid over `base`, each trained independently with
/// the same seed. Failures are recorded per cell. Sorted by best dev recall
/// (descending, failures last); ties keep grid order.
inline std::vector<SweepCell> sweep(const SweepGrid& grid, const Dataset& train_set, const Dataset& dev,
                                    const TrainConfig& base) {
    std::vector<SweepCell> cells;
    auto or_base = [](const auto& v, auto fallback) {
        return v.empty() ? std::vector<decltype(fallback)>{fallback} : v;
    };
    for (auto r : or_base(grid.ranks, base.kind == ModelKind::Full ? std::size_t{0} : base.rank))
        for (auto l1 : or_base(grid.lambda1s, base.lambda1))
            for (auto l2 : or_base(grid.lambda2s, base.lambda2))
                for (auto a : or_base(grid.alphas, base.alpha)) {
                    SweepCell cell;
                    cell.config = base;
                    cell.config.kind = r == 0 ? ModelKind::Full : ModelKind::Factorized;
                    cell.config.rank = r;
                    cell.config.lambda1 = l1;
                    cell.config.lambda2 = l2;
                    cell.config.alpha = a;
                    cell.config.threads = 1;
                    cells.push_back(std::move(cell));
                }
    if (cells.empty()) throw TrainingError("empty sweep grid");

    parallel_for(cells.size(), base.threads, [&](std::size_t i) {
        auto& cell = cells[i];
        try {
            auto res = train(train_set, dev, cell.config);
            cell.best_dev_recall = res.checkpoint.meta.dev_recall;
            cell.sparsity = sparsity(res.checkpoint.params);
            cell.checkpoint = std::move(res.checkpoint);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    });

    std::stable_sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        if (a.best_dev_recall.has_value() != b.best_dev_recall.has_value()) return a.best_dev_recall.has_value();
        return a.best_dev_recall.value_or(0.0) > b.best_dev_recall.value_or(0.0);
    });
    return cells;
}

inline std::string sweep_report_csv(std::span<const SweepCell> cells) {
    std::ostringstream os;
    os.precision(9);
    os << "rank,kind,lambda1,lambda2,alpha,best_dev_recall,sparsity,error\n";
    for (const auto& c : cells) {
        os << (c.config.kind == ModelKind::Full ? 0 : c.config.rank) << ',' << to_string(c.config.kind) << ','
           << c.config.lambda1 << ',' << c.config.lambda2 << ',' << c.config.alpha << ',';
        if (c.best_dev_recall) os << *c.best_dev_recall;
        os << ',' << c.sparsity << ',' << '"' << c.error << '"' << '\n';
    }
    return os.str();
}

}  // namespace flip
