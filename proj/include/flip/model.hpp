#pragma once

// Probe parameterisation and the differentiable pieces of the objective:
// logits z = b + A(Bu) (or b + Wu), log-softmax, the alpha-mixed negative
// log-likelihood with its analytic gradient, and the L1 proximal operator.
//
// Parameters are stored in `Real` (float in production, double for gradient
// checks); every product and reduction is carried out in double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flip/corpus.hpp"
#include "flip/parallel.hpp"

namespace flip {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind : std::uint32_t { Factorized = 0, Full = 1 };

inline const char* to_string(ModelKind k) { return k == ModelKind::Full ? "full" : "factorized"; }

/// Factorized: A (|V| x r), B (r x d), b. Full: W (|V| x d), b.
template <typename Real = float>
struct ModelParams {
    ModelKind kind = ModelKind::Factorized;
    Matrix<Real> A;
    Matrix<Real> B;
    Matrix<Real> W;
    Vector<Real> b;

    std::size_t vocab_size() const { return static_cast<std::size_t>(b.size()); }
    std::size_t dim() const { return static_cast<std::size_t>(kind == ModelKind::Full ? W.cols() : B.cols()); }
    std::size_t rank() const { return kind == ModelKind::Full ? 0 : static_cast<std::size_t>(A.cols()); }

    /// The L1-regularised matrix: A for Factorized, W for Full.
    Matrix<Real>& sparse_matrix() { return kind == ModelKind::Full ? W : A; }
    const Matrix<Real>& sparse_matrix() const { return kind == ModelKind::Full ? W : A; }

    void validate() const {
        const auto V = b.size();
        if (V == 0) throw ModelError("model has an empty vocabulary");
        if (kind == ModelKind::Factorized) {
            if (W.size() != 0) throw ModelError("factorized model must not hold W");
            if (A.rows() != V || B.rows() != A.cols() || A.cols() == 0 || B.cols() == 0)
                throw ModelError("factorized model has inconsistent shapes");
            if (B.rows() > B.cols()) throw ModelError("rank exceeds embedding dimension");
            if (!A.allFinite() || !B.allFinite()) throw ModelError("non-finite parameter");
        } else {
            if (A.size() != 0 || B.size() != 0) throw ModelError("full model must not hold A or B");
            if (W.rows() != V || W.cols() == 0) throw ModelError("full model has inconsistent shapes");
            if (!W.allFinite()) throw ModelError("non-finite parameter");
        }
        if (!b.allFinite()) throw ModelError("non-finite parameter");
    }

    template <typename Other>
    ModelParams<Other> cast() const {
        ModelParams<Other> out;
        out.kind = kind;
        out.A = A.template cast<Other>();
        out.B = B.template cast<Other>();
        out.W = W.template cast<Other>();
        out.b = b.template cast<Other>();
        return out;
    }

    friend bool operator==(const ModelParams& x, const ModelParams& y) {
        auto same = [](const auto& p, const auto& q) {
            return p.rows() == q.rows() && p.cols() == q.cols() && (p.size() == 0 || p == q);
        };
        return x.kind == y.kind && same(x.A, y.A) && same(x.B, y.B) && same(x.W, y.W) && same(x.b, y.b);
    }
};

/// Entries ~ N(0, 1/fan_in) with fan_in = r for A and d for B and W; b = 0.
template <typename Real = float>
ModelParams<Real> init_params(ModelKind kind, std::size_t vocab_size, std::size_t dim, std::size_t rank,
                              std::uint64_t seed) {
    if (vocab_size == 0 || dim == 0) throw ModelError("model dimensions must be positive");
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Matrix<Real>& m, std::size_t rows, std::size_t cols, std::size_t fan_in) {
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
        m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Real>(normal(rng));
    };
    ModelParams<Real> p;
    p.kind = kind;
    if (kind == ModelKind::Factorized) {
        if (rank == 0) throw ModelError("rank must be positive");
        if (rank > dim) throw ModelError("rank r=" + std::to_string(rank) + " exceeds embedding dim d=" + std::to_string(dim));
        fill(p.A, vocab_size, rank, rank);
        fill(p.B, rank, dim, dim);
    } else {
        fill(p.W, vocab_size, dim, dim);
    }
    p.b = Vector<Real>::Zero(static_cast<Eigen::Index>(vocab_size));
    return p;
}

/// Row-aligned mini-batch: primary embeddings (t_n), optional secondary (s_n), BoW targets (x_n).
struct Batch {
    Matrix<float> primary;
    std::optional<Matrix<float>> secondary;
    std::vector<BowVector> bows;

    std::size_t size() const { return bows.size(); }
};

struct RegConfig {
    double lambda1 = 1e-4;  // L1 on A (or W), applied proximally
    double lambda2 = 0.0;   // decoupled weight decay on B
};

/// How batch rows are partitioned for the gradient reduction. In
/// deterministic mode rows are cut into fixed-size chunks whose partial sums
/// are folded in chunk order, so results do not depend on the thread count.
struct ComputeOptions {
    bool deterministic = true;
    unsigned threads = 1;
    std::size_t chunk_rows = 512;
};

/// Gradients of the mean per-sample loss, in double.
struct Gradients {
    double loss = 0.0;
    Matrix<double> A, B, W;
    Vector<double> b;
};

namespace detail {

template <typename Real>
struct DoubleParams {
    ModelKind kind;
    Matrix<double> A, B, W;
    Vector<double> b;

    explicit DoubleParams(const ModelParams<Real>& p)
        : kind(p.kind),
          A(p.A.template cast<double>()),
          B(p.B.template cast<double>()),
          W(p.W.template cast<double>()),
          b(p.b.template cast<double>()) {}
};

struct Accumulator {
    double loss = 0.0;
    Matrix<double> A, B, W;
    Vector<double> b;

    template <typename P>
    void init(const P& p, bool with_grad) {
        loss = 0.0;
        if (!with_grad) return;
        A = Matrix<double>::Zero(p.A.rows(), p.A.cols());
        B = Matrix<double>::Zero(p.B.rows(), p.B.cols());
        W = Matrix<double>::Zero(p.W.rows(), p.W.cols());
        b = Vector<double>::Zero(p.b.size());
    }
    void add(const Accumulator& o, bool with_grad) {
        loss += o.loss;
        if (!with_grad) return;
        A += o.A;
        B += o.B;
        W += o.W;
        b += o.b;
    }
};

// One likelihood term (primary or secondary) over rows [begin, end).
// scale = coefficient / n; the logit gradient row is scale * (total * softmax(z) - x).
template <typename Real>
void accumulate_term(const DoubleParams<Real>& p, const Matrix<float>& emb, std::span<const BowVector> bows,
                     std::size_t begin, std::size_t end, double coef, double inv_n, bool with_grad,
                     Accumulator& acc) {
    const auto m = static_cast<Eigen::Index>(end - begin);
    const Matrix<double> U = emb.middleRows(static_cast<Eigen::Index>(begin), m).template cast<double>();
    Matrix<double> H;
    Matrix<double> Z;
    if (p.kind == ModelKind::Factorized) {
        H = U * p.B.transpose();
        Z = H * p.A.transpose();
    } else {
        Z = U * p.W.transpose();
    }
    Z.rowwise() += p.b.transpose();

    const double scale = coef * inv_n;
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& x = bows[begin + static_cast<std::size_t>(i)];
        auto z = Z.row(i);
        if (x.total == 0) {
            z.setZero();
            continue;
        }
        const double zmax = z.maxCoeff();
        const double lse = zmax + std::log((z.array() - zmax).exp().sum());
        double xz = 0.0;
        for (const auto& e : x.entries) xz += static_cast<double>(e.count) * z(e.index);
        acc.loss += coef * (static_cast<double>(x.total) * lse - xz);
        if (with_grad) {
            z = ((z.array() - lse).exp() * (scale * static_cast<double>(x.total))).matrix();
            for (const auto& e : x.entries) z(e.index) -= scale * static_cast<double>(e.count);
        }
    }
    if (!with_grad) return;
    acc.b += Z.colwise().sum().transpose();
    if (p.kind == ModelKind::Factorized) {
        acc.A.noalias() += Z.transpose() * H;
        acc.B.noalias() += (Z * p.A).transpose() * U;
    } else {
        acc.W.noalias() += Z.transpose() * U;
    }
}

template <typename Real>
void check_batch(const ModelParams<Real>& p, const Batch& batch, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ModelError("alpha must lie in [0, 1]");
    const auto n = batch.size();
    if (n == 0) throw ModelError("empty batch");
    if (static_cast<std::size_t>(batch.primary.rows()) != n) throw ModelError("primary embeddings not row-aligned with BoW rows");
    if (static_cast<std::size_t>(batch.primary.cols()) != p.dim()) throw ModelError("dimension mismatch between embeddings and model");
    if (alpha < 1.0) {
        if (!batch.secondary) throw ModelError("alpha < 1 requires secondary embeddings");
        if (static_cast<std::size_t>(batch.secondary->rows()) != n) throw ModelError("secondary embeddings not row-aligned");
        if (static_cast<std::size_t>(batch.secondary->cols()) != p.dim()) throw ModelError("dimension mismatch between secondary embeddings and model");
    }
    for (const auto& x : batch.bows)
        for (const auto& e : x.entries)
            if (e.index >= p.vocab_size()) throw ModelError("BoW index outside model vocabulary");
}

template <typename Real>
Gradients evaluate(const ModelParams<Real>& params, const Batch& batch, double alpha, bool with_grad,
                   const ComputeOptions& opts) {
    check_batch(params, batch, alpha);
    const DoubleParams<Real> p(params);
    const std::size_t n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    auto run_rows = [&](std::size_t begin, std::size_t end, Accumulator& acc) {
        if (alpha > 0.0) accumulate_term(p, batch.primary, batch.bows, begin, end, alpha, inv_n, with_grad, acc);
        if (alpha < 1.0) accumulate_term(p, *batch.secondary, batch.bows, begin, end, 1.0 - alpha, inv_n, with_grad, acc);
    };

    Accumulator total;
    total.init(p, with_grad);
    const std::size_t chunk = std::max<std::size_t>(1, opts.chunk_rows);
    if (opts.deterministic) {
        const std::size_t n_chunks = (n + chunk - 1) / chunk;
        const std::size_t wave = std::max(1u, opts.threads);
        for (std::size_t first = 0; first < n_chunks; first += wave) {
            const std::size_t count = std::min(wave, n_chunks - first);
            std::vector<Accumulator> parts(count);
            parallel_for(count, opts.threads, [&](std::size_t i) {
                const std::size_t c = first + i;
                parts[i].init(p, with_grad);
                run_rows(c * chunk, std::min(n, (c + 1) * chunk), parts[i]);
            });
            for (const auto& part : parts) total.add(part, with_grad);
        }
    } else {
        const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, opts.threads), n));
        std::vector<Accumulator> parts(workers);
        parallel_for(workers, workers, [&](std::size_t w) {
            parts[w].init(p, with_grad);
            const std::size_t begin = n * w / workers, end = n * (w + 1) / workers;
            for (std::size_t s = begin; s < end; s += chunk) run_rows(s, std::min(end, s + chunk), parts[w]);
        });
        for (const auto& part : parts) total.add(part, with_grad);
    }

    Gradients g;
    g.loss = total.loss * inv_n;
    if (with_grad) {
        g.A = std::move(total.A);
        g.B = std::move(total.B);
        g.W = std::move(total.W);
        g.b = std::move(total.b);
    }
    return g;
}

}  // namespace detail

/// z = b + A(Bu) for Factorized (A*B is never formed), z = b + Wu for Full.
template <typename Real>
Vector<double> logits(const ModelParams<Real>& p, std::span<const float> u, bool use_bias = true) {
    if (u.size() != p.dim())
        throw ModelError("embedding length " + std::to_string(u.size()) + " does not match model dim " + std::to_string(p.dim()));
    const Eigen::Map<const Vector<float>> uf(u.data(), static_cast<Eigen::Index>(u.size()));
    const Vector<double> ud = uf.cast<double>();
    Vector<double> z;
    if (p.kind == ModelKind::Factorized) {
        const Vector<double> h = p.B.template cast<double>() * ud;
        z = p.A.template cast<double>() * h;
    } else {
        z = p.W.template cast<double>() * ud;
    }
    if (use_bias) z += p.b.template cast<double>();
    return z;
}

/// Logits for every row of `emb` (n x d); returns n x |V|.
template <typename Real>
Matrix<double> logits_rows(const ModelParams<Real>& p, const Matrix<float>& emb, bool use_bias = true) {
    if (static_cast<std::size_t>(emb.cols()) != p.dim()) throw ModelError("dimension mismatch between embeddings and model");
    const Matrix<double> U = emb.template cast<double>();
    Matrix<double> Z;
    if (p.kind == ModelKind::Factorized)
        Z = (U * p.B.template cast<double>().transpose()) * p.A.template cast<double>().transpose();
    else
        Z = U * p.W.template cast<double>().transpose();
    if (use_bias) Z.rowwise() += p.b.template cast<double>().transpose();
    return Z;
}

/// Max-subtracted log-softmax.
inline std::vector<double> log_softmax(std::span<const double> z) {
    if (z.empty()) return {};
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    std::vector<double> out(z.size());
    std::transform(z.begin(), z.end(), out.begin(), [lse](double v) { return v - lse; });
    return out;
}

/// -(1/n) sum_n [alpha x_n^T log softmax(z(t_n)) + (1-alpha) x_n^T log softmax(z(s_n))]
template <typename Real>
double nll(const ModelParams<Real>& params, const Batch& batch, double alpha, const ComputeOptions& opts = {}) {
    return detail::evaluate(params, batch, alpha, false, opts).loss;
}

/// Loss and its analytic gradient with respect to every parameter of `params`.
template <typename Real>
Gradients gradients(const ModelParams<Real>& params, const Batch& batch, double alpha, const ComputeOptions& opts = {}) {
    return detail::evaluate(params, batch, alpha, true, opts);
}

/// In place: m <- sign(m) * max(|m| - tau, 0).
template <typename Derived>
void soft_threshold_inplace(Eigen::MatrixBase<Derived>& m, double tau) {
    if (!(tau >= 0.0)) throw ModelError("soft-threshold tau must be >= 0");
    using Scalar = typename Derived::Scalar;
    const auto t = static_cast<Scalar>(tau);
    m = m.unaryExpr([t](Scalar v) -> Scalar {
        if (v > t) return v - t;
        if (v < -t) return v + t;
        return Scalar(0);
    });
}

template <typename Real>
Matrix<Real> soft_threshold(Matrix<Real> m, double tau) {
    soft_threshold_inplace(m, tau);
    return m;
}

/// Fraction of exact zeros in A (or W).
template <typename Real>
double sparsity(const ModelParams<Real>& p) {
    const auto& m = p.sparse_matrix();
    if (m.size() == 0) return 0.0;
    return static_cast<double>((m.array() == Real(0)).count()) / static_cast<double>(m.size());
}

}  // namespace flip
