#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "flip/model.hpp"

namespace flip {

/// Adam with decoupled weight decay. One AdamW instance drives every
/// parameter tensor of a model; each tensor keeps its own moment slots.
template <typename Real = float>
class AdamW {
public:
    struct Params {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    struct Slot {
        Matrix<Real> m;
        Matrix<Real> v;
    };

    AdamW() = default;
    explicit AdamW(Params params) : params_(params) {}

    /// Advances the shared step counter; call once per optimizer step, before update().
    void begin_step() { ++step_; }
    std::uint64_t step_index() const noexcept { return step_; }

    /// p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)
    template <typename Derived, typename GradDerived>
    void update(Eigen::PlainObjectBase<Derived>& p, const Eigen::PlainObjectBase<GradDerived>& grad, Slot& slot, double lr,
                double weight_decay) const {
        if (step_ == 0) throw std::logic_error("AdamW::update called before begin_step");
        if (grad.rows() != p.rows() || grad.cols() != p.cols()) throw std::invalid_argument("adamw parameter/gradient shape mismatch");
        if (slot.m.rows() != p.rows() || slot.m.cols() != p.cols()) {
            slot.m = Matrix<Real>::Zero(p.rows(), p.cols());
            slot.v = Matrix<Real>::Zero(p.rows(), p.cols());
        }
        const double b1 = params_.beta1, b2 = params_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
        static_assert(bool(Derived::IsRowMajor) == bool(GradDerived::IsRowMajor) || Derived::ColsAtCompileTime == 1,
                      "parameter and gradient must share storage order");
        const double* gd = grad.data();
        Real* pd = p.data();
        Real* md = slot.m.data();
        Real* vd = slot.v.data();
        const Eigen::Index n = p.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double g = gd[i];
            const double m = b1 * static_cast<double>(md[i]) + (1.0 - b1) * g;
            const double v = b2 * static_cast<double>(vd[i]) + (1.0 - b2) * g * g;
            md[i] = static_cast<Real>(m);
            vd[i] = static_cast<Real>(v);
            double x = static_cast<double>(pd[i]);
            x -= lr * weight_decay * x;
            x -= lr * (m / c1) / (std::sqrt(v / c2) + params_.epsilon);
            pd[i] = static_cast<Real>(x);
        }
    }

private:
    Params params_;
    std::uint64_t step_ = 0;
};

}  // namespace flip
