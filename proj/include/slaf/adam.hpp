#pragma once

#include "slaf/params.hpp"

#include <cmath>
#include <vector>

namespace slaf {

// Adam with bias correction. Moments live in the training scalar type and
// are part of the checkpoint, so a resumed run reproduces the uninterrupted
// one step for step.
template <typename S>
class Adam {
public:
    Adam(ParamStore<S>& params, double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9)
        : params_(&params), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& [name, p] : params.entries()) {
            m_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
            v_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
        }
    }

    void step(double lr) {
        ++t_;
        S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
        S bc1 = static_cast<S>(1.0 - std::pow(beta1_, t_));
        S bc2 = static_cast<S>(1.0 - std::pow(beta2_, t_));
        size_t i = 0;
        for (auto& [name, p] : params_->entries()) {
            Mat<S> g = p.grad();
            if (g.size() == 0) g = Mat<S>::Zero(p.rows(), p.cols());
            m_[i] = b1 * m_[i] + (S(1) - b1) * g;
            v_[i] = (b2 * v_[i]).eval() + Mat<S>((S(1) - b2) * g.cwiseProduct(g));
            Mat<S> mhat = m_[i] / bc1;
            Mat<S> vhat = v_[i] / bc2;
            p.mutable_value() -= static_cast<S>(lr) *
                mhat.cwiseQuotient(Mat<S>(vhat.cwiseSqrt().array() + static_cast<S>(eps_)));
            ++i;
        }
    }

    long steps_taken() const { return t_; }
    void set_steps_taken(long t) { t_ = t; }
    std::vector<Mat<S>>& m() { return m_; }
    std::vector<Mat<S>>& v() { return v_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }
    double eps() const { return eps_; }

private:
    ParamStore<S>* params_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat<S>> m_, v_;
};

// inverse-square-root schedule: linear warmup to the peak, then decay
inline double inv_sqrt_lr(long step, double peak, long warmup_steps) {
    if (step < 1) step = 1;
    double s = static_cast<double>(step), w = static_cast<double>(warmup_steps);
    return peak * std::min(s / w, std::sqrt(w / s));
}

} // namespace slaf
