#pragma once

#include "slaf/autodiff.hpp"
#include "slaf/params.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace slaf {

// Finite-difference gradient verification. The loss closure must rebuild the
// forward graph from the current parameter values on every call; it is
// evaluated 2N times for N parameters, so keep fragments below ~1e4 params.

struct GradCheckGroup {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double max_rel_error = 0.0;
    bool passed = false;
    double tolerance = 0.0;
};

// Centered differences with per-parameter step c * max(1, |theta|).
// The default step suits double precision; float32 needs a coarser step to
// stay above roundoff in the loss difference.
template <typename S>
GradCheckReport grad_check(ParamStore<S>& params,
                           const std::function<Var<S>()>& loss_fn,
                           double tolerance,
                           double step_coeff = 0.0) {
    if (step_coeff == 0.0)
        step_coeff = sizeof(S) >= 8 ? 1e-4 : 1e-3;

    params.zero_grads();
    Var<S> loss = loss_fn();
    double loss0 = static_cast<double>(loss.value()(0, 0));
    SLAF_CHECK(std::isfinite(loss0), "grad_check: non-finite loss, check aborted");
    backpropagate(loss);

    // FD values below this band are indistinguishable from roundoff in the
    // loss difference; errors inside it are not evidence of a wrong gradient
    double eps_s = static_cast<double>(std::numeric_limits<S>::epsilon());
    double noise_band = 10.0 * eps_s * std::max(1.0, std::abs(loss0)) / (2.0 * step_coeff);

    GradCheckReport report;
    report.tolerance = tolerance;
    for (auto& [name, p] : params.entries()) {
        GradCheckGroup group;
        group.name = name;
        Mat<S> analytic = p.grad();
        if (analytic.size() == 0) analytic = Mat<S>::Zero(p.rows(), p.cols());
        // group scale keeps the relative error meaningful for near-zero entries
        double scale = std::max(1e-12, static_cast<double>(analytic.template lpNorm<Eigen::Infinity>()));
        for (Index r = 0; r < p.rows(); ++r) {
            for (Index c = 0; c < p.cols(); ++c) {
                S saved = p.mutable_value()(r, c);
                S h = static_cast<S>(step_coeff * std::max(1.0, std::abs(static_cast<double>(saved))));
                p.mutable_value()(r, c) = saved + h;
                double lp = static_cast<double>(loss_fn().value()(0, 0));
                p.mutable_value()(r, c) = saved - h;
                double lm = static_cast<double>(loss_fn().value()(0, 0));
                p.mutable_value()(r, c) = saved;
                SLAF_CHECK(std::isfinite(lp) && std::isfinite(lm),
                           "grad_check: non-finite loss while perturbing ", name);
                double fd = (lp - lm) / (2.0 * static_cast<double>(h));
                double an = static_cast<double>(analytic(r, c));
                double abs_err = std::abs(an - fd);
                double rel = abs_err <= noise_band
                    ? 0.0
                    : abs_err / std::max({std::abs(an), std::abs(fd), scale});
                group.max_abs_error = std::max(group.max_abs_error, abs_err);
                group.max_rel_error = std::max(group.max_rel_error, rel);
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
        report.groups.push_back(std::move(group));
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

} // namespace slaf
