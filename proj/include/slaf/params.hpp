#pragma once

#include "slaf/autodiff.hpp"
#include "slaf/rng.hpp"

#include <string>
#include <utility>
#include <vector>

namespace slaf {

// Named parameter registry. Declaration order is the serialization order of
// checkpoints, so parameters must be registered deterministically.
template <typename S>
class ParamStore {
public:
    Var<S> add(const std::string& name, Mat<S> init) {
        Var<S> v = Var<S>::parameter(std::move(init));
        params_.emplace_back(name, v);
        return v;
    }

    // Glorot-uniform matrix: U(-a, a), a = sqrt(6 / (fan_in + fan_out))
    Var<S> add_glorot(const std::string& name, Index rows, Index cols, Rng& rng) {
        double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Mat<S> m(rows, cols);
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c)
                m(r, c) = static_cast<S>(rng.uniform(-a, a));
        return add(name, std::move(m));
    }

    // N(0, d_model^-0.5) embedding init
    Var<S> add_embedding(const std::string& name, Index vocab, Index d_model, Rng& rng) {
        double sd = std::pow(static_cast<double>(d_model), -0.5);
        Mat<S> m(vocab, d_model);
        for (Index r = 0; r < vocab; ++r)
            for (Index c = 0; c < d_model; ++c)
                m(r, c) = static_cast<S>(rng.normal() * sd);
        return add(name, std::move(m));
    }

    Var<S> add_zeros(const std::string& name, Index rows, Index cols) {
        return add(name, Mat<S>::Zero(rows, cols));
    }

    Var<S> add_ones(const std::string& name, Index rows, Index cols) {
        return add(name, Mat<S>::Ones(rows, cols));
    }

    std::vector<std::pair<std::string, Var<S>>>& entries() { return params_; }
    const std::vector<std::pair<std::string, Var<S>>>& entries() const { return params_; }

    size_t total_size() const {
        size_t n = 0;
        for (const auto& [name, v] : params_) n += static_cast<size_t>(v.value().size());
        return n;
    }

    void zero_grads() {
        for (auto& [name, v] : params_) v.zero_grad();
    }

private:
    std::vector<std::pair<std::string, Var<S>>> params_;
};

} // namespace slaf
