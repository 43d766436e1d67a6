#pragma once

#include "slaf/common.hpp"
#include "slaf/rng.hpp"

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>
#include <cmath>

namespace slaf {

// Reverse-mode autodiff over dense matrices. Every op builds a Node whose
// backward closure pulls the adjoint of its output into its parents.
// Graphs are per-evaluation and single-threaded; parameters (leaves with
// requires_grad) persist across evaluations and accumulate gradients until
// zeroed.

template <typename S>
struct Node {
    Mat<S> value;
    Mat<S> grad;   // sized lazily on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<S>>> parents;
    std::function<void(Node<S>&)> backward;
    const char* op = "leaf";

    void accumulate(const Mat<S>& g) {
        if (grad.size() == 0) grad = Mat<S>::Zero(value.rows(), value.cols());
        grad += g;
    }
};

template <typename S>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<S>> n) : node_(std::move(n)) {}

    static Var constant(Mat<S> v) {
        auto n = std::make_shared<Node<S>>();
        n->value = std::move(v);
        n->requires_grad = false;
        return Var(n);
    }

    static Var parameter(Mat<S> v) {
        auto n = std::make_shared<Node<S>>();
        n->value = std::move(v);
        n->requires_grad = true;
        n->op = "param";
        return Var(n);
    }

    const Mat<S>& value() const { return node_->value; }
    Mat<S>& mutable_value() { return node_->value; }
    const Mat<S>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    bool defined() const { return node_ != nullptr; }

    void zero_grad() {
        node_->grad = Mat<S>::Zero(node_->value.rows(), node_->value.cols());
    }

    std::shared_ptr<Node<S>> node() const { return node_; }

private:
    std::shared_ptr<Node<S>> node_;
};

namespace detail {

template <typename S>
Var<S> make_op(const char* op, Mat<S> value,
               std::vector<Var<S>> parents,
               std::function<void(Node<S>&)> backward) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(value);
    n->op = op;
    for (auto& p : parents) {
        n->parents.push_back(p.node());
        if (p.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) n->backward = std::move(backward);
    return Var<S>(n);
}

// Reduce a full-shape gradient back to the (possibly broadcast) parent shape.
template <typename S>
Mat<S> unbroadcast(const Mat<S>& g, Index rows, Index cols) {
    Mat<S> out = g;
    if (rows == 1 && g.rows() > 1) out = Mat<S>(out.colwise().sum());
    if (cols == 1 && out.cols() > 1) out = Mat<S>(out.rowwise().sum());
    return out;
}

template <typename S>
void check_broadcastable(const char* op, const Var<S>& a, const Var<S>& b) {
    bool rows_ok = a.rows() == b.rows() || a.rows() == 1 || b.rows() == 1;
    bool cols_ok = a.cols() == b.cols() || a.cols() == 1 || b.cols() == 1;
    SLAF_CHECK(rows_ok && cols_ok, op, ": shapes (", a.rows(), "x", a.cols(),
               ") and (", b.rows(), "x", b.cols(), ") not broadcastable");
}

template <typename S>
Mat<S> broadcast_to(const Mat<S>& m, Index rows, Index cols) {
    if (m.rows() == rows && m.cols() == cols) return m;
    Mat<S> out(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c)
            out(r, c) = m(m.rows() == 1 ? 0 : r, m.cols() == 1 ? 0 : c);
    return out;
}

} // namespace detail

// ---- elementwise arithmetic (row/column broadcasting) ----

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
    detail::check_broadcastable("add", a, b);
    Index rows = std::max(a.rows(), b.rows());
    Index cols = std::max(a.cols(), b.cols());
    Mat<S> av = detail::broadcast_to(a.value(), rows, cols);
    Mat<S> bv = detail::broadcast_to(b.value(), rows, cols);
    return detail::make_op<S>("add", av + bv, {a, b}, [a, b](Node<S>& n) {
        if (a.requires_grad()) a.node()->accumulate(detail::unbroadcast<S>(n.grad, a.rows(), a.cols()));
        if (b.requires_grad()) b.node()->accumulate(detail::unbroadcast<S>(n.grad, b.rows(), b.cols()));
    });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
    detail::check_broadcastable("sub", a, b);
    Index rows = std::max(a.rows(), b.rows());
    Index cols = std::max(a.cols(), b.cols());
    Mat<S> av = detail::broadcast_to(a.value(), rows, cols);
    Mat<S> bv = detail::broadcast_to(b.value(), rows, cols);
    return detail::make_op<S>("sub", av - bv, {a, b}, [a, b](Node<S>& n) {
        if (a.requires_grad()) a.node()->accumulate(detail::unbroadcast<S>(n.grad, a.rows(), a.cols()));
        if (b.requires_grad()) b.node()->accumulate(detail::unbroadcast<S>(Mat<S>(-n.grad), b.rows(), b.cols()));
    });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
    detail::check_broadcastable("mul", a, b);
    Index rows = std::max(a.rows(), b.rows());
    Index cols = std::max(a.cols(), b.cols());
    Mat<S> av = detail::broadcast_to(a.value(), rows, cols);
    Mat<S> bv = detail::broadcast_to(b.value(), rows, cols);
    return detail::make_op<S>("mul", Mat<S>(av.cwiseProduct(bv)), {a, b},
        [a, b, av, bv](Node<S>& n) {
            if (a.requires_grad()) a.node()->accumulate(detail::unbroadcast<S>(Mat<S>(n.grad.cwiseProduct(bv)), a.rows(), a.cols()));
            if (b.requires_grad()) b.node()->accumulate(detail::unbroadcast<S>(Mat<S>(n.grad.cwiseProduct(av)), b.rows(), b.cols()));
        });
}

template <typename S>
Var<S> scale(const Var<S>& a, S factor) {
    return detail::make_op<S>("scale", Mat<S>(a.value() * factor), {a},
        [a, factor](Node<S>& n) {
            if (a.requires_grad()) a.node()->accumulate(Mat<S>(n.grad * factor));
        });
}

// ---- linear algebra ----

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
    SLAF_CHECK(a.cols() == b.rows(), "matmul: inner dimensions differ, lhs is (",
               a.rows(), "x", a.cols(), "), rhs is (", b.rows(), "x", b.cols(), ")");
    return detail::make_op<S>("matmul", Mat<S>(a.value() * b.value()), {a, b},
        [a, b](Node<S>& n) {
            if (a.requires_grad()) a.node()->accumulate(Mat<S>(n.grad * b.value().transpose()));
            if (b.requires_grad()) b.node()->accumulate(Mat<S>(a.value().transpose() * n.grad));
        });
}

template <typename S>
Var<S> transpose(const Var<S>& a) {
    return detail::make_op<S>("transpose", Mat<S>(a.value().transpose()), {a},
        [a](Node<S>& n) {
            if (a.requires_grad()) a.node()->accumulate(Mat<S>(n.grad.transpose()));
        });
}

// ---- nonlinearities ----

template <typename S>
Var<S> relu(const Var<S>& a) {
    Mat<S> v = a.value().cwiseMax(S(0));
    return detail::make_op<S>("relu", v, {a}, [a](Node<S>& n) {
        if (!a.requires_grad()) return;
        Mat<S> g = n.grad;
        const Mat<S>& x = a.value();
        for (Index i = 0; i < g.rows(); ++i)
            for (Index j = 0; j < g.cols(); ++j)
                if (x(i, j) <= S(0)) g(i, j) = S(0);
        a.node()->accumulate(g);
    });
}

template <typename S>
Var<S> tanh_op(const Var<S>& a) {
    Mat<S> v = a.value().array().tanh().matrix();
    return detail::make_op<S>("tanh", v, {a}, [a, v](Node<S>& n) {
        if (!a.requires_grad()) return;
        Mat<S> g = n.grad.cwiseProduct(Mat<S>((S(1) - v.array().square()).matrix()));
        a.node()->accumulate(g);
    });
}

template <typename S>
Var<S> log_op(const Var<S>& a) {
    SLAF_CHECK((a.value().array() > S(0)).all(), "log: non-positive input");
    Mat<S> v = a.value().array().log().matrix();
    return detail::make_op<S>("log", v, {a}, [a](Node<S>& n) {
        if (!a.requires_grad()) return;
        a.node()->accumulate(Mat<S>(n.grad.cwiseQuotient(a.value())));
    });
}

// ---- softmax over the last axis, optional additive mask ----
//
// Masking is additive -1e9 before normalization; a row whose every column
// is masked has no renormalizable support and raises an empty-context error.

template <typename S>
inline constexpr S kMaskValue = S(-1e9);

template <typename S>
Mat<S> softmax_rows_value(const Mat<S>& logits) {
    Mat<S> out(logits.rows(), logits.cols());
    for (Index r = 0; r < logits.rows(); ++r) {
        S m = logits.row(r).maxCoeff();
        SLAF_CHECK(m > S(-1e8), "softmax: empty context, all columns masked in row ", r);
        Eigen::Array<S, 1, Eigen::Dynamic> e = (logits.row(r).array() - m).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}

template <typename S>
Var<S> softmax_rows(const Var<S>& logits, const Mat<S>* additive_mask = nullptr) {
    Mat<S> z = logits.value();
    if (additive_mask) {
        SLAF_CHECK(additive_mask->rows() == z.rows() && additive_mask->cols() == z.cols(),
                   "softmax: mask shape (", additive_mask->rows(), "x", additive_mask->cols(),
                   ") does not match logits (", z.rows(), "x", z.cols(), ")");
        z += *additive_mask;
    }
    Mat<S> y = softmax_rows_value(z);
    Var<S> a = logits;
    return detail::make_op<S>("softmax", y, {a}, [a, y](Node<S>& n) {
        if (!a.requires_grad()) return;
        Mat<S> g(y.rows(), y.cols());
        for (Index r = 0; r < y.rows(); ++r) {
            S dot = n.grad.row(r).dot(y.row(r));
            g.row(r) = y.row(r).cwiseProduct(Mat<S>(n.grad.row(r).array() - dot));
        }
        a.node()->accumulate(g);
    });
}

// ---- layer normalization over the last axis ----

template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& bias, S eps = S(1e-5)) {
    SLAF_CHECK(gain.rows() == 1 && gain.cols() == x.cols() &&
               bias.rows() == 1 && bias.cols() == x.cols(),
               "layer_norm: gain/bias must be 1x", x.cols());
    Index R = x.rows(), C = x.cols();
    Mat<S> xhat(R, C);
    Mat<S> inv_std(R, 1);
    for (Index r = 0; r < R; ++r) {
        S mean = x.value().row(r).mean();
        Eigen::Array<S, 1, Eigen::Dynamic> cent = x.value().row(r).array() - mean;
        S var = cent.square().mean();
        S is = S(1) / std::sqrt(var + eps);
        inv_std(r, 0) = is;
        xhat.row(r) = (cent * is).matrix();
    }
    Mat<S> out(R, C);
    for (Index r = 0; r < R; ++r)
        out.row(r) = xhat.row(r).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
    Var<S> xv = x, gv = gain, bv = bias;
    return detail::make_op<S>("layer_norm", out, {x, gain, bias},
        [xv, gv, bv, xhat, inv_std](Node<S>& n) {
            Index R = xhat.rows(), C = xhat.cols();
            if (gv.requires_grad()) {
                Mat<S> gg(1, C);
                for (Index c = 0; c < C; ++c)
                    gg(0, c) = n.grad.col(c).dot(xhat.col(c));
                gv.node()->accumulate(gg);
            }
            if (bv.requires_grad())
                bv.node()->accumulate(Mat<S>(n.grad.colwise().sum()));
            if (xv.requires_grad()) {
                Mat<S> gx(R, C);
                for (Index r = 0; r < R; ++r) {
                    // dL/dxhat for the row
                    Eigen::Array<S, 1, Eigen::Dynamic> dxhat =
                        (n.grad.row(r).cwiseProduct(gv.value().row(0))).array();
                    S m1 = dxhat.mean();
                    S m2 = (dxhat * xhat.row(r).array()).mean();
                    gx.row(r) = ((dxhat - m1 - xhat.row(r).array() * m2) * inv_std(r, 0)).matrix();
                }
                xv.node()->accumulate(gx);
            }
        });
}

// ---- gather / concat / slice ----

template <typename S>
Var<S> embedding(const Var<S>& table, const std::vector<int>& ids) {
    Index V = table.rows(), D = table.cols();
    Mat<S> out(static_cast<Index>(ids.size()), D);
    for (size_t i = 0; i < ids.size(); ++i) {
        SLAF_CHECK(ids[i] >= 0 && ids[i] < V, "embedding: id ", ids[i],
                   " outside table of ", V, " rows");
        out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
    }
    Var<S> t = table;
    return detail::make_op<S>("embedding", out, {table}, [t, ids](Node<S>& n) {
        if (!t.requires_grad()) return;
        Mat<S> g = Mat<S>::Zero(t.rows(), t.cols());
        for (size_t i = 0; i < ids.size(); ++i)
            g.row(ids[i]) += n.grad.row(static_cast<Index>(i));
        t.node()->accumulate(g);
    });
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
    SLAF_CHECK(!parts.empty(), "concat_rows: no inputs");
    Index C = parts[0].cols(), R = 0;
    for (const auto& p : parts) {
        SLAF_CHECK(p.cols() == C, "concat_rows: column mismatch ", p.cols(), " vs ", C);
        R += p.rows();
    }
    Mat<S> out(R, C);
    Index at = 0;
    for (const auto& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return detail::make_op<S>("concat_rows", out, parts, [parts](Node<S>& n) {
        Index at = 0;
        for (const auto& p : parts) {
            if (p.requires_grad())
                p.node()->accumulate(Mat<S>(n.grad.middleRows(at, p.rows())));
            at += p.rows();
        }
    });
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
    SLAF_CHECK(!parts.empty(), "concat_cols: no inputs");
    Index R = parts[0].rows(), C = 0;
    for (const auto& p : parts) {
        SLAF_CHECK(p.rows() == R, "concat_cols: row mismatch ", p.rows(), " vs ", R);
        C += p.cols();
    }
    Mat<S> out(R, C);
    Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return detail::make_op<S>("concat_cols", out, parts, [parts](Node<S>& n) {
        Index at = 0;
        for (const auto& p : parts) {
            if (p.requires_grad())
                p.node()->accumulate(Mat<S>(n.grad.middleCols(at, p.cols())));
            at += p.cols();
        }
    });
}

template <typename S>
Var<S> slice_rows(const Var<S>& a, Index start, Index len) {
    SLAF_CHECK(start >= 0 && len >= 1 && start + len <= a.rows(),
               "slice_rows: range [", start, ",", start + len, ") outside ", a.rows(), " rows");
    return detail::make_op<S>("slice_rows", Mat<S>(a.value().middleRows(start, len)), {a},
        [a, start, len](Node<S>& n) {
            if (!a.requires_grad()) return;
            Mat<S> g = Mat<S>::Zero(a.rows(), a.cols());
            g.middleRows(start, len) = n.grad;
            a.node()->accumulate(g);
        });
}

template <typename S>
Var<S> slice_cols(const Var<S>& a, Index start, Index len) {
    SLAF_CHECK(start >= 0 && len >= 1 && start + len <= a.cols(),
               "slice_cols: range [", start, ",", start + len, ") outside ", a.cols(), " cols");
    return detail::make_op<S>("slice_cols", Mat<S>(a.value().middleCols(start, len)), {a},
        [a, start, len](Node<S>& n) {
            if (!a.requires_grad()) return;
            Mat<S> g = Mat<S>::Zero(a.rows(), a.cols());
            g.middleCols(start, len) = n.grad;
            a.node()->accumulate(g);
        });
}

// ---- reductions ----

template <typename S>
Var<S> mean_rows(const Var<S>& a) {
    SLAF_CHECK(a.rows() >= 1, "mean_rows: empty input");
    Mat<S> out = a.value().colwise().mean();
    return detail::make_op<S>("mean_rows", out, {a}, [a](Node<S>& n) {
        if (!a.requires_grad()) return;
        Mat<S> g(a.rows(), a.cols());
        g = n.grad.replicate(a.rows(), 1) / S(a.rows());
        a.node()->accumulate(g);
    });
}

template <typename S>
Var<S> sum_all(const Var<S>& a) {
    Mat<S> out(1, 1);
    out(0, 0) = a.value().sum();
    return detail::make_op<S>("sum_all", out, {a}, [a](Node<S>& n) {
        if (!a.requires_grad()) return;
        a.node()->accumulate(Mat<S>::Constant(a.rows(), a.cols(), n.grad(0, 0)));
    });
}

// ---- cross-entropy over rows of logits ----
//
// Sum over rows of the label-smoothed negative log-likelihood. Smoothing
// distributes `smoothing` mass uniformly over the whole vocabulary. Row
// weights of zero drop a row from the loss (padding).

template <typename S>
Var<S> cross_entropy_rows(const Var<S>& logits, const std::vector<int>& targets,
                          S smoothing = S(0),
                          const std::vector<S>* row_weights = nullptr) {
    Index R = logits.rows(), C = logits.cols();
    SLAF_CHECK(static_cast<Index>(targets.size()) == R,
               "cross_entropy: ", targets.size(), " targets for ", R, " rows");
    Mat<S> probs = softmax_rows_value(logits.value());
    S total = S(0);
    S uni = smoothing / S(C);
    for (Index r = 0; r < R; ++r) {
        SLAF_CHECK(targets[r] >= 0 && targets[r] < C, "cross_entropy: target id ",
                   targets[r], " outside vocab of ", C);
        S w = row_weights ? (*row_weights)[r] : S(1);
        if (w == S(0)) continue;
        // stable log-softmax for the loss value
        S m = logits.value().row(r).maxCoeff();
        S lse = std::log((logits.value().row(r).array() - m).exp().sum()) + m;
        S row_loss = S(0);
        for (Index c = 0; c < C; ++c) {
            S q = uni + (c == targets[r] ? S(1) - smoothing : S(0));
            if (q > S(0)) row_loss -= q * (logits.value()(r, c) - lse);
        }
        total += w * row_loss;
    }
    Mat<S> out(1, 1);
    out(0, 0) = total;
    Var<S> a = logits;
    std::vector<S> weights;
    if (row_weights) weights = *row_weights;
    return detail::make_op<S>("cross_entropy", out, {logits},
        [a, probs, targets, smoothing, weights](Node<S>& n) {
            if (!a.requires_grad()) return;
            Index R = probs.rows(), C = probs.cols();
            S uni = smoothing / S(C);
            Mat<S> g = probs;
            for (Index r = 0; r < R; ++r) {
                S w = weights.empty() ? S(1) : weights[r];
                if (w == S(0)) { g.row(r).setZero(); continue; }
                for (Index c = 0; c < C; ++c) {
                    S q = uni + (c == targets[r] ? S(1) - smoothing : S(0));
                    g(r, c) = w * (probs(r, c) - q);
                }
            }
            a.node()->accumulate(Mat<S>(g * n.grad(0, 0)));
        });
}

// ---- dropout (inverted; identity when rate == 0) ----

template <typename S>
Var<S> dropout(const Var<S>& a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    SLAF_CHECK(rate < 1.0, "dropout: rate must be < 1");
    Mat<S> mask(a.rows(), a.cols());
    S keep = S(1.0 - rate);
    for (Index r = 0; r < a.rows(); ++r)
        for (Index c = 0; c < a.cols(); ++c)
            mask(r, c) = rng.next_double() >= rate ? S(1) / keep : S(0);
    return detail::make_op<S>("dropout", Mat<S>(a.value().cwiseProduct(mask)), {a},
        [a, mask](Node<S>& n) {
            if (a.requires_grad()) a.node()->accumulate(Mat<S>(n.grad.cwiseProduct(mask)));
        });
}

// ---- backward pass ----

template <typename S>
void backpropagate(const Var<S>& loss) {
    SLAF_CHECK(loss.defined(), "backpropagate: undefined loss");
    SLAF_CHECK(loss.rows() == 1 && loss.cols() == 1,
               "backpropagate: loss must be scalar, got (", loss.rows(), "x", loss.cols(), ")");
    // iterative post-order topological sort
    std::vector<Node<S>*> order;
    std::unordered_set<Node<S>*> visited;
    struct Frame { Node<S>* node; size_t next_parent; };
    std::vector<Frame> stack;
    if (loss.node()->requires_grad) stack.push_back({loss.node().get(), 0});
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent == 0 && visited.count(f.node)) { stack.pop_back(); continue; }
        if (f.next_parent < f.node->parents.size()) {
            Node<S>* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) stack.push_back({p, 0});
        } else {
            visited.insert(f.node);
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    loss.node()->accumulate(Mat<S>::Constant(1, 1, S(1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<S>* n = *it;
        if (n->backward && n->grad.size() != 0) n->backward(*n);
    }
}

} // namespace slaf
