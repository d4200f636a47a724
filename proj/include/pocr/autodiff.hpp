#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

// Minimal reverse-mode differentiation over dense matrices. Nodes are
// appended in evaluation order, so reverse iteration is a valid
// topological order for the backward sweep.
namespace pocr::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using NodeId = int;

template <typename Scalar>
class Tape {
public:
    using Mat = Matrix<Scalar>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    NodeId constant(Mat value) { return push(std::move(value), {}); }

    /// Leaf whose gradient is accumulated into grad_out[offset, offset+size).
    NodeId parameter(const Scalar* data, int rows, int cols, size_t offset) {
        Mat v = Eigen::Map<const Mat>(data, rows, cols);
        const NodeId id = push(std::move(v), {});
        params_.push_back({id, offset});
        return id;
    }

    const Mat& value(NodeId id) const { return nodes_[id].value; }
    const Mat& grad(NodeId id) const { return nodes_[id].grad; }

    NodeId matmul(NodeId a, NodeId b) {
        Mat out = value(a) * value(b);
        return push(std::move(out), [this, a, b](const Mat& g) {
            accumulate(a, g * value(b).transpose());
            accumulate(b, value(a).transpose() * g);
        });
    }

    NodeId add(NodeId a, NodeId b) {
        Mat out = value(a) + value(b);
        return push(std::move(out), [this, a, b](const Mat& g) {
            accumulate(a, g);
            accumulate(b, g);
        });
    }

    /// a (n x m) + broadcast row vector b (1 x m).
    NodeId add_row(NodeId a, NodeId b) {
        Mat out = value(a).rowwise() + value(b).row(0);
        return push(std::move(out), [this, a, b](const Mat& g) {
            accumulate(a, g);
            accumulate(b, g.colwise().sum());
        });
    }

    /// slope = 0 gives ReLU.
    NodeId leaky_relu(NodeId a, Scalar slope) {
        Mat out = value(a).unaryExpr([slope](Scalar x) { return x > 0 ? x : slope * x; });
        return push(std::move(out), [this, a, slope](const Mat& g) {
            Mat d = value(a).unaryExpr([slope](Scalar x) { return x > 0 ? Scalar(1) : slope; });
            accumulate(a, g.cwiseProduct(d));
        });
    }

    /// Sums each consecutive group of `group` rows: (n*group x m) -> (n x m).
    /// Rows with row_mask[r] == 0 are skipped when a mask is given.
    NodeId group_sum(NodeId a, int group, std::vector<char> row_mask = {}) {
        const Mat& x = value(a);
        if (group <= 0 || x.rows() % group != 0) throw std::invalid_argument("group_sum: bad group size");
        const int n = static_cast<int>(x.rows()) / group;
        Mat out = Mat::Zero(n, x.cols());
        for (int i = 0; i < n; ++i)
            for (int r = 0; r < group; ++r)
                if (row_mask.empty() || row_mask[i * group + r]) out.row(i) += x.row(i * group + r);
        return push(std::move(out), [this, a, group, n, row_mask = std::move(row_mask)](const Mat& g) {
            Mat d = Mat::Zero(value(a).rows(), value(a).cols());
            for (int i = 0; i < n; ++i)
                for (int r = 0; r < group; ++r)
                    if (row_mask.empty() || row_mask[i * group + r]) d.row(i * group + r) = g.row(i);
            accumulate(a, d);
        });
    }

    /// Multi-head scaled dot-product attention within each group of `group`
    /// rows. q, k, v are (n*group x heads*dh). key_mask (optional, per row)
    /// removes keys from the softmax; a group with no valid key yields zeros.
    NodeId attention(NodeId q, NodeId k, NodeId v, int group, int heads, std::vector<char> key_mask = {}) {
        const Mat& Q = value(q);
        const Mat& K = value(k);
        const Mat& V = value(v);
        const int hidden = static_cast<int>(Q.cols());
        if (heads <= 0 || hidden % heads != 0) throw std::invalid_argument("attention: hidden not divisible by heads");
        const int dh = hidden / heads;
        const int n = static_cast<int>(Q.rows()) / group;
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
        // weights[(i*heads + h)] is group x group
        std::vector<Mat> weights(static_cast<size_t>(n) * heads);
        Mat out = Mat::Zero(Q.rows(), hidden);
        for (int i = 0; i < n; ++i) {
            for (int h = 0; h < heads; ++h) {
                auto Qb = Q.block(i * group, h * dh, group, dh);
                auto Kb = K.block(i * group, h * dh, group, dh);
                auto Vb = V.block(i * group, h * dh, group, dh);
                Mat s = (Qb * Kb.transpose()) * scale;
                Mat& w = weights[static_cast<size_t>(i) * heads + h];
                w = Mat::Zero(group, group);
                for (int r = 0; r < group; ++r) {
                    Scalar mx = -std::numeric_limits<Scalar>::infinity();
                    for (int c = 0; c < group; ++c)
                        if (key_mask.empty() || key_mask[i * group + c]) mx = std::max(mx, s(r, c));
                    if (!std::isfinite(mx)) continue;
                    Scalar z = 0;
                    for (int c = 0; c < group; ++c) {
                        if (!key_mask.empty() && !key_mask[i * group + c]) continue;
                        w(r, c) = std::exp(s(r, c) - mx);
                        z += w(r, c);
                    }
                    w.row(r) /= z;
                }
                out.block(i * group, h * dh, group, dh) = w * Vb;
            }
        }
        return push(std::move(out), [this, q, k, v, group, heads, dh, n, scale, weights = std::move(weights)](const Mat& g) {
            const Mat& Q = value(q);
            const Mat& K = value(k);
            const Mat& V = value(v);
            Mat dQ = Mat::Zero(Q.rows(), Q.cols());
            Mat dK = Mat::Zero(K.rows(), K.cols());
            Mat dV = Mat::Zero(V.rows(), V.cols());
            for (int i = 0; i < n; ++i) {
                for (int h = 0; h < heads; ++h) {
                    const Mat& w = weights[static_cast<size_t>(i) * heads + h];
                    auto gb = g.block(i * group, h * dh, group, dh);
                    dV.block(i * group, h * dh, group, dh) += w.transpose() * gb;
                    Mat dw = gb * V.block(i * group, h * dh, group, dh).transpose();
                    // softmax backward, row-wise: ds = w * (dw - sum(dw * w))
                    Mat ds = w.cwiseProduct(dw.colwise() - dw.cwiseProduct(w).rowwise().sum());
                    ds *= scale;
                    dQ.block(i * group, h * dh, group, dh) += ds * K.block(i * group, h * dh, group, dh);
                    dK.block(i * group, h * dh, group, dh) += ds.transpose() * Q.block(i * group, h * dh, group, dh);
                }
            }
            accumulate(q, dQ);
            accumulate(k, dK);
            accumulate(v, dV);
        });
    }

    /// Mean over rows of the mean squared error across columns (1 x 1).
    NodeId mse(NodeId pred, const Mat& target) {
        const Mat& p = value(pred);
        if (p.rows() != target.rows() || p.cols() != target.cols()) throw std::invalid_argument("mse: shape mismatch");
        Mat diff = p - target;
        Mat out(1, 1);
        const Scalar denom = static_cast<Scalar>(p.rows() * p.cols());
        out(0, 0) = diff.squaredNorm() / denom;
        return push(std::move(out), [this, pred, diff = std::move(diff), denom](const Mat& g) {
            accumulate(pred, diff * (Scalar(2) * g(0, 0) / denom));
        });
    }

    /// Runs the backward sweep from a 1x1 root and adds parameter gradients
    /// into grad_out.
    void backward(NodeId root, std::span<Scalar> grad_out) {
        for (auto& node : nodes_) node.grad = Mat::Zero(node.value.rows(), node.value.cols());
        nodes_[root].grad.setOnes();
        for (int i = root; i >= 0; --i) {
            if (nodes_[i].backward) nodes_[i].backward(nodes_[i].grad);
        }
        for (const auto& p : params_) {
            const Mat& g = nodes_[p.node].grad;
            Eigen::Map<Mat>(grad_out.data() + p.offset, g.rows(), g.cols()) += g;
        }
    }

private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(const Mat&)> backward;
    };
    struct ParamRef {
        NodeId node;
        size_t offset;
    };

    NodeId push(Mat value, std::function<void(const Mat&)> backward) {
        nodes_.push_back({std::move(value), Mat(), std::move(backward)});
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    void accumulate(NodeId id, const Mat& g) {
        Mat& dst = nodes_[id].grad;
        if (dst.size() == 0) dst = Mat::Zero(nodes_[id].value.rows(), nodes_[id].value.cols());
        dst += g;
    }

    std::vector<Node> nodes_;
    std::vector<ParamRef> params_;
};

}  // namespace pocr::ad
