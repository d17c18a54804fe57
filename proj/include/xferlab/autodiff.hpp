#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "common.hpp"

namespace xferlab {

/// Dense row-major matrix of doubles. Deliberately minimal: the library only
/// needs batched MLP math, not general linear algebra.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    static Mat row(const std::vector<double>& v) {
        Mat m(1, v.size());
        m.data = v;
        return m;
    }

    static Mat from_column(const std::vector<double>& v) {
        Mat m(v.size(), 1);
        m.data = v;
        return m;
    }

    static Mat from_rows(const std::vector<std::vector<double>>& rows_in) {
        require(!rows_in.empty(), ErrorCode::Precondition, "from_rows on empty vector");
        Mat m(rows_in.size(), rows_in[0].size());
        for (std::size_t i = 0; i < rows_in.size(); ++i) {
            require(rows_in[i].size() == m.cols, ErrorCode::ShapeMismatch, "ragged rows");
            for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = rows_in[i][j];
        }
        return m;
    }
};

/// C += A * B, i-k-j order for cache locality.
inline void matmul_acc(const Mat& a, const Mat& b, Mat& c) {
    require(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, ErrorCode::ShapeMismatch,
            "matmul shape mismatch");
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * c.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

/// C += A^T * B.
inline void matmul_at_b_acc(const Mat& a, const Mat& b, Mat& c) {
    require(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, ErrorCode::ShapeMismatch,
            "matmul_at_b shape mismatch");
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = &a.data[k * a.cols];
        const double* brow = &b.data[k * b.cols];
        for (std::size_t i = 0; i < a.cols; ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = &c.data[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
}

/// C += A * B^T.
inline void matmul_a_bt_acc(const Mat& a, const Mat& b, Mat& c) {
    require(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows, ErrorCode::ShapeMismatch,
            "matmul_a_bt shape mismatch");
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * c.cols];
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = &b.data[j * b.cols];
            double dot = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) dot += arow[k] * brow[k];
            crow[j] += dot;
        }
    }
}

/// Numerically stable log(1 - tanh(x)^2) = 2(log 2 - |x| - log1p(e^{-2|x|})).
inline double tanh_log_det_scalar(double x) {
    double ax = std::fabs(x);
    return 2.0 * (std::numbers::ln2 - ax - std::log1p(std::exp(-2.0 * ax)));
}

enum class Op {
    Input,
    Linear,     // Y = X W + 1 b   (W, b owned externally; grads go to sinks)
    Relu,
    Tanh,
    Exp,
    Log,
    Square,
    TanhLogDet, // log(1 - tanh(x)^2), elementwise
    Clamp,
    Add,
    Sub,
    Mul,        // elementwise
    MinElem,    // elementwise min; ties route gradient to the first input
    Scale,      // c * X
    AddScalar,  // X + c
    ConcatCols,
    SliceCols,
    RowSum,     // n x m -> n x 1
    MeanAll,    // -> 1 x 1
    SumAll,     // -> 1 x 1
};

/// Reverse-mode tape over whole matrices. Nodes are created eagerly with
/// their forward value; backward() runs the adjoint pass once, accumulating
/// into externally owned parameter-gradient sinks for Linear nodes.
class Tape {
  public:
    struct Node {
        Op op;
        int a = -1;  // first input node
        int b = -1;  // second input node
        Mat val;
        Mat grad;
        double c0 = 0.0;  // scalar parameter (Scale/AddScalar/Clamp lo)
        double c1 = 0.0;  // Clamp hi
        std::size_t col0 = 0, col1 = 0;  // SliceCols range [col0, col1)
        const Mat* w = nullptr;  // Linear weight (in x out)
        const Mat* bias = nullptr;  // Linear bias (1 x out)
        Mat* dw = nullptr;  // gradient sinks; may be null when params are frozen
        Mat* dbias = nullptr;
    };

    int input(Mat value) {
        Node n;
        n.op = Op::Input;
        n.val = std::move(value);
        return push(std::move(n));
    }

    int linear(int x, const Mat& w, const Mat& bias, Mat* dw = nullptr, Mat* dbias = nullptr) {
        const Mat& xv = val(x);
        require(xv.cols == w.rows, ErrorCode::ShapeMismatch, "linear: input/weight mismatch");
        require(bias.rows == 1 && bias.cols == w.cols, ErrorCode::ShapeMismatch, "linear: bias shape");
        Node n;
        n.op = Op::Linear;
        n.a = x;
        n.w = &w;
        n.bias = &bias;
        n.dw = dw;
        n.dbias = dbias;
        n.val = Mat(xv.rows, w.cols);
        for (std::size_t i = 0; i < n.val.rows; ++i)
            for (std::size_t j = 0; j < n.val.cols; ++j) n.val.at(i, j) = bias.at(0, j);
        matmul_acc(xv, w, n.val);
        return push(std::move(n));
    }

    int relu(int x) { return unary(Op::Relu, x, [](double v) { return v > 0.0 ? v : 0.0; }); }
    int tanh_(int x) { return unary(Op::Tanh, x, [](double v) { return std::tanh(v); }); }
    int exp_(int x) { return unary(Op::Exp, x, [](double v) { return std::exp(v); }); }
    int log_(int x) { return unary(Op::Log, x, [](double v) { return std::log(v); }); }
    int square(int x) { return unary(Op::Square, x, [](double v) { return v * v; }); }
    int tanh_log_det(int x) { return unary(Op::TanhLogDet, x, tanh_log_det_scalar); }

    int clamp(int x, double lo, double hi) {
        int id = unary(Op::Clamp, x, [&](double v) { return std::min(std::max(v, lo), hi); });
        nodes_[id].c0 = lo;
        nodes_[id].c1 = hi;
        return id;
    }

    int add(int x, int y) { return binary(Op::Add, x, y, [](double a, double b) { return a + b; }); }
    int sub(int x, int y) { return binary(Op::Sub, x, y, [](double a, double b) { return a - b; }); }
    int mul(int x, int y) { return binary(Op::Mul, x, y, [](double a, double b) { return a * b; }); }
    int min_elem(int x, int y) {
        return binary(Op::MinElem, x, y, [](double a, double b) { return a <= b ? a : b; });
    }

    int scale(int x, double c) {
        int id = unary(Op::Scale, x, [&](double v) { return c * v; });
        nodes_[id].c0 = c;
        return id;
    }

    int add_scalar(int x, double c) {
        int id = unary(Op::AddScalar, x, [&](double v) { return v + c; });
        nodes_[id].c0 = c;
        return id;
    }

    int concat_cols(int x, int y) {
        const Mat& xv = val(x);
        const Mat& yv = val(y);
        require(xv.rows == yv.rows, ErrorCode::ShapeMismatch, "concat_cols: row mismatch");
        Node n;
        n.op = Op::ConcatCols;
        n.a = x;
        n.b = y;
        n.val = Mat(xv.rows, xv.cols + yv.cols);
        for (std::size_t i = 0; i < xv.rows; ++i) {
            for (std::size_t j = 0; j < xv.cols; ++j) n.val.at(i, j) = xv.at(i, j);
            for (std::size_t j = 0; j < yv.cols; ++j) n.val.at(i, xv.cols + j) = yv.at(i, j);
        }
        return push(std::move(n));
    }

    int slice_cols(int x, std::size_t c0, std::size_t c1) {
        const Mat& xv = val(x);
        require(c0 < c1 && c1 <= xv.cols, ErrorCode::ShapeMismatch, "slice_cols: bad range");
        Node n;
        n.op = Op::SliceCols;
        n.a = x;
        n.col0 = c0;
        n.col1 = c1;
        n.val = Mat(xv.rows, c1 - c0);
        for (std::size_t i = 0; i < xv.rows; ++i)
            for (std::size_t j = c0; j < c1; ++j) n.val.at(i, j - c0) = xv.at(i, j);
        return push(std::move(n));
    }

    int row_sum(int x) {
        const Mat& xv = val(x);
        Node n;
        n.op = Op::RowSum;
        n.a = x;
        n.val = Mat(xv.rows, 1);
        for (std::size_t i = 0; i < xv.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < xv.cols; ++j) s += xv.at(i, j);
            n.val.at(i, 0) = s;
        }
        return push(std::move(n));
    }

    int mean_all(int x) {
        const Mat& xv = val(x);
        Node n;
        n.op = Op::MeanAll;
        n.a = x;
        n.val = Mat(1, 1);
        double s = 0.0;
        for (double v : xv.data) s += v;
        n.val.at(0, 0) = s / double(xv.size());
        return push(std::move(n));
    }

    int sum_all(int x) {
        const Mat& xv = val(x);
        Node n;
        n.op = Op::SumAll;
        n.a = x;
        n.val = Mat(1, 1);
        double s = 0.0;
        for (double v : xv.data) s += v;
        n.val.at(0, 0) = s;
        return push(std::move(n));
    }

    const Mat& val(int id) const { return nodes_[std::size_t(id)].val; }
    const Mat& grad(int id) const { return nodes_[std::size_t(id)].grad; }
    double scalar(int id) const {
        const Mat& m = val(id);
        require(m.rows == 1 && m.cols == 1, ErrorCode::ShapeMismatch, "scalar() on non-1x1 node");
        return m.at(0, 0);
    }

    /// Adjoint pass from a 1x1 loss node. Parameter sinks are accumulated
    /// into (callers zero them between steps, which is what allows several
    /// losses to share one gradient buffer).
    void backward(int loss) {
        Mat& lm = nodes_[std::size_t(loss)].val;
        require(lm.rows == 1 && lm.cols == 1, ErrorCode::ShapeMismatch, "backward from non-scalar");
        require(std::isfinite(lm.at(0, 0)), ErrorCode::NumericNan, "loss is not finite");
        for (auto& n : nodes_) {
            n.grad.rows = n.val.rows;
            n.grad.cols = n.val.cols;
            n.grad.data.assign(n.val.size(), 0.0);
        }
        nodes_[std::size_t(loss)].grad.at(0, 0) = 1.0;
        for (int id = loss; id >= 0; --id) backprop_node(id);
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    std::vector<Node> nodes_;

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    template <class F>
    int unary(Op op, int x, F f) {
        const Mat& xv = val(x);
        Node n;
        n.op = op;
        n.a = x;
        n.val = Mat(xv.rows, xv.cols);
        for (std::size_t i = 0; i < xv.size(); ++i) n.val.data[i] = f(xv.data[i]);
        return push(std::move(n));
    }

    template <class F>
    int binary(Op op, int x, int y, F f) {
        const Mat& xv = val(x);
        const Mat& yv = val(y);
        require(xv.rows == yv.rows && xv.cols == yv.cols, ErrorCode::ShapeMismatch,
                "elementwise op shape mismatch");
        Node n;
        n.op = op;
        n.a = x;
        n.b = y;
        n.val = Mat(xv.rows, xv.cols);
        for (std::size_t i = 0; i < xv.size(); ++i) n.val.data[i] = f(xv.data[i], yv.data[i]);
        return push(std::move(n));
    }

    void backprop_node(int id) {
        Node& n = nodes_[std::size_t(id)];
        const Mat& g = n.grad;
        bool any = false;
        for (double v : g.data)
            if (v != 0.0) {
                any = true;
                break;
            }
        if (!any) return;

        auto ga = [&]() -> Mat& { return nodes_[std::size_t(n.a)].grad; };
        auto gb = [&]() -> Mat& { return nodes_[std::size_t(n.b)].grad; };
        auto va = [&]() -> const Mat& { return nodes_[std::size_t(n.a)].val; };
        auto vb = [&]() -> const Mat& { return nodes_[std::size_t(n.b)].val; };

        switch (n.op) {
            case Op::Input:
                break;
            case Op::Linear: {
                matmul_a_bt_acc(g, *n.w, ga());  // dX += dY W^T
                if (n.dw) matmul_at_b_acc(va(), g, *n.dw);  // dW += X^T dY
                if (n.dbias) {
                    for (std::size_t i = 0; i < g.rows; ++i)
                        for (std::size_t j = 0; j < g.cols; ++j) n.dbias->at(0, j) += g.at(i, j);
                }
                break;
            }
            case Op::Relu: {
                Mat& da = ga();
                const Mat& xv = va();
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (xv.data[i] > 0.0) da.data[i] += g.data[i];
                break;
            }
            case Op::Tanh: {
                Mat& da = ga();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double t = n.val.data[i];
                    da.data[i] += g.data[i] * (1.0 - t * t);
                }
                break;
            }
            case Op::Exp: {
                Mat& da = ga();
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * n.val.data[i];
                break;
            }
            case Op::Log: {
                Mat& da = ga();
                const Mat& xv = va();
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] / xv.data[i];
                break;
            }
            case Op::Square: {
                Mat& da = ga();
                const Mat& xv = va();
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * 2.0 * xv.data[i];
                break;
            }
            case Op::TanhLogDet: {
                Mat& da = ga();
                const Mat& xv = va();
                for (std::size_t i = 0; i < g.size(); ++i)
                    da.data[i] += g.data[i] * (-2.0 * std::tanh(xv.data[i]));
                break;
            }
            case Op::Clamp: {
                Mat& da = ga();
                const Mat& xv = va();
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (xv.data[i] > n.c0 && xv.data[i] < n.c1) da.data[i] += g.data[i];
                break;
            }
            case Op::Add: {
                Mat& da = ga();
                Mat& db = gb();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    da.data[i] += g.data[i];
                    db.data[i] += g.data[i];
                }
                break;
            }
            case Op::Sub: {
                Mat& da = ga();
                Mat& db = gb();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    da.data[i] += g.data[i];
                    db.data[i] -= g.data[i];
                }
                break;
            }
            case Op::Mul: {
                Mat& da = ga();
                Mat& db = gb();
                const Mat& xv = va();
                const Mat& yv = vb();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    da.data[i] += g.data[i] * yv.data[i];
                    db.data[i] += g.data[i] * xv.data[i];
                }
                break;
            }
            case Op::MinElem: {
                Mat& da = ga();
                Mat& db = gb();
                const Mat& xv = va();
                const Mat& yv = vb();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (xv.data[i] <= yv.data[i])
                        da.data[i] += g.data[i];
                    else
                        db.data[i] += g.data[i];
                }
                break;
            }
            case Op::Scale: {
                Mat& da = ga();
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * n.c0;
                break;
            }
            case Op::AddScalar: {
                Mat& da = ga();
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i];
                break;
            }
            case Op::ConcatCols: {
                Mat& da = ga();
                Mat& db = gb();
                for (std::size_t i = 0; i < g.rows; ++i) {
                    for (std::size_t j = 0; j < da.cols; ++j) da.at(i, j) += g.at(i, j);
                    for (std::size_t j = 0; j < db.cols; ++j) db.at(i, j) += g.at(i, da.cols + j);
                }
                break;
            }
            case Op::SliceCols: {
                Mat& da = ga();
                for (std::size_t i = 0; i < g.rows; ++i)
                    for (std::size_t j = 0; j < g.cols; ++j) da.at(i, n.col0 + j) += g.at(i, j);
                break;
            }
            case Op::RowSum: {
                Mat& da = ga();
                for (std::size_t i = 0; i < da.rows; ++i)
                    for (std::size_t j = 0; j < da.cols; ++j) da.at(i, j) += g.at(i, 0);
                break;
            }
            case Op::MeanAll: {
                Mat& da = ga();
                double s = g.at(0, 0) / double(da.size());
                for (double& v : da.data) v += s;
                break;
            }
            case Op::SumAll: {
                Mat& da = ga();
                double s = g.at(0, 0);
                for (double& v : da.data) v += s;
                break;
            }
        }
    }
};

}  // namespace xferlab
