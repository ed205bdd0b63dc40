#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kt/errors.hpp"
#include "kt/rng.hpp"
#include "kt/tensor.hpp"

namespace kt {

struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

// Reverse-mode tape. Operations append nodes in execution order, so the tape
// itself is a topological order; backward() walks it once in reverse.
class Graph {
  public:
    Var leaf(Tensor t, bool needs_grad = false) {
        return push(std::move(t), needs_grad, {});
    }

    const Tensor& value(Var v) const { return nodes_[v.i].val; }

    // Gradient of the last backward() target w.r.t. v; zeros if v never
    // participated.
    Tensor grad(Var v) const {
        const Node& n = nodes_[v.i];
        if (n.grad.size() == 0) return Tensor::zeros(n.val.shape);
        return n.grad;
    }

    size_t node_count() const { return nodes_.size(); }

    // ---- ops -------------------------------------------------------------

    Var matmul(Var a, Var b) {
        const Tensor& ta = v(a);
        const Tensor& tb = v(b);
        if (ta.cols() != tb.rows())
            throw ShapeError("matmul: inner dimensions disagree " + ta.shape_str() + " vs " + tb.shape_str());
        Tensor out = Tensor::zeros(ta.rows(), tb.cols());
        mm_nn_acc(ta.data.data(), tb.data.data(), out.data.data(), ta.rows(), ta.cols(), tb.cols());
        Var r = push(std::move(out), needs(a) || needs(b), {a.i, b.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, b, r] {
                const Tensor& g = node(r).grad;
                const Tensor& va = v(a);
                const Tensor& vb = v(b);
                if (needs(a))
                    mm_nt_acc(g.data.data(), vb.data.data(), grad_buf(a), va.rows(), vb.cols(), va.cols());
                if (needs(b))
                    mm_tn_acc(va.data.data(), g.data.data(), grad_buf(b), vb.rows(), va.rows(), vb.cols());
            };
        return r;
    }

    // a * b^T
    Var matmul_nt(Var a, Var b) {
        const Tensor& ta = v(a);
        const Tensor& tb = v(b);
        if (ta.cols() != tb.cols())
            throw ShapeError("matmul_nt: inner dimensions disagree " + ta.shape_str() + " vs " + tb.shape_str());
        Tensor out = Tensor::zeros(ta.rows(), tb.rows());
        mm_nt_acc(ta.data.data(), tb.data.data(), out.data.data(), ta.rows(), ta.cols(), tb.rows());
        Var r = push(std::move(out), needs(a) || needs(b), {a.i, b.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, b, r] {
                const Tensor& g = node(r).grad;  // [n, m] where m = rows(b)
                const Tensor& va = v(a);
                const Tensor& vb = v(b);
                if (needs(a))  // dA = g * B
                    mm_nn_acc(g.data.data(), vb.data.data(), grad_buf(a), va.rows(), vb.rows(), va.cols());
                if (needs(b))  // dB = g^T * A
                    mm_tn_acc(g.data.data(), va.data.data(), grad_buf(b), vb.rows(), va.rows(), vb.cols());
            };
        return r;
    }

    Var add(Var a, Var b) {
        const Tensor& ta = v(a);
        const Tensor& tb = v(b);
        require_same_shape(ta, tb, "add");
        Tensor out = ta;
        for (int64_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
        Var r = push(std::move(out), needs(a) || needs(b), {a.i, b.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, b, r] {
                const Tensor& g = node(r).grad;
                if (needs(a)) acc(a, g);
                if (needs(b)) acc(b, g);
            };
        return r;
    }

    // Adds a [1,n] bias row to every row of a.
    Var add_bias(Var a, Var bias) {
        const Tensor& ta = v(a);
        const Tensor& tb = v(bias);
        if (tb.rows() != 1 || tb.cols() != ta.cols())
            throw ShapeError("add_bias: expected [1x" + std::to_string(ta.cols()) + "] bias, got " + tb.shape_str());
        Tensor out = ta;
        for (int i = 0; i < out.rows(); ++i)
            for (int j = 0; j < out.cols(); ++j) out.at(i, j) += tb.at(0, j);
        Var r = push(std::move(out), needs(a) || needs(bias), {a.i, bias.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, bias, r] {
                const Tensor& g = node(r).grad;
                if (needs(a)) acc(a, g);
                if (needs(bias)) {
                    double* gb = grad_buf(bias);
                    for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < g.cols(); ++j) gb[j] += g.at(i, j);
                }
            };
        return r;
    }

    Var mul(Var a, Var b) {
        const Tensor& ta = v(a);
        const Tensor& tb = v(b);
        require_same_shape(ta, tb, "mul");
        Tensor out = ta;
        for (int64_t i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
        Var r = push(std::move(out), needs(a) || needs(b), {a.i, b.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, b, r] {
                const Tensor& g = node(r).grad;
                const Tensor& va = v(a);
                const Tensor& vb = v(b);
                if (needs(a)) {
                    double* ga = grad_buf(a);
                    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g.data[i] * vb.data[i];
                }
                if (needs(b)) {
                    double* gb = grad_buf(b);
                    for (int64_t i = 0; i < g.size(); ++i) gb[i] += g.data[i] * va.data[i];
                }
            };
        return r;
    }

    Var scale(Var a, double c) {
        Tensor out = v(a);
        for (double& x : out.data) x *= c;
        Var r = push(std::move(out), needs(a), {a.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, c, r] {
                const Tensor& g = node(r).grad;
                double* ga = grad_buf(a);
                for (int64_t i = 0; i < g.size(); ++i) ga[i] += c * g.data[i];
            };
        return r;
    }

    Var concat_cols(Var a, Var b) {
        const Tensor& ta = v(a);
        const Tensor& tb = v(b);
        if (ta.rows() != tb.rows())
            throw ShapeError("concat_cols: row counts disagree " + ta.shape_str() + " vs " + tb.shape_str());
        int ca = ta.cols(), cb = tb.cols();
        Tensor out = Tensor::zeros(ta.rows(), ca + cb);
        for (int i = 0; i < ta.rows(); ++i) {
            for (int j = 0; j < ca; ++j) out.at(i, j) = ta.at(i, j);
            for (int j = 0; j < cb; ++j) out.at(i, ca + j) = tb.at(i, j);
        }
        Var r = push(std::move(out), needs(a) || needs(b), {a.i, b.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, b, ca, cb, r] {
                const Tensor& g = node(r).grad;
                if (needs(a)) {
                    double* ga = grad_buf(a);
                    for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < ca; ++j) ga[static_cast<size_t>(i) * ca + j] += g.at(i, j);
                }
                if (needs(b)) {
                    double* gb = grad_buf(b);
                    for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < cb; ++j) gb[static_cast<size_t>(i) * cb + j] += g.at(i, ca + j);
                }
            };
        return r;
    }

    // Vertical stack of same-width blocks.
    Var concat_rows(const std::vector<Var>& parts) {
        check(!parts.empty(), "concat_rows: empty");
        int cols = v(parts[0]).cols();
        int rows = 0;
        bool ng = false;
        std::vector<int> pidx;
        for (Var p : parts) {
            if (v(p).cols() != cols)
                throw ShapeError("concat_rows: column counts disagree");
            rows += v(p).rows();
            ng = ng || needs(p);
            pidx.push_back(p.i);
        }
        Tensor out = Tensor::zeros(rows, cols);
        int at = 0;
        for (Var p : parts) {
            const Tensor& tp = v(p);
            std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + static_cast<size_t>(at) * cols);
            at += tp.rows();
        }
        Var r = push(std::move(out), ng, pidx);
        if (node(r).needs_grad) {
            std::vector<Var> ps = parts;
            node(r).back = [this, ps, cols, r] {
                const Tensor& g = node(r).grad;
                int at = 0;
                for (Var p : ps) {
                    int pr = v(p).rows();
                    if (needs(p)) {
                        double* gp = grad_buf(p);
                        const double* src = g.data.data() + static_cast<size_t>(at) * cols;
                        for (int64_t i = 0; i < static_cast<int64_t>(pr) * cols; ++i) gp[i] += src[i];
                    }
                    at += pr;
                }
            };
        }
        return r;
    }

    Var slice_cols(Var a, int start, int len) {
        const Tensor& ta = v(a);
        check(start >= 0 && start + len <= ta.cols(), "slice_cols: out of range");
        Tensor out = Tensor::zeros(ta.rows(), len);
        for (int i = 0; i < ta.rows(); ++i)
            for (int j = 0; j < len; ++j) out.at(i, j) = ta.at(i, start + j);
        Var r = push(std::move(out), needs(a), {a.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, start, len, r] {
                const Tensor& g = node(r).grad;
                double* ga = grad_buf(a);
                int ac = v(a).cols();
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < len; ++j) ga[static_cast<size_t>(i) * ac + start + j] += g.at(i, j);
            };
        return r;
    }

    // Embedding lookup: out[r] = table[idx[r]]. Negative indices produce a
    // zero row (used for padded cells).
    Var rows_lookup(Var table, std::vector<int> idx) {
        const Tensor& tt = v(table);
        for (int id : idx)
            if (id >= tt.rows())
                throw DataError("rows_lookup: index " + std::to_string(id) + " out of range for " + tt.shape_str());
        Tensor out = Tensor::zeros(static_cast<int>(idx.size()), tt.cols());
        for (size_t r = 0; r < idx.size(); ++r)
            if (idx[r] >= 0)
                for (int j = 0; j < tt.cols(); ++j) out.at(static_cast<int>(r), j) = tt.at(idx[r], j);
        Var r = push(std::move(out), needs(table), {table.i});
        if (node(r).needs_grad) {
            node(r).back = [this, table, idx = std::move(idx), r] {
                const Tensor& g = node(r).grad;
                double* gt = grad_buf(table);
                int c = v(table).cols();
                for (size_t row = 0; row < idx.size(); ++row)
                    if (idx[row] >= 0)
                        for (int j = 0; j < c; ++j)
                            gt[static_cast<size_t>(idx[row]) * c + j] += g.at(static_cast<int>(row), j);
            };
        }
        return r;
    }

    // out[r,0] = a[r, idx[r]]; selection for the output-per-skill head.
    Var select_cols(Var a, std::vector<int> idx) {
        const Tensor& ta = v(a);
        check(static_cast<int>(idx.size()) == ta.rows(), "select_cols: one index per row required");
        for (int id : idx)
            if (id >= ta.cols()) throw DataError("select_cols: index out of range");
        Tensor out = Tensor::zeros(ta.rows(), 1);
        for (int r = 0; r < ta.rows(); ++r)
            if (idx[r] >= 0) out.at(r, 0) = ta.at(r, idx[r]);
        Var r = push(std::move(out), needs(a), {a.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, idx = std::move(idx), r] {
                const Tensor& g = node(r).grad;
                double* ga = grad_buf(a);
                int c = v(a).cols();
                for (int row = 0; row < g.rows(); ++row)
                    if (idx[row] >= 0) ga[static_cast<size_t>(row) * c + idx[row]] += g.at(row, 0);
            };
        return r;
    }

    Var sigmoid(Var a) {
        Tensor out = v(a);
        for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
        return unary(a, std::move(out), [](double y, double g) { return g * y * (1.0 - y); });
    }

    Var tanh_(Var a) {
        Tensor out = v(a);
        for (double& x : out.data) x = std::tanh(x);
        return unary(a, std::move(out), [](double y, double g) { return g * (1.0 - y * y); });
    }

    Var relu(Var a) {
        Tensor out = v(a);
        for (double& x : out.data) x = x > 0.0 ? x : 0.0;
        return unary(a, std::move(out), [](double y, double g) { return y > 0.0 ? g : 0.0; });
    }

    Var softmax_rows(Var a) {
        return masked_softmax_rows(a, Tensor({1, 1}, {1.0}), /*unmasked=*/true);
    }

    // Row-wise softmax over entries where mask is 1; masked entries are
    // exactly 0 in the output and never enter the max or the sum, so a row's
    // result is independent of its masked logits.
    Var masked_softmax_rows(Var a, Tensor mask, bool unmasked = false) {
        const Tensor& ta = v(a);
        if (!unmasked) require_same_shape(ta, mask, "masked_softmax");
        Tensor out = Tensor::zeros(ta.rows(), ta.cols());
        for (int i = 0; i < ta.rows(); ++i) {
            double mx = -1e300;
            for (int j = 0; j < ta.cols(); ++j)
                if (unmasked || mask.at(i, j) != 0.0) mx = std::max(mx, ta.at(i, j));
            if (mx == -1e300) continue;  // fully masked row stays zero
            double sum = 0.0;
            for (int j = 0; j < ta.cols(); ++j) {
                if (!unmasked && mask.at(i, j) == 0.0) continue;
                double e = std::exp(ta.at(i, j) - mx);
                out.at(i, j) = e;
                sum += e;
            }
            for (int j = 0; j < ta.cols(); ++j) out.at(i, j) /= sum;
        }
        Var r = push(std::move(out), needs(a), {a.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, r] {
                const Tensor& g = node(r).grad;
                const Tensor& y = node(r).val;
                double* ga = grad_buf(a);
                for (int i = 0; i < y.rows(); ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
                    for (int j = 0; j < y.cols(); ++j)
                        ga[static_cast<size_t>(i) * y.cols() + j] += (g.at(i, j) - dot) * y.at(i, j);
                }
            };
        return r;
    }

    Var mean_all(Var a) {
        const Tensor& ta = v(a);
        check(ta.size() > 0, "mean_all: empty tensor");
        double s = 0.0;
        for (double x : ta.data) s += x;
        double inv = 1.0 / static_cast<double>(ta.size());
        Var r = push(Tensor::scalar(s * inv), needs(a), {a.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, inv, r] {
                double g = node(r).grad.data[0] * inv;
                double* ga = grad_buf(a);
                for (int64_t i = 0; i < v(a).size(); ++i) ga[i] += g;
            };
        return r;
    }

    // Mean binary cross-entropy over cells where mask is 1. Probabilities are
    // clipped to [1e-7, 1-1e-7] before the logs; masked cells contribute
    // exactly zero to the value and to gradients.
    Var bce_masked(Var probs, Tensor targets, Tensor mask) {
        const Tensor& tp = v(probs);
        require_same_shape(tp, targets, "bce_masked targets");
        require_same_shape(tp, mask, "bce_masked mask");
        double count = 0.0;
        for (double m : mask.data) count += m;
        check(count > 0.0, "bce_masked: mask selects nothing");
        constexpr double kClip = 1e-7;
        double loss = 0.0;
        for (int64_t i = 0; i < tp.size(); ++i) {
            if (mask.data[i] == 0.0) continue;
            double y = std::min(std::max(tp.data[i], kClip), 1.0 - kClip);
            double c = targets.data[i];
            loss -= c * std::log(y) + (1.0 - c) * std::log(1.0 - y);
        }
        Var r = push(Tensor::scalar(loss / count), needs(probs), {probs.i});
        if (node(r).needs_grad)
            node(r).back = [this, probs, targets = std::move(targets), mask = std::move(mask), count, r] {
                double g = node(r).grad.data[0] / count;
                const Tensor& tp = v(probs);
                double* gp = grad_buf(probs);
                for (int64_t i = 0; i < tp.size(); ++i) {
                    if (mask.data[i] == 0.0) continue;
                    double y = tp.data[i];
                    if (y <= kClip || y >= 1.0 - kClip) continue;  // flat in the clip region
                    gp[i] += g * (-targets.data[i] / y + (1.0 - targets.data[i]) / (1.0 - y));
                }
            };
        return r;
    }

    // Inverted-scaling dropout. A no-op outside training or at rate 0; the
    // caller's rng makes the mask reproducible.
    Var dropout(Var a, double rate, bool training, Rng* rng) {
        check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
        if (!training || rate == 0.0) return a;
        check(rng != nullptr, "dropout: rng required in training mode");
        const Tensor& ta = v(a);
        std::vector<double> keep(static_cast<size_t>(ta.size()));
        double inv = 1.0 / (1.0 - rate);
        for (auto& k : keep) k = rng->uniform() < rate ? 0.0 : inv;
        Tensor out = ta;
        for (int64_t i = 0; i < out.size(); ++i) out.data[i] *= keep[i];
        Var r = push(std::move(out), needs(a), {a.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, keep = std::move(keep), r] {
                const Tensor& g = node(r).grad;
                double* ga = grad_buf(a);
                for (int64_t i = 0; i < g.size(); ++i) ga[i] += g.data[i] * keep[i];
            };
        return r;
    }

    // Repeats a [m,c] block `times` times vertically (per-student copies of the
    // initial value memory).
    Var tile_rows(Var a, int times) {
        const Tensor& ta = v(a);
        Tensor out = Tensor::zeros(ta.rows() * times, ta.cols());
        for (int t = 0; t < times; ++t)
            std::copy(ta.data.begin(), ta.data.end(),
                      out.data.begin() + static_cast<size_t>(t) * ta.size());
        Var r = push(std::move(out), needs(a), {a.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, times, r] {
                const Tensor& g = node(r).grad;
                double* ga = grad_buf(a);
                int64_t n = v(a).size();
                for (int t = 0; t < times; ++t)
                    for (int64_t i = 0; i < n; ++i) ga[i] += g.data[static_cast<size_t>(t) * n + i];
            };
        return r;
    }

    // Attention-weighted read over per-student memory blocks:
    // out[b] = sum_i w[b,i] * mem[b*slots+i].
    Var attn_read(Var w, Var mem, int slots) {
        const Tensor& tw = v(w);
        const Tensor& tm = v(mem);
        check(tw.cols() == slots && tm.rows() == tw.rows() * slots, "attn_read: inconsistent shapes");
        int batch = tw.rows(), width = tm.cols();
        Tensor out = Tensor::zeros(batch, width);
        for (int b = 0; b < batch; ++b)
            for (int i = 0; i < slots; ++i) {
                double wi = tw.at(b, i);
                for (int j = 0; j < width; ++j) out.at(b, j) += wi * tm.at(b * slots + i, j);
            }
        Var r = push(std::move(out), needs(w) || needs(mem), {w.i, mem.i});
        if (node(r).needs_grad)
            node(r).back = [this, w, mem, slots, r] {
                const Tensor& g = node(r).grad;
                const Tensor& tw = v(w);
                const Tensor& tm = v(mem);
                int batch = tw.rows(), width = tm.cols();
                double* gw = needs(w) ? grad_buf(w) : nullptr;
                double* gm = needs(mem) ? grad_buf(mem) : nullptr;
                for (int b = 0; b < batch; ++b)
                    for (int i = 0; i < slots; ++i) {
                        double dot = 0.0;
                        for (int j = 0; j < width; ++j) {
                            double gv = g.at(b, j);
                            dot += gv * tm.at(b * slots + i, j);
                            if (gm) gm[(static_cast<size_t>(b) * slots + i) * width + j] += tw.at(b, i) * gv;
                        }
                        if (gw) gw[static_cast<size_t>(b) * slots + i] += dot;
                    }
            };
        return r;
    }

    // Value-memory write. Default follows the verbatim update
    //   mem'[b*slots+i] = add[b] + mem[b*slots+i] * (1 - w[b,i] * erase[b]);
    // with weighted_add the addition becomes w[b,i] * add[b].
    Var mem_write(Var mem, Var w, Var erase, Var add, int slots, bool weighted_add) {
        const Tensor& tm = v(mem);
        const Tensor& tw = v(w);
        const Tensor& te = v(erase);
        const Tensor& tad = v(add);
        int batch = tw.rows(), width = tm.cols();
        check(tm.rows() == batch * slots && te.rows() == batch && tad.rows() == batch &&
                  te.cols() == width && tad.cols() == width && tw.cols() == slots,
              "mem_write: inconsistent shapes");
        Tensor out = Tensor::zeros(batch * slots, width);
        for (int b = 0; b < batch; ++b)
            for (int i = 0; i < slots; ++i) {
                double wi = tw.at(b, i);
                double aw = weighted_add ? wi : 1.0;
                for (int j = 0; j < width; ++j)
                    out.at(b * slots + i, j) =
                        aw * tad.at(b, j) + tm.at(b * slots + i, j) * (1.0 - wi * te.at(b, j));
            }
        Var r = push(std::move(out), needs(mem) || needs(w) || needs(erase) || needs(add),
                     {mem.i, w.i, erase.i, add.i});
        if (node(r).needs_grad)
            node(r).back = [this, mem, w, erase, add, slots, weighted_add, r] {
                const Tensor& g = node(r).grad;
                const Tensor& tm = v(mem);
                const Tensor& tw = v(w);
                const Tensor& te = v(erase);
                const Tensor& tad = v(add);
                int batch = tw.rows(), width = tm.cols();
                double* gm = needs(mem) ? grad_buf(mem) : nullptr;
                double* gw = needs(w) ? grad_buf(w) : nullptr;
                double* ge = needs(erase) ? grad_buf(erase) : nullptr;
                double* ga = needs(add) ? grad_buf(add) : nullptr;
                for (int b = 0; b < batch; ++b)
                    for (int i = 0; i < slots; ++i) {
                        double wi = tw.at(b, i);
                        double aw = weighted_add ? wi : 1.0;
                        double dwi = 0.0;
                        for (int j = 0; j < width; ++j) {
                            double gv = g.at(b * slots + i, j);
                            double mv = tm.at(b * slots + i, j);
                            if (gm) gm[(static_cast<size_t>(b) * slots + i) * width + j] += gv * (1.0 - wi * te.at(b, j));
                            if (ga) ga[static_cast<size_t>(b) * width + j] += gv * aw;
                            if (ge) ge[static_cast<size_t>(b) * width + j] -= gv * mv * wi;
                            dwi -= gv * mv * te.at(b, j);
                            if (weighted_add) dwi += gv * tad.at(b, j);
                        }
                        if (gw) gw[static_cast<size_t>(b) * slots + i] += dwi;
                    }
            };
        return r;
    }

    // ---- backward ---------------------------------------------------------

    void backward(Var loss) {
        Tensor& lv = nodes_[loss.i].val;
        if (!lv.is_scalar())
            throw InternalError("backward: loss must be scalar, got " + lv.shape_str());
        for (Node& n : nodes_) n.grad = Tensor();
        nodes_[loss.i].grad = Tensor::scalar(1.0);
        for (int i = loss.i; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.grad.size() == 0 || !n.back) continue;
            n.back();
        }
    }

  private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
        std::vector<int> parents;
        std::function<void()> back;
    };

    Var push(Tensor t, bool needs_grad, std::vector<int> parents) {
        Node n;
        n.val = std::move(t);
        n.needs_grad = needs_grad;
        n.parents = std::move(parents);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    Node& node(Var x) { return nodes_[x.i]; }
    const Tensor& v(Var x) const { return nodes_[x.i].val; }
    bool needs(Var x) const { return nodes_[x.i].needs_grad; }

    double* grad_buf(Var x) {
        Node& n = nodes_[x.i];
        if (n.grad.size() == 0) n.grad = Tensor::zeros(n.val.shape);
        return n.grad.data.data();
    }

    void acc(Var x, const Tensor& g) {
        double* b = grad_buf(x);
        for (int64_t i = 0; i < g.size(); ++i) b[i] += g.data[i];
    }

    template <class F>
    Var unary(Var a, Tensor out, F df) {
        Var r = push(std::move(out), needs(a), {a.i});
        if (node(r).needs_grad)
            node(r).back = [this, a, df, r] {
                const Tensor& g = node(r).grad;
                const Tensor& y = node(r).val;
                double* ga = grad_buf(a);
                for (int64_t i = 0; i < g.size(); ++i) ga[i] += df(y.data[i], g.data[i]);
            };
        return r;
    }

    std::vector<Node> nodes_;
};

}  // namespace kt
