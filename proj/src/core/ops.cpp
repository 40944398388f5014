#include "core/ops.hpp"

#include <cmath>
#include <utility>

#include "core/error.hpp"
#include "core/kernels.hpp"

namespace omnivl::ops {

namespace k = kernels;

namespace {
bool any_grad(std::initializer_list<Var> vs) {
    for (Var v : vs)
        if (v->needs_grad) return true;
    return false;
}
}  // namespace

Var constant(Tape& t, Tensor v) { return t.make(std::move(v), false); }

Var add(Tape& t, Var a, Var b) {
    if (!a->val.same_shape(b->val))
        throw ShapeError("add: shape mismatch " + a->val.shape_str() + " vs " + b->val.shape_str());
    Tensor out(a->val.shape);
    k::add(a->val.ptr(), b->val.ptr(), out.ptr(), out.numel(), false);
    Var y = t.make(std::move(out), any_grad({a, b}));
    if (y->needs_grad)
        y->backward = [a, b, y] {
            if (a->needs_grad) {
                a->ensure_grad();
                k::axpy(1.0, y->grad.ptr(), a->grad.ptr(), y->grad.numel());
            }
            if (b->needs_grad) {
                b->ensure_grad();
                k::axpy(1.0, y->grad.ptr(), b->grad.ptr(), y->grad.numel());
            }
        };
    return y;
}

Var sub(Tape& t, Var a, Var b) {
    if (!a->val.same_shape(b->val)) throw ShapeError("sub: shape mismatch");
    Tensor out(a->val.shape);
    k::sub(a->val.ptr(), b->val.ptr(), out.ptr(), out.numel(), false);
    Var y = t.make(std::move(out), any_grad({a, b}));
    if (y->needs_grad)
        y->backward = [a, b, y] {
            if (a->needs_grad) {
                a->ensure_grad();
                k::axpy(1.0, y->grad.ptr(), a->grad.ptr(), y->grad.numel());
            }
            if (b->needs_grad) {
                b->ensure_grad();
                k::axpy(-1.0, y->grad.ptr(), b->grad.ptr(), y->grad.numel());
            }
        };
    return y;
}

Var mul(Tape& t, Var a, Var b) {
    if (!a->val.same_shape(b->val)) throw ShapeError("mul: shape mismatch");
    Tensor out(a->val.shape);
    k::mul(a->val.ptr(), b->val.ptr(), out.ptr(), out.numel(), false);
    Var y = t.make(std::move(out), any_grad({a, b}));
    if (y->needs_grad)
        y->backward = [a, b, y] {
            if (a->needs_grad) {
                a->ensure_grad();
                k::mul(y->grad.ptr(), b->val.ptr(), a->grad.ptr(), y->grad.numel(), true);
            }
            if (b->needs_grad) {
                b->ensure_grad();
                k::mul(y->grad.ptr(), a->val.ptr(), b->grad.ptr(), y->grad.numel(), true);
            }
        };
    return y;
}

Var add_bias(Tape& t, Var x, Var b) {
    const i64 c = x->val.last_dim();
    if (b->val.numel() != c) throw ShapeError("add_bias: bias size mismatch");
    Tensor out(x->val.shape);
    k::add_bias_rows(x->val.ptr(), b->val.ptr(), out.ptr(), x->val.rows(), c);
    Var y = t.make(std::move(out), any_grad({x, b}));
    if (y->needs_grad)
        y->backward = [x, b, y, c] {
            if (x->needs_grad) {
                x->ensure_grad();
                k::axpy(1.0, y->grad.ptr(), x->grad.ptr(), y->grad.numel());
            }
            if (b->needs_grad) {
                b->ensure_grad();
                k::sum_rows(y->grad.ptr(), b->grad.ptr(), y->grad.rows(), c);
            }
        };
    return y;
}

Var add_const(Tape& t, Var x, Tensor c) {
    if (!x->val.same_shape(c)) throw ShapeError("add_const: shape mismatch");
    Tensor out(x->val.shape);
    k::add(x->val.ptr(), c.ptr(), out.ptr(), out.numel(), false);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y] {
            x->ensure_grad();
            k::axpy(1.0, y->grad.ptr(), x->grad.ptr(), y->grad.numel());
        };
    return y;
}

Var scale(Tape& t, Var x, double alpha) {
    Tensor out(x->val.shape);
    k::scale(x->val.ptr(), alpha, out.ptr(), out.numel(), false);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, alpha] {
            x->ensure_grad();
            k::axpy(alpha, y->grad.ptr(), x->grad.ptr(), y->grad.numel());
        };
    return y;
}

Var scale_rows(Tape& t, Var x, std::vector<double> w) {
    const i64 r = x->val.rows(), c = x->val.last_dim();
    if (static_cast<i64>(w.size()) != r) throw ShapeError("scale_rows: weight count mismatch");
    Tensor out(x->val.shape);
    k::scale_rows(x->val.ptr(), w.data(), out.ptr(), r, c, false);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, w = std::move(w), r, c] {
            x->ensure_grad();
            k::scale_rows(y->grad.ptr(), w.data(), x->grad.ptr(), r, c, true);
        };
    return y;
}

Var mul_scalar(Tape& t, Var x, Var s) {
    if (s->val.numel() != 1) throw ShapeError("mul_scalar: scalar expected");
    Tensor out(x->val.shape);
    k::scale(x->val.ptr(), s->val.data[0], out.ptr(), out.numel(), false);
    Var y = t.make(std::move(out), any_grad({x, s}));
    if (y->needs_grad)
        y->backward = [x, s, y] {
            if (x->needs_grad) {
                x->ensure_grad();
                k::axpy(s->val.data[0], y->grad.ptr(), x->grad.ptr(), y->grad.numel());
            }
            if (s->needs_grad) {
                s->ensure_grad();
                s->grad.data[0] += k::dot(x->val.ptr(), y->grad.ptr(), x->val.numel());
            }
        };
    return y;
}

Var exp_op(Tape& t, Var x) {
    Tensor out(x->val.shape);
    for (i64 i = 0; i < out.numel(); ++i) out.data[i] = std::exp(x->val.data[i]);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y] {
            x->ensure_grad();
            k::mul(y->grad.ptr(), y->val.ptr(), x->grad.ptr(), y->grad.numel(), true);
        };
    return y;
}

Var matmul2d(Tape& t, Var a, Var b) {
    if (a->val.rank() != 2 || b->val.rank() != 2 || a->val.dim(1) != b->val.dim(0))
        throw ShapeError("matmul2d: incompatible shapes " + a->val.shape_str() + " x " +
                         b->val.shape_str());
    const i64 m = a->val.dim(0), kk = a->val.dim(1), n = b->val.dim(1);
    Tensor out({m, n});
    k::mm_nn(a->val.ptr(), b->val.ptr(), out.ptr(), 1, m, kk, n, false);
    Var y = t.make(std::move(out), any_grad({a, b}));
    if (y->needs_grad)
        y->backward = [a, b, y, m, kk, n] {
            if (a->needs_grad) {
                a->ensure_grad();
                k::mm_nt(y->grad.ptr(), b->val.ptr(), a->grad.ptr(), 1, m, n, kk, true);
            }
            if (b->needs_grad) {
                b->ensure_grad();
                k::mm_tn(a->val.ptr(), y->grad.ptr(), b->grad.ptr(), 1, kk, m, n, true);
            }
        };
    return y;
}

Var bmm(Tape& t, Var a, Var b) {
    if (a->val.rank() != 3 || b->val.rank() != 3 || a->val.dim(0) != b->val.dim(0) ||
        a->val.dim(2) != b->val.dim(1))
        throw ShapeError("bmm: incompatible shapes");
    const i64 g = a->val.dim(0), m = a->val.dim(1), kk = a->val.dim(2), n = b->val.dim(2);
    Tensor out({g, m, n});
    k::mm_nn(a->val.ptr(), b->val.ptr(), out.ptr(), g, m, kk, n, false);
    Var y = t.make(std::move(out), any_grad({a, b}));
    if (y->needs_grad)
        y->backward = [a, b, y, g, m, kk, n] {
            if (a->needs_grad) {
                a->ensure_grad();
                k::mm_nt(y->grad.ptr(), b->val.ptr(), a->grad.ptr(), g, m, n, kk, true);
            }
            if (b->needs_grad) {
                b->ensure_grad();
                k::mm_tn(a->val.ptr(), y->grad.ptr(), b->grad.ptr(), g, kk, m, n, true);
            }
        };
    return y;
}

Var bmm_nt(Tape& t, Var a, Var b) {
    if (a->val.rank() != 3 || b->val.rank() != 3 || a->val.dim(0) != b->val.dim(0) ||
        a->val.dim(2) != b->val.dim(2))
        throw ShapeError("bmm_nt: incompatible shapes");
    const i64 g = a->val.dim(0), m = a->val.dim(1), kk = a->val.dim(2), n = b->val.dim(1);
    Tensor out({g, m, n});
    k::mm_nt(a->val.ptr(), b->val.ptr(), out.ptr(), g, m, kk, n, false);
    Var y = t.make(std::move(out), any_grad({a, b}));
    if (y->needs_grad)
        y->backward = [a, b, y, g, m, kk, n] {
            if (a->needs_grad) {
                a->ensure_grad();
                k::mm_nn(y->grad.ptr(), b->val.ptr(), a->grad.ptr(), g, m, n, kk, true);
            }
            if (b->needs_grad) {
                b->ensure_grad();
                k::mm_tn(y->grad.ptr(), a->val.ptr(), b->grad.ptr(), g, n, m, kk, true);
            }
        };
    return y;
}

Var reshape(Tape& t, Var x, std::vector<i64> shape) {
    if (Tensor::count(shape) != x->val.numel())
        throw ShapeError("reshape: element count mismatch");
    Tensor out(std::move(shape), x->val.data);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y] {
            x->ensure_grad();
            k::axpy(1.0, y->grad.ptr(), x->grad.ptr(), y->grad.numel());
        };
    return y;
}

Var swap_mid(Tape& t, Var x) {
    if (x->val.rank() != 4) throw ShapeError("swap_mid: rank-4 tensor expected");
    const i64 g = x->val.dim(0), a = x->val.dim(1), b = x->val.dim(2), c = x->val.dim(3);
    Tensor out({g, b, a, c});
    k::swap_mid_axes(x->val.ptr(), out.ptr(), g, a, b, c, false);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, g, a, b, c] {
            x->ensure_grad();
            k::swap_mid_axes(y->grad.ptr(), x->grad.ptr(), g, b, a, c, true);
        };
    return y;
}

Var gelu(Tape& t, Var x) {
    Tensor out(x->val.shape);
    k::gelu_fwd(x->val.ptr(), out.ptr(), out.numel());
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y] {
            x->ensure_grad();
            k::gelu_bwd(x->val.ptr(), y->grad.ptr(), x->grad.ptr(), y->grad.numel());
        };
    return y;
}

Var softmax_lastdim(Tape& t, Var x) {
    Tensor out(x->val.shape);
    k::softmax_rows(x->val.ptr(), out.ptr(), x->val.rows(), x->val.last_dim());
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y] {
            x->ensure_grad();
            k::softmax_rows_bwd(y->val.ptr(), y->grad.ptr(), x->grad.ptr(), y->val.rows(),
                                y->val.last_dim());
        };
    return y;
}

Var logsumexp_lastdim(Tape& t, Var x) {
    const i64 r = x->val.rows(), c = x->val.last_dim();
    std::vector<i64> out_shape(x->val.shape.begin(), x->val.shape.end() - 1);
    if (out_shape.empty()) out_shape.push_back(1);
    Tensor out(out_shape);
    k::logsumexp_rows(x->val.ptr(), out.ptr(), r, c);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, r, c] {
            x->ensure_grad();
            Tensor sm({r, c});
            k::softmax_rows(x->val.ptr(), sm.ptr(), r, c);
            k::scale_rows(sm.ptr(), y->grad.ptr(), x->grad.ptr(), r, c, true);
        };
    return y;
}

Var layernorm(Tape& t, Var x, Var gamma, Var beta, double eps) {
    const i64 r = x->val.rows(), c = x->val.last_dim();
    if (gamma->val.numel() != c || beta->val.numel() != c)
        throw ShapeError("layernorm: gamma/beta size mismatch");
    Tensor out(x->val.shape);
    auto mean = std::make_shared<Tensor>(Tensor({r}));
    auto rstd = std::make_shared<Tensor>(Tensor({r}));
    k::layernorm_fwd(x->val.ptr(), gamma->val.ptr(), beta->val.ptr(), out.ptr(), mean->ptr(),
                     rstd->ptr(), r, c, eps);
    Var y = t.make(std::move(out), any_grad({x, gamma, beta}));
    if (y->needs_grad)
        y->backward = [x, gamma, beta, y, mean, rstd, r, c] {
            double* ggamma = nullptr;
            double* gbeta = nullptr;
            if (gamma->needs_grad) {
                gamma->ensure_grad();
                beta->ensure_grad();
                ggamma = gamma->grad.ptr();
                gbeta = beta->grad.ptr();
            }
            if (x->needs_grad) x->ensure_grad();
            Tensor scratch;
            double* gx = x->needs_grad ? x->grad.ptr() : nullptr;
            if (gx == nullptr) {
                scratch = Tensor(x->val.shape);
                gx = scratch.ptr();
            }
            k::layernorm_bwd(x->val.ptr(), gamma->val.ptr(), mean->ptr(), rstd->ptr(),
                             y->grad.ptr(), gx, ggamma, gbeta, r, c);
        };
    return y;
}

Var l2normalize(Tape& t, Var x, double eps) {
    const i64 r = x->val.rows(), c = x->val.last_dim();
    Tensor out(x->val.shape);
    auto inv = std::make_shared<Tensor>(Tensor({r}));
    k::l2norm_rows_fwd(x->val.ptr(), out.ptr(), inv->ptr(), r, c, eps);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, inv, r, c] {
            x->ensure_grad();
            k::l2norm_rows_bwd(y->val.ptr(), inv->ptr(), y->grad.ptr(), x->grad.ptr(), r, c);
        };
    return y;
}

Var gather_rows(Tape& t, Var x, std::vector<i64> idx) {
    const i64 c = x->val.last_dim(), rin = x->val.rows();
    for (i64 i : idx)
        if (i < 0 || i >= rin) throw ArgError("gather_rows: index out of range");
    const i64 rout = static_cast<i64>(idx.size());
    Tensor out({rout, c});
    k::gather_rows(x->val.ptr(), idx.data(), out.ptr(), rout, c);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, idx = std::move(idx), rout, c] {
            x->ensure_grad();
            k::scatter_add_rows(y->grad.ptr(), idx.data(), x->grad.ptr(), rout, c);
        };
    return y;
}

Var scatter_rows(Tape& t, Var x, std::vector<i64> idx, i64 rout) {
    const i64 c = x->val.last_dim(), rin = x->val.rows();
    if (static_cast<i64>(idx.size()) != rin) throw ShapeError("scatter_rows: index count mismatch");
    for (i64 i : idx)
        if (i < 0 || i >= rout) throw ArgError("scatter_rows: index out of range");
    Tensor out({rout, c});
    k::scatter_add_rows(x->val.ptr(), idx.data(), out.ptr(), rin, c);
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, idx = std::move(idx), rin, c] {
            x->ensure_grad();
            k::gather_rows(y->grad.ptr(), idx.data(), x->grad.ptr(), rin, c);
        };
    return y;
}

namespace {
// backward of gather from concatenated [a;b] splits the scatter range
void concat_bwd_half(Node* p, const Tensor& g, i64 row0, i64 c) {
    p->ensure_grad();
    k::axpy(1.0, g.ptr() + row0 * c, p->grad.ptr(), p->grad.numel());
}
}  // namespace

Var concat_rows(Tape& t, Var a, Var b) {
    const i64 c = a->val.last_dim();
    if (b->val.last_dim() != c) throw ShapeError("concat_rows: column mismatch");
    const i64 ra = a->val.rows(), rb = b->val.rows();
    Tensor out({ra + rb, c});
    k::copy(a->val.ptr(), out.ptr(), ra * c);
    k::copy(b->val.ptr(), out.ptr() + ra * c, rb * c);
    Var y = t.make(std::move(out), any_grad({a, b}));
    if (y->needs_grad)
        y->backward = [a, b, y, ra, c] {
            if (a->needs_grad) concat_bwd_half(a, y->grad, 0, c);
            if (b->needs_grad) concat_bwd_half(b, y->grad, ra, c);
        };
    return y;
}

Var embedding(Tape& t, Var table, const std::vector<i64>& ids) {
    return gather_rows(t, table, ids);
}

Var gather_elements(Tape& t, Var x, std::vector<i64> flat_idx) {
    const i64 n = x->val.numel();
    for (i64 i : flat_idx)
        if (i < 0 || i >= n) throw ArgError("gather_elements: index out of range");
    Tensor out({static_cast<i64>(flat_idx.size())});
    for (size_t i = 0; i < flat_idx.size(); ++i) out.data[i] = x->val.data[flat_idx[i]];
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, flat_idx = std::move(flat_idx)] {
            x->ensure_grad();
            for (size_t i = 0; i < flat_idx.size(); ++i)
                x->grad.data[flat_idx[i]] += y->grad.data[i];
        };
    return y;
}

Var weighted_sum(Tape& t, Var x, std::vector<double> w) {
    if (static_cast<i64>(w.size()) != x->val.numel())
        throw ShapeError("weighted_sum: weight count mismatch");
    Tensor out = Tensor::scalar(k::dot(x->val.ptr(), w.data(), x->val.numel()));
    Var y = t.make(std::move(out), x->needs_grad);
    if (y->needs_grad)
        y->backward = [x, y, w = std::move(w)] {
            x->ensure_grad();
            k::axpy(y->grad.data[0], w.data(), x->grad.ptr(), x->grad.numel());
        };
    return y;
}

Var sum_all(Tape& t, Var x) {
    return weighted_sum(t, x, std::vector<double>(static_cast<size_t>(x->val.numel()), 1.0));
}

Var mean_all(Tape& t, Var x) {
    const double inv = 1.0 / static_cast<double>(x->val.numel());
    return weighted_sum(t, x, std::vector<double>(static_cast<size_t>(x->val.numel()), inv));
}

Var masked_ce(Tape& t, Var logits, std::vector<i64> targets, std::vector<double> w) {
    const i64 r = logits->val.rows(), c = logits->val.last_dim();
    if (static_cast<i64>(targets.size()) != r || static_cast<i64>(w.size()) != r)
        throw ShapeError("masked_ce: row count mismatch");
    for (i64 i = 0; i < r; ++i)
        if (w[static_cast<size_t>(i)] != 0.0 && (targets[static_cast<size_t>(i)] < 0 ||
                                                 targets[static_cast<size_t>(i)] >= c))
            throw ArgError("masked_ce: target out of range at row " + std::to_string(i));
    Tensor per_row({r});
    k::ce_rows_fwd(logits->val.ptr(), targets.data(), w.data(), per_row.ptr(), r, c);
    Tensor out = Tensor::scalar(k::sum(per_row.ptr(), r));
    Var y = t.make(std::move(out), logits->needs_grad);
    if (y->needs_grad)
        y->backward = [logits, y, targets = std::move(targets), w = std::move(w), r, c] {
            logits->ensure_grad();
            k::ce_rows_bwd(logits->val.ptr(), targets.data(), w.data(), y->grad.data[0],
                           logits->grad.ptr(), r, c);
        };
    return y;
}

Var linear(Tape& t, Var x, Var w, Var b) {
    const i64 din = w->val.dim(0), dout = w->val.dim(1);
    if (x->val.last_dim() != din) throw ShapeError("linear: input width mismatch");
    std::vector<i64> out_shape = x->val.shape;
    out_shape.back() = dout;
    Var x2 = x->val.rank() == 2 ? x : reshape(t, x, {x->val.rows(), din});
    Var y = matmul2d(t, x2, w);
    if (b != nullptr) y = add_bias(t, y, b);
    if (out_shape.size() != 2) y = reshape(t, y, out_shape);
    return y;
}

}  // namespace omnivl::ops
