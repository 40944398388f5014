#include "model/blocks.hpp"

#include "core/error.hpp"

namespace omnivl {

namespace {
constexpr double kMaskValue = -1e30;
}

Var mha(Tape& t, Var q_in, Var kv_in, AttnParams& p, int heads, const Tensor* add_mask) {
    const i64 g = q_in->val.dim(0), lq = q_in->val.dim(1), d = q_in->val.dim(2);
    const i64 lm = kv_in->val.dim(1);
    if (d % heads != 0) throw ShapeError("mha: dim not divisible by heads");
    const i64 dh = d / heads;

    Var q = p.q.apply(t, q_in);
    Var k = p.k.apply(t, kv_in);
    Var v = p.v.apply(t, kv_in);

    auto split = [&](Var x, i64 len) {
        Var r = ops::reshape(t, x, {g, len, heads, dh});
        r = ops::swap_mid(t, r);  // [g, heads, len, dh]
        return ops::reshape(t, r, {g * heads, len, dh});
    };
    Var qh = split(q, lq);
    Var kh = split(k, lm);
    Var vh = split(v, lm);

    Var scores = ops::scale(t, ops::bmm_nt(t, qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    if (add_mask != nullptr) scores = ops::add_const(t, scores, *add_mask);
    Var attn = ops::softmax_lastdim(t, scores);
    Var ctx = ops::bmm(t, attn, vh);  // [g*heads, lq, dh]

    Var merged = ops::reshape(t, ctx, {g, heads, lq, dh});
    merged = ops::swap_mid(t, merged);  // [g, lq, heads, dh]
    merged = ops::reshape(t, merged, {g, lq, d});
    return p.o.apply(t, merged);
}

Tensor causal_mask(i64 groups, int heads, i64 len) {
    Tensor m({groups * heads, len, len});
    for (i64 gh = 0; gh < groups * heads; ++gh)
        for (i64 i = 0; i < len; ++i)
            for (i64 j = i + 1; j < len; ++j) m.data[(gh * len + i) * len + j] = kMaskValue;
    return m;
}

Tensor key_mask(const std::vector<std::vector<double>>& key_valid, int heads, i64 lq) {
    const i64 g = static_cast<i64>(key_valid.size());
    const i64 lm = static_cast<i64>(key_valid[0].size());
    Tensor m({g * heads, lq, lm});
    for (i64 gi = 0; gi < g; ++gi)
        for (i64 h = 0; h < heads; ++h)
            for (i64 i = 0; i < lq; ++i)
                for (i64 j = 0; j < lm; ++j)
                    m.data[(((gi * heads + h) * lq) + i) * lm + j] =
                        key_valid[gi][j] != 0.0 ? 0.0 : kMaskValue;
    return m;
}

}  // namespace omnivl
