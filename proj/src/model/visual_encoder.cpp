#include "model/visual_encoder.hpp"

#include <cmath>

#include "core/kernels.hpp"

namespace omnivl {

void VisualBatch::validate() const {
    if (frames.rank() != 5) throw ShapeError("visual batch: frames must be [B,T,H,W,C]");
    if (h() % patch != 0)
        throw ShapeError("visual batch: H (=" + std::to_string(h()) +
                         ") not divisible by patch size " + std::to_string(patch));
    if (w() % patch != 0)
        throw ShapeError("visual batch: W (=" + std::to_string(w()) +
                         ") not divisible by patch size " + std::to_string(patch));
    if (t() > 1 && t() % tubelet != 0)
        throw ShapeError("visual batch: T (=" + std::to_string(t()) +
                         ") not divisible by tubelet depth " + std::to_string(tubelet));
    if (!kernels::all_finite(frames.ptr(), frames.numel()))
        throw NumericError("visual batch: non-finite frame values");
}

VisualEncoder::VisualEncoder(const ModelConfig& cfg, Rng rng) : cfg_(cfg) {
    const i64 d = cfg_.dim;
    const i64 pp = cfg_.patch * cfg_.patch * cfg_.channels;
    tok2d_.init("ve.tok2d", pp, d, cfg_.init_std, rng);
    tok3d_.init("ve.tok3d", cfg_.tubelet * pp, d, cfg_.init_std, rng);
    cls_.init("ve.cls", gaussian_tensor({1, d}, cfg_.init_std, rng));
    pos_spatial_.init("ve.pos_spatial", gaussian_tensor({cfg_.spatial_tokens(), d}, cfg_.init_std, rng));
    pos_temporal_.init("ve.pos_temporal", Tensor::zeros({cfg_.temporal_positions(), d}));
    blocks_.resize(static_cast<size_t>(cfg_.blocks));
    for (i64 i = 0; i < cfg_.blocks; ++i) {
        auto& blk = blocks_[static_cast<size_t>(i)];
        const std::string p = "ve.blocks." + std::to_string(i);
        blk.t_norm.init(p + ".t_norm", d);
        blk.t_attn.init(p + ".t_attn", d, cfg_.init_std, rng, /*zero_out=*/true);
        blk.s_norm.init(p + ".s_norm", d);
        blk.s_attn.init(p + ".s_attn", d, cfg_.init_std, rng);
        blk.f_norm.init(p + ".f_norm", d);
        blk.ffn.init(p + ".ffn", d, cfg_.ffn(), cfg_.init_std, rng);
    }
    out_norm_.init("ve.out_norm", d);
    inflate_video_tokenizer();
}

void VisualEncoder::inflate_video_tokenizer() {
    const i64 pp = cfg_.patch * cfg_.patch * cfg_.channels;
    const i64 d = cfg_.dim;
    Tensor& w3 = tok3d_.w.value();
    const Tensor& w2 = tok2d_.w.value();
    for (double& v : w3.data) v = 0.0;
    // flatten order of a tube is (dt, py, px, c); slice dt=0 matches the 2D layout
    kernels::copy(w2.ptr(), w3.ptr(), pp * d);
    tok3d_.b.value() = tok2d_.b.value();
}

void VisualEncoder::collect(ParameterRegistry& reg) {
    tok2d_.collect(reg);
    tok3d_.collect(reg);
    reg.add(&cls_);
    reg.add(&pos_spatial_);
    reg.add(&pos_temporal_);
    for (auto& blk : blocks_) {
        blk.t_norm.collect(reg);
        blk.t_attn.collect(reg);
        blk.s_norm.collect(reg);
        blk.s_attn.collect(reg);
        blk.f_norm.collect(reg);
        blk.ffn.collect(reg);
    }
    out_norm_.collect(reg);
}

std::vector<Parameter*> VisualEncoder::video_only_params() {
    std::vector<Parameter*> out = {&tok3d_.w, &tok3d_.b, &pos_temporal_};
    for (auto& blk : blocks_) {
        for (Parameter* p : {&blk.t_norm.gamma, &blk.t_norm.beta, &blk.t_attn.q.w, &blk.t_attn.q.b,
                             &blk.t_attn.k.w, &blk.t_attn.k.b, &blk.t_attn.v.w, &blk.t_attn.v.b,
                             &blk.t_attn.o.w, &blk.t_attn.o.b})
            out.push_back(p);
    }
    return out;
}

std::vector<Parameter*> VisualEncoder::image_only_params() { return {&tok2d_.w, &tok2d_.b}; }

namespace {

// rearrange [B,T,H,W,C] into flattened tubes [B*T'*S, tubelet*P*P*C]
Tensor extract_tubes(const VisualBatch& vb, i64 tubelet) {
    const i64 b = vb.b(), t = vb.t(), h = vb.h(), w = vb.w(), c = vb.c(), p = vb.patch;
    const i64 tp = t / tubelet;
    const i64 gh = h / p, gw = w / p, s = gh * gw;
    const i64 cols = tubelet * p * p * c;
    Tensor out({b * tp * s, cols});
    const double* src = vb.frames.ptr();
    double* dst = out.ptr();
    for (i64 bi = 0; bi < b; ++bi)
        for (i64 ti = 0; ti < tp; ++ti)
            for (i64 gy = 0; gy < gh; ++gy)
                for (i64 gx = 0; gx < gw; ++gx) {
                    double* row = dst + (((bi * tp + ti) * gh + gy) * gw + gx) * cols;
                    i64 q = 0;
                    for (i64 dt = 0; dt < tubelet; ++dt)
                        for (i64 py = 0; py < p; ++py)
                            for (i64 px = 0; px < p; ++px)
                                for (i64 ci = 0; ci < c; ++ci)
                                    row[q++] = src[((((bi * t + ti * tubelet + dt) * h +
                                                      gy * p + py) *
                                                         w +
                                                     gx * p + px) *
                                                        c +
                                                    ci)];
                }
    return out;
}

}  // namespace

Tensor temporal_interp_matrix(i64 t_old, i64 t_new) {
    if (t_old < 1 || t_new < 1) throw ArgError("temporal interpolation: sizes must be >= 1");
    Tensor m({t_new, t_old});
    for (i64 i = 0; i < t_new; ++i) {
        double pos = 0.0;
        if (t_new > 1)
            pos = static_cast<double>(i) * static_cast<double>(t_old - 1) /
                  static_cast<double>(t_new - 1);
        const i64 lo = static_cast<i64>(std::floor(pos));
        const i64 hi = std::min<i64>(lo + 1, t_old - 1);
        const double f = pos - static_cast<double>(lo);
        m.data[i * t_old + lo] += 1.0 - f;
        m.data[i * t_old + hi] += f;
    }
    return m;
}

Tensor interpolate_temporal_pos(const Tensor& pe, i64 t_new) {
    if (pe.rank() != 2) throw ShapeError("interpolate_temporal_pos: pe must be [T, D]");
    const i64 t_old = pe.dim(0), d = pe.dim(1);
    if (t_new == t_old) return pe;
    const Tensor m = temporal_interp_matrix(t_old, t_new);
    Tensor out({t_new, d});
    kernels::mm_nn(m.ptr(), pe.ptr(), out.ptr(), 1, t_new, t_old, d, false);
    return out;
}

Var VisualEncoder::tokenize(Tape& t, const VisualBatch& batch) {
    batch.validate();
    const i64 b = batch.b(), d = cfg_.dim;
    const i64 s = (batch.h() / batch.patch) * (batch.w() / batch.patch);
    const bool video = batch.t() > 1;
    const i64 tubelet = video ? batch.tubelet : 1;
    const i64 tp = batch.t() / tubelet;

    Var patches = ops::constant(t, extract_tubes(batch, tubelet));
    Var tok = video ? tok3d_.apply(t, patches) : tok2d_.apply(t, patches);  // [b*tp*s, d]

    // spatial positions repeat per (b, t'); temporal positions only exist on
    // the video path (a single image has no temporal order to encode)
    std::vector<i64> sp_idx(static_cast<size_t>(b * tp * s));
    for (i64 bi = 0; bi < b; ++bi)
        for (i64 ti = 0; ti < tp; ++ti)
            for (i64 si = 0; si < s; ++si) sp_idx[static_cast<size_t>((bi * tp + ti) * s + si)] = si;
    tok = ops::add(t, tok, ops::gather_rows(t, pos_spatial_.use(t), std::move(sp_idx)));

    if (video) {
        Var pe = pos_temporal_.use(t);
        if (tp != cfg_.temporal_positions()) {
            Var m = ops::constant(t, temporal_interp_matrix(cfg_.temporal_positions(), tp));
            pe = ops::matmul2d(t, m, pe);
        }
        std::vector<i64> tp_idx(static_cast<size_t>(b * tp * s));
        for (i64 bi = 0; bi < b; ++bi)
            for (i64 ti = 0; ti < tp; ++ti)
                for (i64 si = 0; si < s; ++si)
                    tp_idx[static_cast<size_t>((bi * tp + ti) * s + si)] = ti;
        tok = ops::add(t, tok, ops::gather_rows(t, pe, std::move(tp_idx)));
    }
    return ops::reshape(t, tok, {b, tp * s, d});
}

EncodedVisual VisualEncoder::encode(Tape& t, const VisualBatch& batch) {
    Var tok = tokenize(t, batch);
    const i64 b = batch.b(), d = cfg_.dim;
    const bool video = batch.t() > 1;
    const i64 tubelet = video ? batch.tubelet : 1;
    const i64 tp = batch.t() / tubelet;
    const i64 s = (batch.h() / batch.patch) * (batch.w() / batch.patch);
    const i64 n = 1 + tp * s;

    // interleave CLS in front of each sample's tokens: [b, n, d]
    Var cls_rows = ops::gather_rows(t, cls_.use(t), std::vector<i64>(static_cast<size_t>(b), 0));
    Var flat = ops::concat_rows(t, cls_rows, ops::reshape(t, tok, {b * tp * s, d}));
    std::vector<i64> order(static_cast<size_t>(b * n));
    for (i64 bi = 0; bi < b; ++bi) {
        order[static_cast<size_t>(bi * n)] = bi;
        for (i64 j = 0; j < tp * s; ++j)
            order[static_cast<size_t>(bi * n + 1 + j)] = b + bi * tp * s + j;
    }
    Var x = ops::reshape(t, ops::gather_rows(t, flat, std::move(order)), {b, n, d});

    // token row index of (bi, ti, si); CLS sits at bi*n
    auto tok_row = [n, s](i64 bi, i64 ti, i64 si) { return bi * n + 1 + ti * s + si; };

    for (i64 bl = 0; bl < cfg_.blocks; ++bl) {
        auto& blk = blocks_[static_cast<size_t>(bl)];

        if (tp > 1) {
            // temporal attention: same spatial site attends across time; CLS excluded
            Var h = blk.t_norm.apply(t, x);
            std::vector<i64> idx(static_cast<size_t>(b * s * tp));
            i64 q = 0;
            for (i64 bi = 0; bi < b; ++bi)
                for (i64 si = 0; si < s; ++si)
                    for (i64 ti = 0; ti < tp; ++ti) idx[static_cast<size_t>(q++)] = tok_row(bi, ti, si);
            Var groups = ops::reshape(
                t, ops::gather_rows(t, ops::reshape(t, h, {b * n, d}), idx), {b * s, tp, d});
            Var a = mha(t, groups, groups, blk.t_attn, cfg_.heads, nullptr);
            Var back = ops::scatter_rows(t, ops::reshape(t, a, {b * s * tp, d}), idx, b * n);
            x = ops::add(t, x, ops::reshape(t, back, {b, n, d}));
        }

        {
            // spatial attention: per temporal slice, CLS replica + that slice's tokens
            Var h = blk.s_norm.apply(t, x);
            std::vector<i64> idx(static_cast<size_t>(b * tp * (1 + s)));
            i64 q = 0;
            for (i64 bi = 0; bi < b; ++bi)
                for (i64 ti = 0; ti < tp; ++ti) {
                    idx[static_cast<size_t>(q++)] = bi * n;  // CLS replica
                    for (i64 si = 0; si < s; ++si) idx[static_cast<size_t>(q++)] = tok_row(bi, ti, si);
                }
            Var groups = ops::reshape(
                t, ops::gather_rows(t, ops::reshape(t, h, {b * n, d}), idx), {b * tp, 1 + s, d});
            Var a = mha(t, groups, groups, blk.s_attn, cfg_.heads, nullptr);
            Var back = ops::scatter_rows(t, ops::reshape(t, a, {b * tp * (1 + s), d}), idx, b * n);
            // CLS replicas were scatter-summed tp times; average them (D3)
            std::vector<double> w(static_cast<size_t>(b * n), 1.0);
            for (i64 bi = 0; bi < b; ++bi)
                w[static_cast<size_t>(bi * n)] = 1.0 / static_cast<double>(tp);
            back = ops::scale_rows(t, back, std::move(w));
            x = ops::add(t, x, ops::reshape(t, back, {b, n, d}));
        }

        x = ops::add(t, x, blk.ffn.apply(t, blk.f_norm.apply(t, x)));

        if (!kernels::all_finite(x->val.ptr(), x->val.numel()))
            throw NumericError("non-finite activations in visual encoder block " +
                               std::to_string(bl));
    }

    x = out_norm_.apply(t, x);

    EncodedVisual out;
    out.tokens = x;
    out.t_prime = tp;
    out.s = s;
    std::vector<i64> cls_idx(static_cast<size_t>(b));
    for (i64 bi = 0; bi < b; ++bi) cls_idx[static_cast<size_t>(bi)] = bi * n;
    out.v_cls = ops::gather_rows(t, ops::reshape(t, x, {b * n, d}), std::move(cls_idx));
    return out;
}

}  // namespace omnivl
