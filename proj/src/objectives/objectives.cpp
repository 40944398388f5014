#include "objectives/objectives.hpp"

#include "core/kernels.hpp"

namespace omnivl {

Var univlc_loss(Tape& t, Var v, Var w, const std::vector<i64>& y, const Tensor& v_mom,
                const Tensor& w_mom, UniVLCState& state) {
    const i64 b = v->val.dim(0);
    const i64 d = v->val.dim(1);
    if (b < 1) throw ArgError("univlc: empty batch");
    if (static_cast<i64>(y.size()) != b) throw ShapeError("univlc: label count mismatch");
    if (v_mom.rows() != b || w_mom.rows() != b || v_mom.last_dim() != d ||
        w_mom.last_dim() != d)
        throw ShapeError("univlc: momentum embedding shape mismatch");

    const MemoryBank& bank = state.bank;
    const i64 filled = bank.filled();
    const i64 m = filled + b;  // scoring view: bank entries then this batch

    Tensor view_v({m, d}), view_w({m, d});
    std::vector<i64> view_y(static_cast<size_t>(m));
    kernels::copy(bank.visual_vecs().ptr(), view_v.ptr(), filled * d);
    kernels::copy(bank.text_vecs().ptr(), view_w.ptr(), filled * d);
    kernels::copy(v_mom.ptr(), view_v.ptr() + filled * d, b * d);
    kernels::copy(w_mom.ptr(), view_w.ptr() + filled * d, b * d);
    for (i64 k = 0; k < filled; ++k) view_y[static_cast<size_t>(k)] = bank.labels()[static_cast<size_t>(k)];
    for (i64 i = 0; i < b; ++i) view_y[static_cast<size_t>(filled + i)] = y[static_cast<size_t>(i)];

    // positive sets over the view; the appended self guarantees non-emptiness
    std::vector<std::vector<i64>> pos(static_cast<size_t>(b));
    for (i64 i = 0; i < b; ++i) {
        for (i64 k = 0; k < m; ++k)
            if (view_y[static_cast<size_t>(k)] == y[static_cast<size_t>(i)])
                pos[static_cast<size_t>(i)].push_back(k);
        if (pos[static_cast<size_t>(i)].empty())
            pos[static_cast<size_t>(i)].push_back(filled + i);  // self
    }

    Var inv_tau = ops::exp_op(t, ops::scale(t, state.log_tau->use(t), -1.0));

    auto one_direction = [&](Var anchors, const Tensor& targets) {
        Var tgt = ops::constant(t, targets);
        Var scores = ops::reshape(
            t,
            ops::bmm_nt(t, ops::reshape(t, anchors, {1, b, d}), ops::reshape(t, tgt, {1, m, d})),
            {b, m});
        scores = ops::mul_scalar(t, scores, inv_tau);
        Var lse = ops::logsumexp_lastdim(t, scores);  // [b]

        std::vector<i64> flat;
        std::vector<double> wpos;
        std::vector<double> wlse(static_cast<size_t>(b));
        const double inv2b = 1.0 / (2.0 * static_cast<double>(b));
        for (i64 i = 0; i < b; ++i) {
            const auto& p = pos[static_cast<size_t>(i)];
            const double per = state.normalize_positives
                                   ? inv2b / static_cast<double>(p.size())
                                   : inv2b;
            for (i64 k : p) {
                flat.push_back(i * m + k);
                wpos.push_back(per);
            }
            wlse[static_cast<size_t>(i)] =
                state.normalize_positives ? inv2b : inv2b * static_cast<double>(p.size());
        }
        Var gathered = ops::gather_elements(t, scores, std::move(flat));
        Var plus = ops::weighted_sum(t, lse, std::move(wlse));
        Var minus = ops::weighted_sum(t, gathered, std::move(wpos));
        return ops::sub(t, plus, minus);
    };

    return ops::add(t, one_direction(v, view_w), one_direction(w, view_v));
}

VlmPlan make_vlm_plan(const std::vector<i64>& y, Rng& rng) {
    const i64 b = static_cast<i64>(y.size());
    if (b < 2) throw ArgError("vlm: batch must have >= 2 samples to draw replacements");
    VlmPlan plan;
    plan.text_source.resize(static_cast<size_t>(b));
    plan.target.resize(static_cast<size_t>(b));
    for (i64 i = 0; i < b; ++i) {
        if (rng.coin()) {
            plan.text_source[static_cast<size_t>(i)] = i;
            plan.target[static_cast<size_t>(i)] = 1;
        } else {
            const i64 j = (i + 1 + static_cast<i64>(rng.below(static_cast<uint64_t>(b - 1)))) % b;
            plan.text_source[static_cast<size_t>(i)] = j;
            plan.target[static_cast<size_t>(i)] =
                y[static_cast<size_t>(j)] == y[static_cast<size_t>(i)] ? 1 : 0;
        }
    }
    return plan;
}

Var vlm_loss(Tape& t, AlignmentDecoder& ad, const EncodedVisual& visual,
             const std::vector<TokenSequence>& texts, const VlmPlan& plan,
             const Vocabulary& vocab) {
    const i64 b = static_cast<i64>(plan.text_source.size());
    if (static_cast<i64>(texts.size()) != b || visual.tokens->val.dim(0) != b)
        throw ArgError("vlm: batch size mismatch");
    std::vector<TokenSequence> picked;
    picked.reserve(static_cast<size_t>(b));
    for (i64 i = 0; i < b; ++i)
        picked.push_back(texts[static_cast<size_t>(plan.text_source[static_cast<size_t>(i)])]);
    TokenSequence batch = stack(picked).with_first(vocab.enc_id());

    FusedRepresentation fused = ad.fuse(t, batch, visual);
    VlmPrediction pred = ad.vlm_head(t, fused);

    std::vector<i64> targets = plan.target;
    std::vector<double> w(static_cast<size_t>(b), 1.0 / static_cast<double>(b));
    return ops::masked_ce(t, pred.logits, std::move(targets), std::move(w));
}

Var lm_loss(Tape& t, GenerationDecoder& gd, const EncodedVisual& visual,
            const TokenSequence& lm_targets, const Vocabulary& vocab) {
    const i64 b = visual.tokens->val.dim(0);
    const i64 m = visual.tokens->val.dim(1);
    if (lm_targets.batch != b) throw ArgError("lm: batch size mismatch");
    std::vector<std::vector<double>> valid(static_cast<size_t>(b),
                                           std::vector<double>(static_cast<size_t>(m), 1.0));
    return gd.lm_nll(t, lm_targets, visual.tokens, valid, vocab);
}

}  // namespace omnivl
