#include "model/decoders.hpp"

#include <algorithm>
#include <cmath>

#include "core/kernels.hpp"

namespace omnivl {

GroundedDecoder::GroundedDecoder(std::string prefix, const ModelConfig& cfg, Rng& rng,
                                 bool causal)
    : prefix_(std::move(prefix)), cfg_(cfg), causal_(causal) {
    if (cfg_.vocab_size <= 0) throw ConfigError(prefix_ + ": vocab_size not set");
    const i64 d = cfg_.dim;
    embed_.init(prefix_ + ".embed", gaussian_tensor({cfg_.vocab_size, d}, cfg_.init_std, rng));
    pos_.init(prefix_ + ".pos", gaussian_tensor({cfg_.text_len, d}, cfg_.init_std, rng));
    blocks_.resize(static_cast<size_t>(cfg_.blocks));
    for (i64 i = 0; i < cfg_.blocks; ++i) {
        auto& blk = blocks_[static_cast<size_t>(i)];
        const std::string p = prefix_ + ".blocks." + std::to_string(i);
        blk.s_norm.init(p + ".s_norm", d);
        blk.self_attn.init(p + ".self_attn", d, cfg_.init_std, rng);
        blk.x_norm.init(p + ".x_norm", d);
        blk.cross_attn.init(p + ".cross_attn", d, cfg_.init_std, rng, /*zero_out=*/true);
        blk.f_norm.init(p + ".f_norm", d);
        blk.ffn.init(p + ".ffn", d, cfg_.ffn(), cfg_.init_std, rng);
    }
    out_norm_.init(prefix_ + ".out_norm", d);
}

void GroundedDecoder::collect(ParameterRegistry& reg) {
    reg.add(&embed_);
    reg.add(&pos_);
    for (auto& blk : blocks_) {
        blk.s_norm.collect(reg);
        blk.self_attn.collect(reg);
        blk.x_norm.collect(reg);
        blk.cross_attn.collect(reg);
        blk.f_norm.collect(reg);
        blk.ffn.collect(reg);
    }
    out_norm_.collect(reg);
}

Var GroundedDecoder::forward_tokens(Tape& t, const TokenSequence& seq, Var memory,
                                    const std::vector<std::vector<double>>& mem_valid) {
    const i64 b = seq.batch, l = seq.len, d = cfg_.dim;
    if (memory->val.rank() != 3 || memory->val.dim(0) != b)
        throw ArgError(prefix_ + ": text/visual batch size mismatch (text " + std::to_string(b) +
                       ", memory " + std::to_string(memory->val.dim(0)) + ")");
    if (l > cfg_.text_len) throw ArgError(prefix_ + ": sequence longer than configured length");
    for (size_t i = 0; i < seq.ids.size(); ++i)
        if (seq.ids[i] < 0 || seq.ids[i] >= cfg_.vocab_size)
            throw ArgError(prefix_ + ": token id out of range at position " +
                           std::to_string(i % static_cast<size_t>(l)));

    Var x = ops::embedding(t, embed_.use(t), seq.ids);
    std::vector<i64> pos_idx(static_cast<size_t>(b * l));
    for (i64 bi = 0; bi < b; ++bi)
        for (i64 li = 0; li < l; ++li) pos_idx[static_cast<size_t>(bi * l + li)] = li;
    x = ops::add(t, x, ops::gather_rows(t, pos_.use(t), std::move(pos_idx)));
    x = ops::reshape(t, x, {b, l, d});

    const Tensor self_mask =
        causal_ ? causal_mask(b, cfg_.heads, l) : key_mask(seq.mask_rows(), cfg_.heads, l);
    const Tensor cross_mask = key_mask(mem_valid, cfg_.heads, l);

    for (auto& blk : blocks_) {
        Var h = blk.s_norm.apply(t, x);
        x = ops::add(t, x, mha(t, h, h, blk.self_attn, cfg_.heads, &self_mask));
        Var q = blk.x_norm.apply(t, x);
        x = ops::add(t, x, mha(t, q, memory, blk.cross_attn, cfg_.heads, &cross_mask));
        x = ops::add(t, x, blk.ffn.apply(t, blk.f_norm.apply(t, x)));
    }
    return out_norm_.apply(t, x);
}

AlignmentDecoder::AlignmentDecoder(const ModelConfig& cfg, Rng rng) : core_("ad", cfg, rng, false) {
    head_.init("ad.vlm_head", cfg.dim, 2, cfg.init_std, rng);
}

void AlignmentDecoder::collect(ParameterRegistry& reg) {
    core_.collect(reg);
    head_.collect(reg);
}

FusedRepresentation AlignmentDecoder::fuse(Tape& t, const TokenSequence& text,
                                           const EncodedVisual& visual) {
    const i64 m = visual.tokens->val.dim(1);
    std::vector<std::vector<double>> mem_valid(
        static_cast<size_t>(visual.tokens->val.dim(0)),
        std::vector<double>(static_cast<size_t>(m), 1.0));
    return fuse_memory(t, text, visual.tokens, mem_valid);
}

FusedRepresentation AlignmentDecoder::fuse_memory(
    Tape& t, const TokenSequence& text, Var memory,
    const std::vector<std::vector<double>>& mem_valid) {
    FusedRepresentation out;
    out.tokens = core_.forward_tokens(t, text, memory, mem_valid);
    const i64 b = text.batch, l = text.len, d = core_.config().dim;
    std::vector<i64> idx(static_cast<size_t>(b));
    for (i64 bi = 0; bi < b; ++bi) idx[static_cast<size_t>(bi)] = bi * l;
    out.enc_vec = ops::gather_rows(t, ops::reshape(t, out.tokens, {b * l, d}), std::move(idx));
    return out;
}

VlmPrediction AlignmentDecoder::vlm_head(Tape& t, const FusedRepresentation& fused) {
    if (!kernels::all_finite(fused.enc_vec->val.ptr(), fused.enc_vec->val.numel()))
        throw NumericError("vlm head: non-finite fused representation");
    VlmPrediction out;
    out.logits = head_.apply(t, fused.enc_vec);  // [B, 2]; class 1 = matched
    const i64 b = out.logits->val.dim(0);
    Tensor probs({b, 2});
    kernels::softmax_rows(out.logits->val.ptr(), probs.ptr(), b, 2);
    out.p_vlm.resize(static_cast<size_t>(b));
    for (i64 i = 0; i < b; ++i) out.p_vlm[static_cast<size_t>(i)] = probs.data[i * 2 + 1];
    return out;
}

GenerationDecoder::GenerationDecoder(const ModelConfig& cfg, Rng rng)
    : core_("gd", cfg, rng, true) {
    lm_head_.init("gd.lm_head", cfg.dim, cfg.vocab_size, cfg.init_std, rng);
}

void GenerationDecoder::collect(ParameterRegistry& reg) {
    core_.collect(reg);
    lm_head_.collect(reg);
}

Var GenerationDecoder::decode_logits(Tape& t, const TokenSequence& text,
                                     const EncodedVisual& visual) {
    const i64 m = visual.tokens->val.dim(1);
    std::vector<std::vector<double>> mem_valid(
        static_cast<size_t>(visual.tokens->val.dim(0)),
        std::vector<double>(static_cast<size_t>(m), 1.0));
    return decode_logits_memory(t, text, visual.tokens, mem_valid);
}

Var GenerationDecoder::decode_logits_memory(Tape& t, const TokenSequence& text, Var memory,
                                            const std::vector<std::vector<double>>& mem_valid) {
    Var h = core_.forward_tokens(t, text, memory, mem_valid);
    return lm_head_.apply(t, h);  // [B, L, V]
}

Var GenerationDecoder::lm_nll(Tape& t, const TokenSequence& seq, Var memory,
                              const std::vector<std::vector<double>>& mem_valid,
                              const Vocabulary& vocab) {
    const i64 b = seq.batch, l = seq.len;
    bool has_real = false;
    for (i64 bi = 0; bi < b; ++bi) {
        bool eos = false;
        bool any = false;
        for (i64 li = 0; li < l; ++li) {
            if (seq.m(bi, li) != 0.0 && li > 0) any = true;
            if (seq.id(bi, li) == vocab.eos_id() && seq.m(bi, li) != 0.0) eos = true;
        }
        if (!any) throw ArgError("lm loss: target row " + std::to_string(bi) + " is all padding");
        if (!eos) throw ArgError("lm loss: target row " + std::to_string(bi) + " lacks [EOS]");
        has_real = true;
    }
    if (!has_real) throw ArgError("lm loss: empty batch");

    Var logits = decode_logits_memory(t, seq, memory, mem_valid);
    // position li predicts token li+1; count positions whose target is real
    std::vector<i64> targets(static_cast<size_t>(b * l), 0);
    std::vector<double> w(static_cast<size_t>(b * l), 0.0);
    double total = 0.0;
    for (i64 bi = 0; bi < b; ++bi)
        for (i64 li = 0; li + 1 < l; ++li)
            if (seq.m(bi, li + 1) != 0.0) {
                targets[static_cast<size_t>(bi * l + li)] = seq.id(bi, li + 1);
                w[static_cast<size_t>(bi * l + li)] = 1.0;
                total += 1.0;
            }
    for (double& x : w) x /= total;
    Var flat = ops::reshape(t, logits, {b * l, core_.config().vocab_size});
    return ops::masked_ce(t, flat, std::move(targets), std::move(w));
}

namespace {

struct Beam {
    std::vector<i64> ids;
    double logp = 0.0;
    bool done = false;
};

std::string detok(const std::vector<i64>& ids, const Vocabulary& vocab) {
    std::string out;
    for (i64 id : ids) {
        if (id == vocab.eos_id()) break;
        if (vocab.is_special(id)) continue;
        if (!out.empty()) out += ' ';
        out += vocab.token(id);
    }
    return out;
}

}  // namespace

std::vector<GenResult> GenerationDecoder::generate(
    const Tensor& memory, const std::vector<std::vector<double>>& mem_valid,
    const GenerationConfig& cfg, const Vocabulary& vocab) {
    if (cfg.max_len < 1) throw ArgError("generate: max_len must be >= 1");
    if (cfg.beam < 1) throw ArgError("generate: beam width must be >= 1");
    if (vocab.eos_id() < 0) throw ConfigError("generate: vocabulary lacks [EOS]");
    const i64 b = memory.dim(0);
    const i64 vsz = core_.config().vocab_size;
    const i64 cap = std::min<i64>(cfg.max_len, core_.config().text_len);

    std::vector<i64> seed = {vocab.dec_id()};
    for (const auto& wtok : split_words(cfg.prefix)) {
        const i64 id = vocab.id_of(wtok);
        if (id >= 0 && static_cast<i64>(seed.size()) < cap) seed.push_back(id);
    }

    std::vector<GenResult> results(static_cast<size_t>(b));
    for (i64 bi = 0; bi < b; ++bi) {
        Tensor mem_one({1, memory.dim(1), memory.dim(2)});
        kernels::copy(memory.ptr() + bi * memory.dim(1) * memory.dim(2), mem_one.ptr(),
                      mem_one.numel());
        std::vector<std::vector<double>> valid_one = {mem_valid[static_cast<size_t>(bi)]};

        std::vector<Beam> beams = {Beam{seed, 0.0, false}};
        while (true) {
            std::vector<size_t> live;
            for (size_t k = 0; k < beams.size(); ++k)
                if (!beams[k].done && static_cast<i64>(beams[k].ids.size()) < cap)
                    live.push_back(k);
            if (live.empty()) break;

            // one forward over the live beams (replicated memory)
            const i64 cur = static_cast<i64>(beams[live[0]].ids.size());
            TokenSequence ts;
            ts.batch = static_cast<i64>(live.size());
            ts.len = cur;
            for (size_t k : live) {
                ts.ids.insert(ts.ids.end(), beams[k].ids.begin(), beams[k].ids.end());
                ts.mask.insert(ts.mask.end(), static_cast<size_t>(cur), 1.0);
            }
            Tensor mem_rep({ts.batch, mem_one.dim(1), mem_one.dim(2)});
            for (i64 r = 0; r < ts.batch; ++r)
                kernels::copy(mem_one.ptr(), mem_rep.ptr() + r * mem_one.dim(1) * mem_one.dim(2),
                              mem_one.numel());
            std::vector<std::vector<double>> valid_rep(static_cast<size_t>(ts.batch),
                                                       valid_one[0]);
            Tape tape;
            Var logits = decode_logits_memory(tape, ts, ops::constant(tape, mem_rep), valid_rep);

            struct Cand {
                size_t beam;
                i64 token;
                double logp;
            };
            std::vector<Cand> cands;
            for (size_t r = 0; r < live.size(); ++r) {
                const double* row =
                    logits->val.ptr() + (static_cast<i64>(r) * cur + (cur - 1)) * vsz;
                Tensor lp({1, vsz});
                kernels::logsumexp_rows(row, lp.ptr(), 1, vsz);
                const double lse = lp.data[0];
                for (i64 v = 0; v < vsz; ++v)
                    cands.push_back({live[r], v, beams[live[r]].logp + row[v] - lse});
            }
            std::stable_sort(cands.begin(), cands.end(),
                             [](const Cand& a, const Cand& b) { return a.logp > b.logp; });

            std::vector<Beam> next;
            for (size_t k = 0; k < beams.size(); ++k)
                if (beams[k].done || static_cast<i64>(beams[k].ids.size()) >= cap)
                    next.push_back(beams[k]);
            const size_t want = static_cast<size_t>(cfg.beam);
            size_t added = 0;
            for (const Cand& cd : cands) {
                if (added >= want) break;
                Beam nb = beams[cd.beam];
                nb.ids.push_back(cd.token);
                nb.logp = cd.logp;
                nb.done = cd.token == vocab.eos_id();
                next.push_back(std::move(nb));
                ++added;
            }
            // keep the best `beam` hypotheses overall (finished ones compete too)
            std::stable_sort(next.begin(), next.end(),
                             [](const Beam& a, const Beam& b) { return a.logp > b.logp; });
            if (next.size() > want) next.resize(want);
            beams = std::move(next);
            bool all_done = true;
            for (const auto& bm : beams)
                if (!bm.done) all_done = false;
            if (all_done) break;
        }

        std::stable_sort(beams.begin(), beams.end(), [](const Beam& a, const Beam& b) {
            if (a.done != b.done) return a.done;  // prefer finished
            return a.logp > b.logp;
        });
        const Beam& best = beams.front();
        results[static_cast<size_t>(bi)] = {detok(best.ids, vocab), !best.done};
    }
    return results;
}

std::pair<Var, std::vector<std::vector<double>>> qa_memory(Tape& t, QaModel qa,
                                                           const TokenSequence& question,
                                                           const EncodedVisual& visual) {
    bool any = false;
    for (i64 bi = 0; bi < question.batch; ++bi)
        for (i64 li = 1; li < question.len; ++li)
            if (question.m(bi, li) != 0.0) any = true;
    if (!any) throw ArgError("qa: question is empty");

    FusedRepresentation f = qa.alignment->fuse(t, question, visual);
    // interleave [visual tokens ; fused question tokens] per sample
    const i64 b = question.batch;
    const i64 nv = visual.tokens->val.dim(1), l = question.len, d = visual.tokens->val.dim(2);
    Var flat = ops::concat_rows(t, ops::reshape(t, visual.tokens, {b * nv, d}),
                                ops::reshape(t, f.tokens, {b * l, d}));
    std::vector<i64> order;
    order.reserve(static_cast<size_t>(b * (nv + l)));
    for (i64 bi = 0; bi < b; ++bi) {
        for (i64 j = 0; j < nv; ++j) order.push_back(bi * nv + j);
        for (i64 li = 0; li < l; ++li) order.push_back(b * nv + bi * l + li);
    }
    Var mem = ops::reshape(t, ops::gather_rows(t, flat, std::move(order)), {b, nv + l, d});

    std::vector<std::vector<double>> valid(static_cast<size_t>(b));
    for (i64 bi = 0; bi < b; ++bi) {
        auto& row = valid[static_cast<size_t>(bi)];
        row.assign(static_cast<size_t>(nv), 1.0);
        for (i64 li = 0; li < l; ++li) row.push_back(question.m(bi, li));
    }
    return {mem, std::move(valid)};
}

std::vector<GenResult> qa_forward(QaModel qa, Tape& t, const TokenSequence& question,
                                  const EncodedVisual& visual, const GenerationConfig& cfg,
                                  const Vocabulary& vocab) {
    TokenSequence q = question.with_first(vocab.enc_id());
    auto [mem, valid] = qa_memory(t, qa, q, visual);
    return qa.generation->generate(mem->val, valid, cfg, vocab);
}

}  // namespace omnivl
