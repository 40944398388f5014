#include "model/text_encoder.hpp"

#include "core/kernels.hpp"

namespace omnivl {

TextEncoder::TextEncoder(const ModelConfig& cfg, Rng rng) : cfg_(cfg) {
    if (cfg_.vocab_size <= 0) throw ConfigError("text encoder: vocab_size not set");
    const i64 d = cfg_.dim;
    embed_.init("te.embed", gaussian_tensor({cfg_.vocab_size, d}, cfg_.init_std, rng));
    pos_.init("te.pos", gaussian_tensor({cfg_.text_len, d}, cfg_.init_std, rng));
    blocks_.resize(static_cast<size_t>(cfg_.blocks));
    for (i64 i = 0; i < cfg_.blocks; ++i) {
        auto& blk = blocks_[static_cast<size_t>(i)];
        const std::string p = "te.blocks." + std::to_string(i);
        blk.a_norm.init(p + ".a_norm", d);
        blk.attn.init(p + ".attn", d, cfg_.init_std, rng);
        blk.f_norm.init(p + ".f_norm", d);
        blk.ffn.init(p + ".ffn", d, cfg_.ffn(), cfg_.init_std, rng);
    }
    out_norm_.init("te.out_norm", d);
}

void TextEncoder::collect(ParameterRegistry& reg) {
    reg.add(&embed_);
    reg.add(&pos_);
    for (auto& blk : blocks_) {
        blk.a_norm.collect(reg);
        blk.attn.collect(reg);
        blk.f_norm.collect(reg);
        blk.ffn.collect(reg);
    }
    out_norm_.collect(reg);
}

EncodedText TextEncoder::encode(Tape& t, const TokenSequence& seq) {
    const i64 b = seq.batch, l = seq.len, d = cfg_.dim;
    if (l > cfg_.text_len) throw ArgError("text encoder: sequence longer than configured length");
    for (size_t i = 0; i < seq.ids.size(); ++i)
        if (seq.ids[i] < 0 || seq.ids[i] >= cfg_.vocab_size)
            throw ArgError("text encoder: token id out of range at position " +
                           std::to_string(i % static_cast<size_t>(l)));

    Var x = ops::embedding(t, embed_.use(t), seq.ids);  // [b*l, d]
    std::vector<i64> pos_idx(static_cast<size_t>(b * l));
    for (i64 bi = 0; bi < b; ++bi)
        for (i64 li = 0; li < l; ++li) pos_idx[static_cast<size_t>(bi * l + li)] = li;
    x = ops::add(t, x, ops::gather_rows(t, pos_.use(t), std::move(pos_idx)));
    x = ops::reshape(t, x, {b, l, d});

    const Tensor mask = key_mask(seq.mask_rows(), cfg_.heads, l);
    for (auto& blk : blocks_) {
        Var h = blk.a_norm.apply(t, x);
        x = ops::add(t, x, mha(t, h, h, blk.attn, cfg_.heads, &mask));
        x = ops::add(t, x, blk.ffn.apply(t, blk.f_norm.apply(t, x)));
    }
    x = out_norm_.apply(t, x);

    EncodedText out;
    out.tokens = x;
    std::vector<i64> cls_idx(static_cast<size_t>(b));
    for (i64 bi = 0; bi < b; ++bi) cls_idx[static_cast<size_t>(bi)] = bi * l;
    out.w_cls = ops::gather_rows(t, ops::reshape(t, x, {b * l, d}), std::move(cls_idx));
    return out;
}

}  // namespace omnivl
