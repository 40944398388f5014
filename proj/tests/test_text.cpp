#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "model/text_encoder.hpp"
#include "oracles/oracles.hpp"
#include "test_support.hpp"

using namespace omnivl;

namespace {
Vocabulary toy_vocab() {
    return Vocabulary::build({"a picture of a red square", "a video of a blue checker"});
}
}  // namespace

TEST_CASE("tokenize_text layout, truncation, determinism") {
    Vocabulary v = toy_vocab();
    TokenSequence s = tokenize_text("a picture of", v, 8);
    CHECK(s.len == 8);
    CHECK(s.id(0, 0) == v.cls_id());
    CHECK(s.id(0, 1) == v.id_of("a"));
    CHECK(s.id(0, 2) == v.id_of("picture"));
    CHECK(s.id(0, 3) == v.id_of("of"));
    CHECK(s.id(0, 4) == v.pad_id());
    CHECK(s.m(0, 0) == 1.0);
    CHECK(s.m(0, 3) == 1.0);
    CHECK(s.m(0, 4) == 0.0);

    // longer than L truncates to exactly L, all-ones mask
    TokenSequence t = tokenize_text("a picture of a red square", v, 4);
    CHECK(t.len == 4);
    for (i64 l = 0; l < 4; ++l) CHECK(t.m(0, l) == 1.0);

    TokenSequence u1 = tokenize_text("a red square", v, 8);
    TokenSequence u2 = tokenize_text("a red square", v, 8);
    CHECK(u1.ids == u2.ids);

    CHECK_THROWS_AS(tokenize_text("x", Vocabulary::build({}), 8), ConfigError);
}

TEST_CASE("vocabulary file round trip, one token per line") {
    Vocabulary v = toy_vocab();
    auto dir = testsup::scratch_dir("vocab");
    v.save(dir + "/vocab.txt");
    Vocabulary w = Vocabulary::load(dir + "/vocab.txt");
    CHECK(w.size() == v.size());
    CHECK(w.id_of("picture") == v.id_of("picture"));
    CHECK(w.cls_id() == v.cls_id());
    CHECK(w.pad_id() == v.pad_id());
    // specials are distinct
    std::set<i64> ids = {w.cls_id(), w.enc_id(), w.dec_id(), w.eos_id(), w.pad_id()};
    CHECK(ids.size() == 5);
}

TEST_CASE("lm_sequence appends EOS and truncates") {
    Vocabulary v = toy_vocab();
    TokenSequence s = lm_sequence("red square", v, 8);
    CHECK(s.id(0, 0) == v.dec_id());
    CHECK(s.id(0, 1) == v.id_of("red"));
    CHECK(s.id(0, 2) == v.id_of("square"));
    CHECK(s.id(0, 3) == v.eos_id());
    CHECK(s.m(0, 3) == 1.0);
    CHECK(s.m(0, 4) == 0.0);
    TokenSequence t = lm_sequence("a picture of a red square", v, 4);
    CHECK(t.id(0, 3) == v.eos_id());  // always room for EOS
}

namespace {
ModelConfig text_cfg(const Vocabulary& v) {
    ModelConfig cfg;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.blocks = 2;
    cfg.ffn_hidden = 32;
    cfg.text_len = 8;
    cfg.vocab_size = v.size();
    return cfg;
}
}  // namespace

TEST_CASE("mask locality: pad content cannot leak into real positions") {
    Vocabulary v = toy_vocab();
    TextEncoder te(text_cfg(v), Rng(3));
    TokenSequence s = tokenize_text("a red square", v, 8);
    Tape t1;
    EncodedText e1 = te.encode(t1, s);

    TokenSequence s2 = s;
    s2.ids[6] = v.id_of("blue");  // pad slot, mask stays 0
    Tape t2;
    EncodedText e2 = te.encode(t2, s2);
    for (i64 l = 0; l < 4; ++l)
        for (i64 d = 0; d < 16; ++d)
            CHECK(e1.tokens->val.data[l * 16 + d] == e2.tokens->val.data[l * 16 + d]);
    CHECK(testsup::bitwise_equal(e1.w_cls->val, e2.w_cls->val));
}

TEST_CASE("bidirectionality witness: later tokens influence earlier features") {
    Vocabulary v = toy_vocab();
    TextEncoder te(text_cfg(v), Rng(3));
    TokenSequence s = tokenize_text("a red square", v, 8);
    TokenSequence s2 = s;
    s2.ids[3] = v.id_of("blue");  // real position 3 changes
    Tape t1, t2;
    EncodedText e1 = te.encode(t1, s);
    EncodedText e2 = te.encode(t2, s2);
    double diff = 0;
    for (i64 d = 0; d < 16; ++d)
        diff = std::max(diff, std::abs(e1.tokens->val.data[1 * 16 + d] -
                                       e2.tokens->val.data[1 * 16 + d]));
    CHECK(diff > 1e-9);  // position 1 sees position 3
}

TEST_CASE("batch permutation equivariance") {
    Vocabulary v = toy_vocab();
    TextEncoder te(text_cfg(v), Rng(7));
    TokenSequence a = tokenize_text("a red square", v, 8);
    TokenSequence b = tokenize_text("a blue checker", v, 8);
    Tape t1, t2;
    EncodedText e1 = te.encode(t1, stack({a, b}));
    EncodedText e2 = te.encode(t2, stack({b, a}));
    for (i64 d = 0; d < 16; ++d) {
        CHECK(e1.w_cls->val.data[d] == e2.w_cls->val.data[16 + d]);
        CHECK(e1.w_cls->val.data[16 + d] == e2.w_cls->val.data[d]);
    }
}

TEST_CASE("id out of range raises with position") {
    Vocabulary v = toy_vocab();
    TextEncoder te(text_cfg(v), Rng(3));
    TokenSequence s = tokenize_text("a red square", v, 8);
    s.ids[2] = v.size() + 5;
    Tape t;
    CHECK_THROWS_AS(te.encode(t, s), ArgError);
}

TEST_CASE("finite-difference gradient agreement on a tiny text encoder") {
    Vocabulary v = toy_vocab();
    ModelConfig cfg = text_cfg(v);
    cfg.blocks = 1;
    cfg.dim = 8;
    cfg.ffn_hidden = 16;
    TextEncoder te(cfg, Rng(13));
    ParameterRegistry reg;
    te.collect(reg);
    TokenSequence s = tokenize_text("red square", v, 4);

    std::vector<double> w(8);
    Rng wr(5);
    for (auto& x : w) x = wr.gaussian();
    auto loss_fn = [&]() {
        Tape t;
        EncodedText e = te.encode(t, s);
        return ops::weighted_sum(t, e.w_cls, w)->val.data[0];
    };

    Parameter* probe = reg.find("te.blocks.0.attn.q.w");
    REQUIRE(probe != nullptr);
    {
        Tape t;
        EncodedText e = te.encode(t, s);
        Var loss = ops::weighted_sum(t, e.w_cls, w);
        for (Parameter* p : reg.all()) p->zero_grad();
        t.backward(loss);
    }
    auto fd = oracles::fd_gradient(loss_fn, probe->value().ptr(), 16);  // first 16 coords
    for (size_t i = 0; i < fd.size(); ++i)
        CHECK(testsup::rel_close(probe->grad().data[i], fd[i], 1e-5));
}
