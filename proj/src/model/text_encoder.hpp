#pragma once

#include "model/blocks.hpp"
#include "model/config.hpp"
#include "text/vocab.hpp"

namespace omnivl {

struct EncodedText {
    Var tokens = nullptr;  // [B, L, D]
    Var w_cls = nullptr;   // [B, D]
};

// Bidirectional transformer over token ids; w_cls is the last-layer feature
// at position 0.
class TextEncoder {
public:
    TextEncoder(const ModelConfig& cfg, Rng rng);

    void collect(ParameterRegistry& reg);
    EncodedText encode(Tape& t, const TokenSequence& seq);

private:
    ModelConfig cfg_;
    Parameter embed_;
    Parameter pos_;
    struct Block {
        NormParams a_norm;
        AttnParams attn;
        NormParams f_norm;
        FfnParams ffn;
    };
    std::vector<Block> blocks_;
    NormParams out_norm_;
};

}  // namespace omnivl
