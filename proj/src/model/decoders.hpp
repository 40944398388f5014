#pragma once

#include "model/blocks.hpp"
#include "model/config.hpp"
#include "model/visual_encoder.hpp"
#include "text/vocab.hpp"

namespace omnivl {

// Transformer decoder over text with cross-attention into a visual (or
// mixed) memory. Shared by the alignment decoder (bidirectional self
// attention) and the generation decoder (causal self attention). Cross
// attention output projections start at zero, making a fresh decoder
// independent of its memory.
class GroundedDecoder {
public:
    GroundedDecoder(std::string prefix, const ModelConfig& cfg, Rng& rng, bool causal);

    void collect(ParameterRegistry& reg);

    // memory: [B, M, D]; mem_valid: per-sample 0/1 over memory slots
    Var forward_tokens(Tape& t, const TokenSequence& seq, Var memory,
                       const std::vector<std::vector<double>>& mem_valid);

    const ModelConfig& config() const { return cfg_; }

private:
    std::string prefix_;
    ModelConfig cfg_;
    bool causal_;
    Parameter embed_;
    Parameter pos_;
    struct Block {
        NormParams s_norm;
        AttnParams self_attn;
        NormParams x_norm;
        AttnParams cross_attn;  // zero-initialized output projection
        NormParams f_norm;
        FfnParams ffn;
    };
    std::vector<Block> blocks_;
    NormParams out_norm_;
};

struct FusedRepresentation {
    Var tokens = nullptr;   // [B, L, D]
    Var enc_vec = nullptr;  // [B, D], feature at the [ENC] position
};

struct VlmPrediction {
    Var logits = nullptr;        // [B, 2]
    std::vector<double> p_vlm;   // probability of "matched"
};

class AlignmentDecoder {
public:
    AlignmentDecoder(const ModelConfig& cfg, Rng rng);
    void collect(ParameterRegistry& reg);

    // text must already carry [ENC] at position 0 (see with_first)
    FusedRepresentation fuse(Tape& t, const TokenSequence& text, const EncodedVisual& visual);
    FusedRepresentation fuse_memory(Tape& t, const TokenSequence& text, Var memory,
                                    const std::vector<std::vector<double>>& mem_valid);
    VlmPrediction vlm_head(Tape& t, const FusedRepresentation& fused);

private:
    GroundedDecoder core_;
    LinearParams head_;
};

struct GenerationConfig {
    i64 max_len = 16;          // total sequence budget incl. [DEC] and prefix
    int beam = 1;              // 1 = greedy
    std::string prefix;        // e.g. "a picture of"
};

struct GenResult {
    std::string text;
    bool truncated = false;
};

class GenerationDecoder {
public:
    GenerationDecoder(const ModelConfig& cfg, Rng rng);
    void collect(ParameterRegistry& reg);

    // text must carry [DEC] at position 0
    Var decode_logits(Tape& t, const TokenSequence& text, const EncodedVisual& visual);
    Var decode_logits_memory(Tape& t, const TokenSequence& text, Var memory,
                             const std::vector<std::vector<double>>& mem_valid);

    // teacher-forced mean NLL of seq (positions after [DEC] through [EOS])
    Var lm_nll(Tape& t, const TokenSequence& seq, Var memory,
               const std::vector<std::vector<double>>& mem_valid, const Vocabulary& vocab);

    std::vector<GenResult> generate(const Tensor& memory,
                                    const std::vector<std::vector<double>>& mem_valid,
                                    const GenerationConfig& cfg, const Vocabulary& vocab);

private:
    GroundedDecoder core_;
    LinearParams lm_head_;
};

// VQA rearrangement: the question is fused by the alignment decoder, then the
// generation decoder cross-attends to [visual tokens ; fused question tokens].
struct QaModel {
    AlignmentDecoder* alignment;
    GenerationDecoder* generation;
};

// Differentiable concatenated memory for QA (question must already carry
// [ENC] at position 0) plus its validity rows.
std::pair<Var, std::vector<std::vector<double>>> qa_memory(Tape& t, QaModel qa,
                                                           const TokenSequence& question,
                                                           const EncodedVisual& visual);

std::vector<GenResult> qa_forward(QaModel qa, Tape& t, const TokenSequence& question,
                                  const EncodedVisual& visual, const GenerationConfig& cfg,
                                  const Vocabulary& vocab);

}  // namespace omnivl
