#pragma once

#include "model/omnivl.hpp"
#include "objectives/memory_bank.hpp"

namespace omnivl {

struct LossWeights {
    double lambda_univlc = 1.0;
    double lambda_vlm = 1.0;
    double lambda_lm = 1.0;
};

struct UniVLCState {
    Parameter* log_tau = nullptr;
    MemoryBank bank;
    // divide each sample's positive sum by |P(i)|; switch restores the plain
    // unnormalized sum
    bool normalize_positives = true;

    UniVLCState(Parameter* tau, i64 bank_capacity, i64 proj_dim)
        : log_tau(tau), bank(bank_capacity, proj_dim) {}
};

// Label-aware symmetric contrastive loss. Anchors are the live projected
// embeddings v, w; the scoring set is the memory bank contents with the
// batch's momentum embeddings appended, so every sample has at least itself
// as a positive. Bank-side vectors enter as constants and receive no
// gradient.
Var univlc_loss(Tape& t, Var v, Var w, const std::vector<i64>& y, const Tensor& v_mom,
                const Tensor& w_mom, UniVLCState& state);

// Pairing plan for the matching loss: with probability 1/2 keep the sample's
// own text, otherwise swap in another batch element's text; the target stays
// positive when the replacement shares the label.
struct VlmPlan {
    std::vector<i64> text_source;  // index of the text paired with visual i
    std::vector<i64> target;       // 1 = matched
};

VlmPlan make_vlm_plan(const std::vector<i64>& y, Rng& rng);

// texts: one tokenized row per sample ([CLS] layout; position 0 is swapped
// to [ENC] internally).
Var vlm_loss(Tape& t, AlignmentDecoder& ad, const EncodedVisual& visual,
             const std::vector<TokenSequence>& texts, const VlmPlan& plan,
             const Vocabulary& vocab);

// Teacher-forced autoregressive NLL of the target text given the visual.
Var lm_loss(Tape& t, GenerationDecoder& gd, const EncodedVisual& visual,
            const TokenSequence& lm_targets, const Vocabulary& vocab);

struct TotalLoss {
    Var total = nullptr;
    double univlc = 0.0, vlm = 0.0, lm = 0.0;
};

}  // namespace omnivl
