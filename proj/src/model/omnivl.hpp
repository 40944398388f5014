#pragma once

#include <memory>

#include "model/decoders.hpp"
#include "model/text_encoder.hpp"
#include "model/visual_encoder.hpp"

namespace omnivl {

// The full model: unified visual encoder, text encoder, both grounded
// decoders, the contrastive projection heads and the learnable temperature.
// Parameter groups resolve by name prefix: ve. te. ad. gd. proj_v. proj_t. tau.
struct OmniVLModel {
    ModelConfig cfg;
    VisualEncoder ve;
    TextEncoder te;
    AlignmentDecoder ad;
    GenerationDecoder gd;
    LinearParams proj_v;
    LinearParams proj_t;
    Parameter log_tau;  // tau stored as exponent, so tau > 0 always
    ParameterRegistry registry;

    OmniVLModel(const ModelConfig& c, uint64_t seed, double tau_init = 0.07);

    Var project_visual(Tape& t, Var v_cls) {
        return ops::l2normalize(t, proj_v.apply(t, v_cls));
    }
    Var project_text(Tape& t, Var w_cls) {
        return ops::l2normalize(t, proj_t.apply(t, w_cls));
    }
};

// Momentum copies of the contrastive tower (visual encoder, text encoder,
// projection heads). Frozen; their outputs feed the memory bank.
struct MomentumEncoders {
    VisualEncoder ve;
    TextEncoder te;
    LinearParams proj_v;
    LinearParams proj_t;
    ParameterRegistry registry;
    double coeff = 0.995;

    MomentumEncoders(const ModelConfig& c, uint64_t seed);

    void sync_from(const ParameterRegistry& live);  // hard copy
    // mom <- coeff*mom + (1-coeff)*live
    void step_toward(const ParameterRegistry& live);

    Var project_visual(Tape& t, Var v_cls) {
        return ops::l2normalize(t, proj_v.apply(t, v_cls));
    }
    Var project_text(Tape& t, Var w_cls) {
        return ops::l2normalize(t, proj_t.apply(t, w_cls));
    }
};

// Elementwise mom <- m*mom + (1-m)*live over name-matched parameters.
void momentum_step(const ParameterRegistry& live, ParameterRegistry& mom, double coeff);

}  // namespace omnivl
