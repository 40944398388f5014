#pragma once

#include <vector>

#include "model/blocks.hpp"
#include "model/config.hpp"

namespace omnivl {

// One batch of frame stacks; T == 1 means images and selects the 2D
// tokenizer, T > 1 selects the 3D tokenizer.
struct VisualBatch {
    Tensor frames;  // [B, T, H, W, C]
    i64 patch = 16;
    i64 tubelet = 1;

    i64 b() const { return frames.dim(0); }
    i64 t() const { return frames.dim(1); }
    i64 h() const { return frames.dim(2); }
    i64 w() const { return frames.dim(3); }
    i64 c() const { return frames.dim(4); }

    void validate() const;
};

struct EncodedVisual {
    Var tokens = nullptr;  // [B, 1 + T'*S, D], CLS first
    Var v_cls = nullptr;   // [B, D]
    i64 t_prime = 1;
    i64 s = 0;
};

// Unified image/video encoder: shared spatial attention and FFN, per-block
// temporal attention that only the video path runs. Temporal output
// projections and temporal position embeddings start at zero so a fresh
// model encodes a stack of identical frames exactly like a single image.
class VisualEncoder {
public:
    VisualEncoder(const ModelConfig& cfg, Rng rng);

    void collect(ParameterRegistry& reg);

    Var tokenize(Tape& t, const VisualBatch& batch);  // [B, T'*S, D]
    EncodedVisual encode(Tape& t, const VisualBatch& batch);

    // copy the 2D tokenizer into temporal slice 0 of the 3D tokenizer and
    // zero the other slices (done at construction and again when a training
    // schedule first introduces video batches)
    void inflate_video_tokenizer();

    std::vector<Parameter*> video_only_params();
    std::vector<Parameter*> image_only_params();

    const ModelConfig& config() const { return cfg_; }

    struct Block {
        NormParams t_norm;
        AttnParams t_attn;
        NormParams s_norm;
        AttnParams s_attn;
        NormParams f_norm;
        FfnParams ffn;
    };

private:
    ModelConfig cfg_;
    LinearParams tok2d_;
    LinearParams tok3d_;
    Parameter cls_;
    Parameter pos_spatial_;
    Parameter pos_temporal_;  // zero-initialized
    std::vector<Block> blocks_;
    NormParams out_norm_;
};

// Align-corners linear interpolation matrix [t_new, t_old]; identity when
// sizes match.
Tensor temporal_interp_matrix(i64 t_old, i64 t_new);
// Resample temporal position embeddings to a new clip length.
Tensor interpolate_temporal_pos(const Tensor& pe, i64 t_new);

}  // namespace omnivl
