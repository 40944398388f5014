#pragma once

#include <string>

#include "core/error.hpp"
#include "core/tensor.hpp"

namespace omnivl {

// Shared desk-scale dimensions. The paper-scale sizes are exposed as a
// named preset but nothing here assumes they are ever trained.
struct ModelConfig {
    i64 dim = 64;
    int heads = 4;
    i64 blocks = 4;
    i64 ffn_hidden = 0;  // 0 -> 4*dim
    i64 patch = 16;
    i64 tubelet = 1;
    i64 image_h = 32, image_w = 32, channels = 3;
    i64 video_frames = 4;  // temporal positions stored = video_frames / tubelet
    i64 text_len = 16;
    i64 proj_dim = 32;
    i64 vocab_size = 0;  // filled in once the vocabulary exists
    double init_std = 0.02;

    i64 ffn() const { return ffn_hidden > 0 ? ffn_hidden : 4 * dim; }
    i64 spatial_tokens() const { return (image_h / patch) * (image_w / patch); }
    i64 temporal_positions() const { return video_frames / tubelet; }

    void apply_preset(const std::string& name) {
        if (name == "desk") return;
        if (name == "vit_b16_bert_base") {
            // ViT-B/16 visual tower and BERT-base depth/width
            dim = 768;
            heads = 12;
            blocks = 12;
            ffn_hidden = 3072;
            patch = 16;
            image_h = image_w = 224;
            video_frames = 8;
            text_len = 40;
            proj_dim = 256;
            return;
        }
        throw ConfigError("unknown model preset: " + name);
    }

    void validate() const {
        if (dim % heads != 0) throw ConfigError("model.dim must be divisible by model.heads");
        if (image_h % patch != 0 || image_w % patch != 0)
            throw ConfigError("image size must be divisible by patch size");
        if (video_frames % tubelet != 0)
            throw ConfigError("video_frames must be divisible by tubelet");
        if (text_len < 2) throw ConfigError("text_len must be >= 2");
    }
};

}  // namespace omnivl
