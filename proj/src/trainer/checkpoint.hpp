#pragma once

#include <string>

#include "model/omnivl.hpp"
#include "objectives/memory_bank.hpp"
#include "trainer/optimizer.hpp"

namespace omnivl {

// Everything a resumed run needs: parameters, momentum copies, bank,
// optimizer moments, counters, plus the resolved config and vocabulary as
// embedded text so evaluation can rebuild the model from the file alone.
struct CheckpointMeta {
    i64 global_step = 0;
    i64 video_ready = 0;  // 1 once the 3D tokenizer was inflated for training
    std::string config_text;
    std::string vocab_text;
    uint64_t config_hash = 0;
};

void save_checkpoint(const std::string& path, const OmniVLModel& model,
                     const MomentumEncoders& momentum, const AdamW& opt, const MemoryBank& bank,
                     const CheckpointMeta& meta);

CheckpointMeta load_checkpoint(const std::string& path, OmniVLModel& model,
                               MomentumEncoders& momentum, AdamW& opt, MemoryBank& bank);

// Model-only view for evaluation: reads the embedded config/vocab.
struct CheckpointInfo {
    std::string config_text;
    std::string vocab_text;
    i64 global_step = 0;
};
CheckpointInfo peek_checkpoint(const std::string& path);
void load_model_weights(const std::string& path, OmniVLModel& model);

uint64_t fnv1a(const std::string& s);

}  // namespace omnivl
