#pragma once

#include <string>
#include <vector>

#include "corpus/corpus.hpp"

namespace omnivl {

enum class Paradigm { decoupled, image_only, video_only, joint_scratch, img2vid };

Paradigm parse_paradigm(const std::string& s);
const char* paradigm_name(Paradigm p);

struct StageConfig {
    std::string name;
    bool use_image = false;
    bool use_video = false;
    i64 epochs = 1;
    i64 steps = 0;  // when > 0, overrides the epoch-derived stage length
    i64 batch_image = 8;
    i64 batch_video = 8;
    double peak_lr = 3e-4;
    i64 warmup_steps = 10;
    double decay_rate = 0.85;
};

// Two-stage layout; the paradigm decides which sources each stage reads.
// decoupled = image-only stage then alternating joint stage.
struct ScheduleConfig {
    Paradigm paradigm = Paradigm::decoupled;
    StageConfig stage1;
    StageConfig stage2;

    std::vector<StageConfig> stages() const;
};

struct BatchPlan {
    i64 stage = 0;
    std::string stage_name;
    Modality modality = Modality::image;
    i64 step_in_stage = 0;
    std::vector<size_t> sample_ids;
};

// Deterministic full-run plan. Joint stages strictly alternate image/video
// batches starting with image; an exhausted modality cycles with a
// reshuffle. Everything derives from the seed.
std::vector<BatchPlan> plan_batches(const ScheduleConfig& cfg, const Corpus& corpus,
                                    uint64_t seed);

// Linear warmup to peak_lr over warmup_steps, then linear decay reaching
// peak_lr * decay_rate on the stage's final step.
double lr_at(i64 step_in_stage, i64 stage_total_steps, const StageConfig& stage);

}  // namespace omnivl
