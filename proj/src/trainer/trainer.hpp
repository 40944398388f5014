#pragma once

#include <string>
#include <vector>

#include "objectives/objectives.hpp"
#include "text/vocab.hpp"
#include "trainer/checkpoint.hpp"
#include "trainer/schedule.hpp"

namespace omnivl {

struct TrainOptions {
    uint64_t seed = 0;
    LossWeights weights;
    double momentum_coeff = 0.995;
    i64 bank_size = 1024;
    bool normalize_positives = true;
    i64 log_every = 1;
    i64 checkpoint_every = 0;  // 0 = final checkpoint only
    std::string outdir;        // empty = keep everything in memory
    std::string config_text;   // resolved config, embedded into checkpoints
};

struct MetricsRow {
    i64 step = 0;
    std::string stage;
    std::string modality;
    double loss_total = 0, loss_univlc = 0, loss_vlm = 0, loss_lm = 0, lr = 0;

    std::string to_json() const;
};

std::string format_double(double v);  // shortest round-trip, run-stable

// Decoupled joint pretraining driver. One optimizer step per planned batch:
// forward, total loss, backward, AdamW on the touched parameters, momentum
// update, bank enqueue. The memory bank resets at stage boundaries and the
// 3D tokenizer is re-inflated from the trained 2D tokenizer when a schedule
// first introduces video batches.
class Trainer {
public:
    Trainer(OmniVLModel& model, MomentumEncoders& momentum, const Corpus& corpus,
            const Vocabulary& vocab, ScheduleConfig schedule, TrainOptions opt);

    std::vector<MetricsRow> run();
    void resume(const std::string& checkpoint_path);

    const std::vector<BatchPlan>& plan() const { return plan_; }
    i64 stage_steps(i64 stage) const;
    i64 global_step() const { return global_step_; }
    UniVLCState& univlc_state() { return state_; }
    AdamW& optimizer() { return opt_; }

private:
    MetricsRow step_once(const BatchPlan& bp);
    void on_stage_start(i64 stage);
    void save_now(const std::string& path);

    OmniVLModel& model_;
    MomentumEncoders& momentum_;
    const Corpus& corpus_;
    const Vocabulary& vocab_;
    ScheduleConfig schedule_;
    TrainOptions options_;
    std::vector<BatchPlan> plan_;
    std::vector<StageConfig> stages_;
    std::vector<TokenSequence> cls_texts_;  // per corpus item
    std::vector<TokenSequence> lm_texts_;
    AdamW opt_;
    UniVLCState state_;
    i64 global_step_ = 0;
    i64 current_stage_ = -1;
    i64 video_ready_ = 0;
};

}  // namespace omnivl
