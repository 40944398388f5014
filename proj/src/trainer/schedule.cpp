#include "trainer/schedule.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace omnivl {

Paradigm parse_paradigm(const std::string& s) {
    if (s == "decoupled") return Paradigm::decoupled;
    if (s == "image_only") return Paradigm::image_only;
    if (s == "video_only") return Paradigm::video_only;
    if (s == "joint_scratch") return Paradigm::joint_scratch;
    if (s == "img2vid") return Paradigm::img2vid;
    throw ConfigError("unknown paradigm: " + s +
                      " (expected decoupled|image_only|video_only|joint_scratch|img2vid)");
}

const char* paradigm_name(Paradigm p) {
    switch (p) {
        case Paradigm::decoupled: return "decoupled";
        case Paradigm::image_only: return "image_only";
        case Paradigm::video_only: return "video_only";
        case Paradigm::joint_scratch: return "joint_scratch";
        default: return "img2vid";
    }
}

std::vector<StageConfig> ScheduleConfig::stages() const {
    StageConfig s1 = stage1;
    StageConfig s2 = stage2;
    s1.name = "stage1";
    s2.name = "stage2";
    switch (paradigm) {
        case Paradigm::decoupled:
            s1.use_image = true, s1.use_video = false;
            s2.use_image = true, s2.use_video = true;
            break;
        case Paradigm::image_only:
            s1.use_image = true, s1.use_video = false;
            s2.use_image = true, s2.use_video = false;
            break;
        case Paradigm::video_only:
            s1.use_image = false, s1.use_video = true;
            s2.use_image = false, s2.use_video = true;
            break;
        case Paradigm::joint_scratch:
            s1.use_image = true, s1.use_video = true;
            s2.use_image = true, s2.use_video = true;
            break;
        case Paradigm::img2vid:
            s1.use_image = true, s1.use_video = false;
            s2.use_image = false, s2.use_video = true;
            break;
    }
    return {s1, s2};
}

namespace {

// shuffled sample-id stream for one (stage, modality); reshuffles per cycle
class Stream {
public:
    Stream(std::vector<size_t> ids, i64 batch, uint64_t seed, i64 stage, Modality mod)
        : ids_(std::move(ids)), batch_(batch), seed_(seed), stage_(stage), mod_(mod) {
        reshuffle();
    }

    i64 batches_per_epoch() const {
        return std::max<i64>(1, static_cast<i64>(ids_.size()) / batch_);
    }

    std::vector<size_t> next() {
        const i64 take = std::min<i64>(batch_, static_cast<i64>(ids_.size()));
        if (pos_ + take > static_cast<i64>(order_.size())) {
            ++cycle_;
            reshuffle();
        }
        std::vector<size_t> out(order_.begin() + pos_, order_.begin() + pos_ + take);
        pos_ += take;
        return out;
    }

private:
    void reshuffle() {
        order_ = ids_;
        Rng rng = subseed_rng(seed_, "stream",
                              Rng::mix(static_cast<uint64_t>(stage_ * 2 + (mod_ == Modality::video)),
                                       static_cast<uint64_t>(cycle_)));
        rng.shuffle(order_);
        pos_ = 0;
    }

    std::vector<size_t> ids_;
    std::vector<size_t> order_;
    i64 batch_;
    uint64_t seed_;
    i64 stage_;
    Modality mod_;
    i64 cycle_ = 0;
    i64 pos_ = 0;
};

}  // namespace

std::vector<BatchPlan> plan_batches(const ScheduleConfig& cfg, const Corpus& corpus,
                                    uint64_t seed) {
    std::vector<BatchPlan> plan;
    const auto stages = cfg.stages();
    for (size_t si = 0; si < stages.size(); ++si) {
        const StageConfig& st = stages[si];
        const auto img_ids = corpus.indices("train", Modality::image);
        const auto vid_ids = corpus.indices("train", Modality::video);
        if (st.use_image && img_ids.empty())
            throw ConfigError(st.name + " needs image data but the corpus has none");
        if (st.use_video && vid_ids.empty())
            throw ConfigError(st.name + " needs video data but the corpus has none");

        std::optional<Stream> img, vid;
        if (st.use_image)
            img.emplace(img_ids, st.batch_image, seed, static_cast<i64>(si), Modality::image);
        if (st.use_video)
            vid.emplace(vid_ids, st.batch_video, seed, static_cast<i64>(si), Modality::video);

        i64 total;
        if (st.steps > 0) {
            total = st.steps;
        } else if (st.use_image && st.use_video) {
            total = st.epochs * 2 * std::max(img->batches_per_epoch(), vid->batches_per_epoch());
        } else if (st.use_image) {
            total = st.epochs * img->batches_per_epoch();
        } else {
            total = st.epochs * vid->batches_per_epoch();
        }

        for (i64 step = 0; step < total; ++step) {
            BatchPlan bp;
            bp.stage = static_cast<i64>(si);
            bp.stage_name = st.name;
            bp.step_in_stage = step;
            if (st.use_image && st.use_video)
                bp.modality = step % 2 == 0 ? Modality::image : Modality::video;  // image first
            else
                bp.modality = st.use_image ? Modality::image : Modality::video;
            bp.sample_ids = bp.modality == Modality::image ? img->next() : vid->next();
            plan.push_back(std::move(bp));
        }
    }
    return plan;
}

double lr_at(i64 step_in_stage, i64 stage_total_steps, const StageConfig& stage) {
    if (step_in_stage < 0) throw ArgError("lr_at: negative step");
    const i64 w = stage.warmup_steps;
    if (w > 0 && step_in_stage < w)
        return stage.peak_lr * static_cast<double>(step_in_stage) / static_cast<double>(w);
    const i64 last = stage_total_steps - 1;
    if (last <= w) return stage.peak_lr;
    const double f = std::min(1.0, static_cast<double>(step_in_stage - w) /
                                       static_cast<double>(last - w));
    return stage.peak_lr * (1.0 - (1.0 - stage.decay_rate) * f);
}

}  // namespace omnivl
