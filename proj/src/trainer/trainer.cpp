#include "trainer/trainer.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/kernels.hpp"

namespace omnivl {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string MetricsRow::to_json() const {
    std::string s = "{\"step\":" + std::to_string(step) + ",\"stage\":\"" + stage +
                    "\",\"modality\":\"" + modality + "\"";
    s += ",\"loss_total\":" + format_double(loss_total);
    s += ",\"loss_univlc\":" + format_double(loss_univlc);
    s += ",\"loss_vlm\":" + format_double(loss_vlm);
    s += ",\"loss_lm\":" + format_double(loss_lm);
    s += ",\"lr\":" + format_double(lr);
    s += "}";
    return s;
}

Trainer::Trainer(OmniVLModel& model, MomentumEncoders& momentum, const Corpus& corpus,
                 const Vocabulary& vocab, ScheduleConfig schedule, TrainOptions opt)
    : model_(model),
      momentum_(momentum),
      corpus_(corpus),
      vocab_(vocab),
      schedule_(schedule),
      options_(std::move(opt)),
      plan_(plan_batches(schedule, corpus, options_.seed)),
      stages_(schedule.stages()),
      opt_(model.registry.all()),
      state_(&model.log_tau, options_.bank_size, model.cfg.proj_dim) {
    state_.normalize_positives = options_.normalize_positives;
    momentum_.coeff = options_.momentum_coeff;
    cls_texts_.reserve(corpus_.items.size());
    lm_texts_.reserve(corpus_.items.size());
    for (const auto& item : corpus_.items) {
        cls_texts_.push_back(tokenize_text(item.text, vocab_, model_.cfg.text_len));
        lm_texts_.push_back(lm_sequence(item.text, vocab_, model_.cfg.text_len));
    }
    if (!options_.outdir.empty()) fs::create_directories(options_.outdir);
}

i64 Trainer::stage_steps(i64 stage) const {
    i64 n = 0;
    for (const auto& bp : plan_)
        if (bp.stage == stage) ++n;
    return n;
}

void Trainer::on_stage_start(i64 stage) {
    // stale embeddings from another stage distribution would poison the
    // positive sets, so the bank restarts empty
    state_.bank.reset();
    const StageConfig& st = stages_[static_cast<size_t>(stage)];
    if (st.use_video && video_ready_ == 0) {
        // video path inherits the spatially trained patch embedding
        model_.ve.inflate_video_tokenizer();
        video_ready_ = 1;
    }
    momentum_.sync_from(model_.registry);
}

void Trainer::save_now(const std::string& path) {
    CheckpointMeta meta;
    meta.global_step = global_step_;
    meta.video_ready = video_ready_;
    meta.config_text = options_.config_text;
    meta.vocab_text = vocab_.to_text();
    meta.config_hash = fnv1a(options_.config_text);
    save_checkpoint(path, model_, momentum_, opt_, state_.bank, meta);
}

void Trainer::resume(const std::string& checkpoint_path) {
    CheckpointMeta meta = load_checkpoint(checkpoint_path, model_, momentum_, opt_, state_.bank);
    global_step_ = meta.global_step;
    video_ready_ = meta.video_ready;
    current_stage_ = global_step_ > 0 ? plan_[static_cast<size_t>(global_step_ - 1)].stage : -1;
}

MetricsRow Trainer::step_once(const BatchPlan& bp) {
    const ModelConfig& cfg = model_.cfg;
    VisualBatch vb = make_visual_batch(corpus_, bp.sample_ids, cfg.patch, cfg.tubelet);
    std::vector<i64> y;
    std::vector<TokenSequence> texts;
    std::vector<TokenSequence> lm_rows;
    for (size_t id : bp.sample_ids) {
        y.push_back(corpus_.items[id].y);
        texts.push_back(cls_texts_[id]);
        lm_rows.push_back(lm_texts_[id]);
    }
    const i64 b = static_cast<i64>(bp.sample_ids.size());

    Tape tape;
    EncodedVisual enc = model_.ve.encode(tape, vb);
    const LossWeights& lw = options_.weights;

    std::vector<Var> terms;
    MetricsRow row;

    Tensor v_mom, w_mom;
    const bool contrastive = lw.lambda_univlc != 0.0;
    if (contrastive) {
        TokenSequence text_batch = stack(texts);
        EncodedText te_out = model_.te.encode(tape, text_batch);
        Var v = model_.project_visual(tape, enc.v_cls);
        Var w = model_.project_text(tape, te_out.w_cls);
        EncodedVisual enc_m = momentum_.ve.encode(tape, vb);
        EncodedText te_m = momentum_.te.encode(tape, text_batch);
        v_mom = momentum_.project_visual(tape, enc_m.v_cls)->val;
        w_mom = momentum_.project_text(tape, te_m.w_cls)->val;
        Var luni = univlc_loss(tape, v, w, y, v_mom, w_mom, state_);
        row.loss_univlc = luni->val.data[0];
        terms.push_back(ops::scale(tape, luni, lw.lambda_univlc));
    }
    if (lw.lambda_vlm != 0.0 && b >= 2) {
        Rng rng = subseed_rng(options_.seed, "vlm", static_cast<uint64_t>(global_step_));
        VlmPlan plan = make_vlm_plan(y, rng);
        Var lvlm = vlm_loss(tape, model_.ad, enc, texts, plan, vocab_);
        row.loss_vlm = lvlm->val.data[0];
        terms.push_back(ops::scale(tape, lvlm, lw.lambda_vlm));
    }
    if (lw.lambda_lm != 0.0) {
        Var llm = lm_loss(tape, model_.gd, enc, stack(lm_rows), vocab_);
        row.loss_lm = llm->val.data[0];
        terms.push_back(ops::scale(tape, llm, lw.lambda_lm));
    }

    Var total = terms.empty() ? ops::constant(tape, Tensor::scalar(0.0)) : terms[0];
    for (size_t i = 1; i < terms.size(); ++i) total = ops::add(tape, total, terms[i]);
    row.loss_total = total->val.data[0];
    if (!std::isfinite(row.loss_total))
        throw NumericError("non-finite loss at step " + std::to_string(global_step_) +
                           "; last checkpoint retained");

    const double lr = lr_at(bp.step_in_stage, stage_steps(bp.stage),
                            stages_[static_cast<size_t>(bp.stage)]);
    tape.backward(total);
    opt_.step(lr, tape.touched_params());
    opt_.zero_grad();
    momentum_.step_toward(model_.registry);
    if (contrastive) state_.bank.enqueue(v_mom, w_mom, y);

    row.step = global_step_;
    row.stage = bp.stage_name;
    row.modality = modality_name(bp.modality);
    row.lr = lr;
    return row;
}

std::vector<MetricsRow> Trainer::run() {
    std::vector<MetricsRow> out;
    std::ofstream metrics;
    if (!options_.outdir.empty()) {
        const auto mode = global_step_ > 0 ? std::ios::app : std::ios::trunc;
        metrics.open(fs::path(options_.outdir) / "metrics.jsonl", mode);
    }
    for (; global_step_ < static_cast<i64>(plan_.size());) {
        const BatchPlan& bp = plan_[static_cast<size_t>(global_step_)];
        if (bp.stage != current_stage_) {
            on_stage_start(bp.stage);
            current_stage_ = bp.stage;
        }
        MetricsRow row = step_once(bp);
        ++global_step_;
        if (options_.log_every > 0 && (row.step % options_.log_every) == 0) {
            if (metrics.is_open()) metrics << row.to_json() << "\n";
            out.push_back(std::move(row));
        }
        if (!options_.outdir.empty() && options_.checkpoint_every > 0 &&
            global_step_ % options_.checkpoint_every == 0)
            save_now((fs::path(options_.outdir) / "checkpoint.bin").string());
    }
    if (!options_.outdir.empty())
        save_now((fs::path(options_.outdir) / "checkpoint.bin").string());
    return out;
}

}  // namespace omnivl
