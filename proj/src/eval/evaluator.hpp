#pragma once

#include <functional>
#include <string>
#include <vector>

#include "corpus/corpus.hpp"
#include "model/omnivl.hpp"
#include "trainer/trainer.hpp"

namespace omnivl {

struct RetrievalDirection {
    double r1 = 0, r5 = 0, r10 = 0;
    std::vector<std::vector<size_t>> ranked;  // per query: positions into the item list
};

struct RetrievalResult {
    RetrievalDirection t2v;
    RetrievalDirection v2t;
};

// Cached per-item encodings used by retrieval and the oracles.
struct ItemEmbeddings {
    std::vector<Tensor> vis_tokens;  // encoder token matrix per item [N_i, D]
    Tensor vis_proj;                 // [n, proj_dim], unit rows
    Tensor txt_proj;                 // [n, proj_dim], unit rows
    std::vector<TokenSequence> texts;
    std::vector<i64> labels;
};

ItemEmbeddings embed_items(OmniVLModel& model, const Corpus& corpus,
                           const std::vector<size_t>& idx, const Vocabulary& vocab);

// p_vlm of (text_i, visual_j) for all j in candidates, one batched pass
std::vector<double> vlm_scores(OmniVLModel& model, const ItemEmbeddings& emb, size_t text_i,
                               const std::vector<size_t>& candidates, const Vocabulary& vocab);

// Two-stage retrieval: cosine shortlist of size k, re-ranked by pairwise VLM
// probability; positions beyond k keep their cosine order. A retrieved item
// counts as a hit when it carries the query's label.
RetrievalResult retrieve(OmniVLModel& model, const Corpus& corpus, const std::vector<size_t>& idx,
                         const Vocabulary& vocab, i64 k);

struct ProbeResult {
    double accuracy = 0;
    bool frozen_encoder = true;
};

// Multinomial logistic regression on fixed feature rows.
ProbeResult linear_probe(const Tensor& features, const std::vector<i64>& labels,
                         const std::vector<size_t>& train_idx,
                         const std::vector<size_t>& eval_idx, uint64_t seed);

// Extract frozen v_cls features and probe them; asserts the encoder is
// untouched byte for byte.
ProbeResult probe_encoder(OmniVLModel& model, const Corpus& corpus,
                          const std::vector<size_t>& train_idx,
                          const std::vector<size_t>& eval_idx, uint64_t seed);

// Corpus-level BLEU with uniform 4-gram weights and brevity penalty.
double bleu4(const std::vector<std::string>& candidates,
             const std::vector<std::string>& references);

struct CaptionEval {
    double bleu = 0;
    double exact = 0;  // fraction reproduced verbatim
    std::vector<std::string> generated;
};

CaptionEval caption_eval(OmniVLModel& model, const Corpus& corpus,
                         const std::vector<size_t>& idx, const Vocabulary& vocab,
                         const GenerationConfig& base_cfg, bool modality_prefix = true);

struct QaEval {
    double accuracy = 0;
    std::vector<std::string> answers;
};

QaEval qa_eval(OmniVLModel& model, const Corpus& corpus, const std::vector<size_t>& idx,
               const Vocabulary& vocab, i64 max_len = 8);

// Short answer-generation fine-tune through the QA rearrangement.
void qa_finetune(OmniVLModel& model, const Corpus& corpus, const std::vector<size_t>& idx,
                 const Vocabulary& vocab, i64 steps, double lr, i64 batch, uint64_t seed);

struct AblationRow {
    std::string paradigm;
    bool has_image_tasks = true;
    double img_tr1 = 0, img_ir1 = 0, vid_ir1 = 0, caption_b4 = 0, qa_img = 0, qa_vid = 0;
};

struct AblationTable {
    std::vector<AblationRow> rows;
    std::string formatted() const;
};

struct AblationConfig {
    ModelConfig model;
    ScheduleConfig schedule;  // paradigm field is overridden per row
    TrainOptions train;
    i64 eval_k = 128;
    i64 qa_steps = 40;
    double qa_lr = 1e-3;
    i64 qa_batch = 8;
};

// Trains every paradigm with the same budget and seed and evaluates each on
// the held-out split.
AblationTable ablate_paradigms(const Corpus& corpus, const Vocabulary& vocab,
                               const AblationConfig& cfg);

}  // namespace omnivl
