#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "model/visual_encoder.hpp"

namespace omnivl {

enum class Modality { image, video };

inline const char* modality_name(Modality m) { return m == Modality::image ? "image" : "video"; }

// One corpus sample: visual data x, label id y, text t. Labeled data shares
// y and the templated t across a class; caption data gets fresh ids.
struct Triplet {
    std::string source;      // payload path; empty when frames are inline
    Tensor frames;           // [T, H, W, C]
    i64 y = -1;
    std::string text;
    std::string class_name;  // empty for caption records
    Modality modality = Modality::image;
    std::string split = "train";
};

struct PromptTemplates {
    std::vector<std::string> image;
    std::vector<std::string> video;

    static PromptTemplates defaults();
    const std::vector<std::string>& for_modality(Modality m) const {
        return m == Modality::image ? image : video;
    }
};

struct Corpus {
    std::vector<Triplet> items;

    std::vector<size_t> indices(const std::string& split, std::optional<Modality> m = {}) const;
    std::vector<std::string> all_texts() const;
    i64 label_count() const;
    bool has_modality(Modality m) const;
};

// Fill the single {class} slot of a template; index cycles through the
// template list when per-epoch cycling is wanted.
std::string label_to_text(const std::string& class_name,
                          const std::vector<std::string>& templates, size_t index = 0);

// Raw little-endian float32 payload with an 8-byte header (T,H,W,C as uint16).
void save_payload(const std::string& path, const Tensor& frames);
Tensor load_payload(const std::string& path);

// Manifest: UTF-8 JSON lines with fields source, modality, exactly one of
// caption/class, optional split.
Corpus load_manifest(const std::string& path, const PromptTemplates& templates,
                     bool group_identical_captions = false);
void save_manifest(const Corpus& corpus, const std::string& out_dir);

struct SynthParams {
    uint64_t seed = 0;
    i64 n_classes = 8;
    i64 n_per_class = 8;
    i64 image_size = 16;
    i64 video_frames = 4;
    double video_fraction = 0.5;  // fraction of classes rendered as clips
    i64 eval_per_class = 0;       // extra held-out samples per class
};

// Deterministic procedurally generated corpus: each class is a colored
// geometric pattern; video classes additionally encode a motion direction.
Corpus synth_corpus(const SynthParams& p);

// Question strings used when the corpus is turned into QA pairs.
const char* qa_question(Modality m);

// Stack items (same modality and shape) into a batch of frame tensors.
VisualBatch make_visual_batch(const Corpus& corpus, const std::vector<size_t>& idx, i64 patch,
                              i64 tubelet);

}  // namespace omnivl
