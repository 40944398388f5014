#include "trainer/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>

namespace omnivl {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

namespace {

Tensor labels_to_tensor(const std::vector<i64>& labels) {
    Tensor t({static_cast<i64>(labels.size())});
    for (size_t i = 0; i < labels.size(); ++i) t.data[i] = static_cast<double>(labels[i]);
    return t;
}

std::vector<i64> tensor_to_labels(const Tensor& t) {
    std::vector<i64> out(static_cast<size_t>(t.numel()));
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<i64>(t.data[i]);
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const OmniVLModel& model,
                     const MomentumEncoders& momentum, const AdamW& opt, const MemoryBank& bank,
                     const CheckpointMeta& meta) {
    ArrayStore st;
    model.registry.save_values(st, "param.");
    momentum.registry.save_values(st, "mom.");
    opt.save(st);
    st.put("bank.visual", bank.visual_vecs());
    st.put("bank.text", bank.text_vecs());
    st.put("bank.labels", labels_to_tensor(bank.labels()));
    st.put_scalar("bank.cursor", static_cast<double>(bank.write_cursor()));
    st.put_scalar("bank.filled", static_cast<double>(bank.filled()));
    st.put_scalar("state.global_step", static_cast<double>(meta.global_step));
    st.put_scalar("state.video_ready", static_cast<double>(meta.video_ready));
    st.text["config"] = meta.config_text;
    st.text["vocab"] = meta.vocab_text;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, meta.config_hash);
    st.text["config_hash"] = buf;
    st.save(path);
}

CheckpointMeta load_checkpoint(const std::string& path, OmniVLModel& model,
                               MomentumEncoders& momentum, AdamW& opt, MemoryBank& bank) {
    ArrayStore st = ArrayStore::load(path);
    model.registry.load_values(st, "param.");
    momentum.registry.load_values(st, "mom.");
    opt.load(st);
    bank.restore(st.get("bank.visual"), st.get("bank.text"),
                 tensor_to_labels(st.get("bank.labels")),
                 static_cast<i64>(st.get_scalar("bank.cursor")),
                 static_cast<i64>(st.get_scalar("bank.filled")));
    CheckpointMeta meta;
    meta.global_step = static_cast<i64>(st.get_scalar("state.global_step"));
    meta.video_ready = static_cast<i64>(st.get_scalar("state.video_ready"));
    meta.config_text = st.text.at("config");
    meta.vocab_text = st.text.at("vocab");
    meta.config_hash = std::strtoull(st.text.at("config_hash").c_str(), nullptr, 16);
    return meta;
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    ArrayStore st = ArrayStore::load(path);
    CheckpointInfo info;
    info.config_text = st.text.at("config");
    info.vocab_text = st.text.at("vocab");
    info.global_step = static_cast<i64>(st.get_scalar("state.global_step"));
    return info;
}

void load_model_weights(const std::string& path, OmniVLModel& model) {
    ArrayStore st = ArrayStore::load(path);
    model.registry.load_values(st, "param.");
}

}  // namespace omnivl
