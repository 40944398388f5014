#include "corpus/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "core/error.hpp"

namespace omnivl {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.image = {"a picture of a {class}", "a photo of a {class}", "an image of a {class}"};
    t.video = {"a video of a {class}", "a video clip of a {class}", "a recording of a {class}"};
    return t;
}

std::vector<size_t> Corpus::indices(const std::string& split, std::optional<Modality> m) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (!split.empty() && items[i].split != split) continue;
        if (m && items[i].modality != *m) continue;
        out.push_back(i);
    }
    return out;
}

std::vector<std::string> Corpus::all_texts() const {
    std::vector<std::string> out;
    out.reserve(items.size() + 2);
    for (const auto& it : items) out.push_back(it.text);
    out.push_back(qa_question(Modality::image));
    out.push_back(qa_question(Modality::video));
    return out;
}

i64 Corpus::label_count() const {
    i64 mx = -1;
    for (const auto& it : items) mx = std::max(mx, it.y);
    return mx + 1;
}

bool Corpus::has_modality(Modality m) const {
    for (const auto& it : items)
        if (it.modality == m) return true;
    return false;
}

std::string label_to_text(const std::string& class_name,
                          const std::vector<std::string>& templates, size_t index) {
    if (templates.empty()) throw ArgError("label_to_text: no templates");
    if (class_name.empty()) throw ArgError("label_to_text: empty class name");
    const std::string& tpl = templates[index % templates.size()];
    const std::string slot = "{class}";
    const size_t at = tpl.find(slot);
    if (at == std::string::npos || tpl.find(slot, at + 1) != std::string::npos)
        throw ConfigError("prompt template must contain exactly one {class} slot: " + tpl);
    std::string out = tpl;
    out.replace(at, slot.size(), class_name);
    return out;
}

void save_payload(const std::string& path, const Tensor& frames) {
    if (frames.rank() != 4) throw ShapeError("payload: frames must be [T,H,W,C]");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ParseError("cannot open for writing: " + path);
    for (int i = 0; i < 4; ++i) {
        const auto v = static_cast<uint16_t>(frames.dim(i));
        const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                    static_cast<unsigned char>(v >> 8)};
        os.write(reinterpret_cast<const char*>(b), 2);
    }
    for (double d : frames.data) {
        const float f = static_cast<float>(d);
        static_assert(sizeof(float) == 4);
        os.write(reinterpret_cast<const char*>(&f), 4);
    }
}

Tensor load_payload(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open payload: " + path);
    i64 dims[4];
    for (auto& dim : dims) {
        unsigned char b[2];
        is.read(reinterpret_cast<char*>(b), 2);
        dim = static_cast<i64>(b[0]) | (static_cast<i64>(b[1]) << 8);
    }
    if (!is) throw ParseError("truncated payload header: " + path);
    Tensor t({dims[0], dims[1], dims[2], dims[3]});
    for (double& d : t.data) {
        float f;
        is.read(reinterpret_cast<char*>(&f), 4);
        d = static_cast<double>(f);
    }
    if (!is) throw ParseError("truncated payload data: " + path);
    return t;
}

Corpus load_manifest(const std::string& path, const PromptTemplates& templates,
                     bool group_identical_captions) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open manifest: " + path);
    const fs::path base = fs::path(path).parent_path();

    Corpus corpus;
    std::map<std::string, i64> class_ids;
    std::map<std::string, i64> caption_ids;
    i64 next_y = 0;
    std::string line;
    i64 lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        auto fail = [&](const std::string& msg) {
            throw ParseError("manifest line " + std::to_string(lineno) + ": " + msg);
        };
        if (!j.contains("source") || !j["source"].is_string()) fail("missing string field 'source'");
        if (!j.contains("modality") || !j["modality"].is_string())
            fail("missing string field 'modality'");
        const std::string mod = j["modality"];
        if (mod != "image" && mod != "video") fail("modality must be 'image' or 'video'");
        const bool has_caption = j.contains("caption");
        const bool has_class = j.contains("class");
        if (has_caption && has_class) fail("record has both 'caption' and 'class'");
        if (!has_caption && !has_class) fail("record needs one of 'caption' or 'class'");

        Triplet t;
        t.source = j["source"];
        t.modality = mod == "image" ? Modality::image : Modality::video;
        t.split = j.value("split", std::string("train"));
        if (has_class) {
            t.class_name = j["class"];
            auto [it, inserted] = class_ids.try_emplace(t.class_name, next_y);
            if (inserted) ++next_y;
            t.y = it->second;
            t.text = label_to_text(t.class_name, templates.for_modality(t.modality));
        } else {
            t.text = j["caption"];
            if (group_identical_captions) {
                auto [it, inserted] = caption_ids.try_emplace(t.text, next_y);
                if (inserted) ++next_y;
                t.y = it->second;
            } else {
                t.y = next_y++;  // web captions stay unique labels
            }
        }
        const fs::path payload = fs::path(t.source).is_absolute()
                                     ? fs::path(t.source)
                                     : base / t.source;
        t.frames = load_payload(payload.string());
        corpus.items.push_back(std::move(t));
    }
    return corpus;
}

void save_manifest(const Corpus& corpus, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    std::ofstream os(dir / "manifest.jsonl", std::ios::trunc);
    if (!os) throw ParseError("cannot open manifest for writing in " + out_dir);
    for (size_t i = 0; i < corpus.items.size(); ++i) {
        const Triplet& t = corpus.items[i];
        char name[32];
        std::snprintf(name, sizeof(name), "payload_%06zu.bin", i);
        save_payload((dir / name).string(), t.frames);
        ordered_json j;
        j["source"] = name;
        j["modality"] = modality_name(t.modality);
        if (!t.class_name.empty())
            j["class"] = t.class_name;
        else
            j["caption"] = t.text;
        j["split"] = t.split;
        os << j.dump() << "\n";
    }
}

namespace {

struct Palette {
    const char* name;
    double r, g, b;
};

constexpr Palette kPalette[8] = {
    {"red", 1.0, 0.1, 0.1},    {"green", 0.1, 1.0, 0.1},  {"blue", 0.1, 0.1, 1.0},
    {"yellow", 1.0, 1.0, 0.1}, {"magenta", 1.0, 0.1, 1.0}, {"cyan", 0.1, 1.0, 1.0},
    {"orange", 1.0, 0.55, 0.1}, {"teal", 0.1, 0.55, 0.55},
};

constexpr const char* kPatterns[4] = {"square", "stripes", "checker", "ring"};
constexpr const char* kDirections[4] = {"right", "left", "down", "up"};

bool pattern_hit(i64 pattern, i64 y, i64 x, i64 hw) {
    switch (pattern) {
        case 0: return y >= hw / 4 && y < 3 * hw / 4 && x >= hw / 4 && x < 3 * hw / 4;
        case 1: return (x / 2) % 2 == 0;
        case 2: return ((x / 4) + (y / 4)) % 2 == 0;
        default: {
            const i64 cy = hw / 2, cx = hw / 2;
            const i64 d = std::max(std::abs(y - cy), std::abs(x - cx));
            return d >= hw / 4 && d < 3 * hw / 8;
        }
    }
}

Tensor render(i64 cls, Modality mod, i64 hw, i64 frames, Rng& noise) {
    const Palette& col = kPalette[cls % 8];
    const i64 pattern = (cls / 8) % 4;
    const i64 dir = cls % 4;
    const i64 t = mod == Modality::image ? 1 : frames;
    Tensor out({t, hw, hw, 3});
    double* p = out.ptr();
    for (i64 ti = 0; ti < t; ++ti) {
        const i64 shift = mod == Modality::image ? 0 : 2 * ti;
        for (i64 y = 0; y < hw; ++y)
            for (i64 x = 0; x < hw; ++x) {
                i64 sy = y, sx = x;
                switch (dir) {
                    case 0: sx = (x - shift % hw + hw) % hw; break;  // moving right
                    case 1: sx = (x + shift) % hw; break;
                    case 2: sy = (y - shift % hw + hw) % hw; break;  // moving down
                    default: sy = (y + shift) % hw; break;
                }
                const bool hit = pattern_hit(pattern, sy, sx, hw);
                const double base[3] = {col.r, col.g, col.b};
                for (i64 c = 0; c < 3; ++c) {
                    double v = hit ? base[c] : 0.15 * base[c];
                    v += noise.uniform(-0.05, 0.05);
                    p[((ti * hw + y) * hw + x) * 3 + c] = std::clamp(v, 0.0, 1.0);
                }
            }
    }
    return out;
}

}  // namespace

const char* qa_question(Modality m) {
    return m == Modality::image ? "what is in the picture" : "what is in the video";
}

Corpus synth_corpus(const SynthParams& p) {
    if (p.n_classes < 1 || p.n_per_class < 1 || p.image_size < 1 || p.video_frames < 1)
        throw ArgError("synth corpus: sizes must be >= 1");
    const PromptTemplates templates = PromptTemplates::defaults();
    const i64 n_video = static_cast<i64>(p.video_fraction * static_cast<double>(p.n_classes) + 0.5);
    const i64 n_image = p.n_classes - n_video;

    Corpus corpus;
    for (i64 cls = 0; cls < p.n_classes; ++cls) {
        const Modality mod = cls < n_image ? Modality::image : Modality::video;
        std::string name = std::string(kPalette[cls % 8].name) + " " + kPatterns[(cls / 8) % 4];
        if (mod == Modality::video) name += std::string(" moving ") + kDirections[cls % 4];
        const std::string text = label_to_text(name, templates.for_modality(mod));
        const i64 total = p.n_per_class + p.eval_per_class;
        for (i64 s = 0; s < total; ++s) {
            Rng noise = subseed_rng(p.seed, "synth", static_cast<uint64_t>(cls * 100003 + s));
            Triplet t;
            t.frames = render(cls, mod, p.image_size, p.video_frames, noise);
            t.y = cls;
            t.class_name = name;
            t.text = text;
            t.modality = mod;
            t.split = s < p.n_per_class ? "train" : "eval";
            corpus.items.push_back(std::move(t));
        }
    }
    return corpus;
}

VisualBatch make_visual_batch(const Corpus& corpus, const std::vector<size_t>& idx, i64 patch,
                              i64 tubelet) {
    if (idx.empty()) throw ArgError("make_visual_batch: empty index list");
    const Tensor& first = corpus.items[idx[0]].frames;
    VisualBatch vb;
    vb.patch = patch;
    vb.tubelet = tubelet;
    vb.frames = Tensor({static_cast<i64>(idx.size()), first.dim(0), first.dim(1), first.dim(2),
                        first.dim(3)});
    const i64 stride = first.numel();
    for (size_t i = 0; i < idx.size(); ++i) {
        const Tensor& f = corpus.items[idx[i]].frames;
        if (!f.same_shape(first))
            throw ShapeError("make_visual_batch: mixed frame shapes in one batch");
        std::copy(f.data.begin(), f.data.end(),
                  vb.frames.data.begin() + static_cast<i64>(i) * stride);
    }
    return vb;
}

}  // namespace omnivl
