#include "text/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "core/error.hpp"

namespace omnivl {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
    std::set<std::string> words;
    for (const auto& t : texts)
        for (auto& w : split_words(t)) words.insert(w);
    std::vector<std::string> lines = {kCls, kEnc, kDec, kEos, kPad};
    lines.insert(lines.end(), words.begin(), words.end());
    return from_lines(std::move(lines));
}

Vocabulary Vocabulary::from_lines(std::vector<std::string> lines) {
    Vocabulary v;
    v.tokens_ = std::move(lines);
    for (size_t i = 0; i < v.tokens_.size(); ++i) {
        if (v.ids_.count(v.tokens_[i])) throw ConfigError("duplicate vocab token: " + v.tokens_[i]);
        v.ids_[v.tokens_[i]] = static_cast<i64>(i);
    }
    v.index_specials();
    return v;
}

void Vocabulary::index_specials() {
    cls_ = id_of(kCls);
    enc_ = id_of(kEnc);
    dec_ = id_of(kDec);
    eos_ = id_of(kEos);
    pad_ = id_of(kPad);
    if (cls_ < 0 || enc_ < 0 || dec_ < 0 || eos_ < 0 || pad_ < 0)
        throw ConfigError("vocabulary is missing special tokens");
}

i64 Vocabulary::id_of(const std::string& tok) const {
    auto it = ids_.find(tok);
    return it == ids_.end() ? -1 : it->second;
}

bool Vocabulary::is_special(i64 id) const {
    return id == cls_ || id == enc_ || id == dec_ || id == eos_ || id == pad_;
}

std::string Vocabulary::to_text() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    return out;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ParseError("cannot open for writing: " + path);
    os << to_text();
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return from_lines(std::move(lines));
}

TokenSequence TokenSequence::with_first(i64 token_id) const {
    TokenSequence out = *this;
    for (i64 b = 0; b < batch; ++b) {
        out.ids[static_cast<size_t>(b * len)] = token_id;
        out.mask[static_cast<size_t>(b * len)] = 1.0;
    }
    return out;
}

std::vector<std::vector<double>> TokenSequence::mask_rows() const {
    std::vector<std::vector<double>> rows(static_cast<size_t>(batch));
    for (i64 b = 0; b < batch; ++b)
        rows[static_cast<size_t>(b)] =
            std::vector<double>(mask.begin() + b * len, mask.begin() + (b + 1) * len);
    return rows;
}

namespace {
TokenSequence sequence_from(const std::vector<i64>& body, i64 len, i64 pad_id) {
    TokenSequence s;
    s.batch = 1;
    s.len = len;
    s.ids.assign(static_cast<size_t>(len), pad_id);
    s.mask.assign(static_cast<size_t>(len), 0.0);
    const i64 n = std::min<i64>(len, static_cast<i64>(body.size()));
    for (i64 i = 0; i < n; ++i) {
        s.ids[static_cast<size_t>(i)] = body[static_cast<size_t>(i)];
        s.mask[static_cast<size_t>(i)] = 1.0;
    }
    return s;
}
}  // namespace

TokenSequence tokenize_text(const std::string& text, const Vocabulary& vocab, i64 len) {
    if (vocab.size() <= 5) throw ConfigError("tokenize_text: vocabulary has no corpus tokens");
    if (len < 2) throw ArgError("tokenize_text: len must be >= 2");
    std::vector<i64> body = {vocab.cls_id()};
    for (const auto& w : split_words(text)) {
        const i64 id = vocab.id_of(w);
        if (id >= 0) body.push_back(id);  // closed vocab: unknown words are dropped
    }
    return sequence_from(body, len, vocab.pad_id());
}

TokenSequence lm_sequence(const std::string& text, const Vocabulary& vocab, i64 len) {
    if (vocab.size() <= 5) throw ConfigError("lm_sequence: vocabulary has no corpus tokens");
    if (len < 2) throw ArgError("lm_sequence: len must be >= 2");
    std::vector<i64> body = {vocab.dec_id()};
    for (const auto& w : split_words(text)) {
        const i64 id = vocab.id_of(w);
        if (id >= 0) body.push_back(id);
    }
    if (static_cast<i64>(body.size()) >= len) body.resize(static_cast<size_t>(len - 1));
    body.push_back(vocab.eos_id());
    return sequence_from(body, len, vocab.pad_id());
}

TokenSequence stack(const std::vector<TokenSequence>& rows) {
    if (rows.empty()) throw ArgError("stack: empty batch");
    TokenSequence out;
    out.batch = 0;
    out.len = rows[0].len;
    for (const auto& r : rows) {
        if (r.len != out.len) throw ShapeError("stack: mixed sequence lengths");
        out.batch += r.batch;
        out.ids.insert(out.ids.end(), r.ids.begin(), r.ids.end());
        out.mask.insert(out.mask.end(), r.mask.begin(), r.mask.end());
    }
    return out;
}

}  // namespace omnivl
