#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "core/tensor.hpp"

namespace omnivl {

// Closed toy vocabulary: lowercase whitespace tokens collected from the
// corpus, plus the special markers. Serialized one token per line, line
// number = id.
class Vocabulary {
public:
    static constexpr const char* kCls = "[CLS]";
    static constexpr const char* kEnc = "[ENC]";
    static constexpr const char* kDec = "[DEC]";
    static constexpr const char* kEos = "[EOS]";
    static constexpr const char* kPad = "[PAD]";

    static Vocabulary build(const std::vector<std::string>& texts);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    static Vocabulary from_lines(std::vector<std::string> lines);
    std::string to_text() const;

    i64 size() const { return static_cast<i64>(tokens_.size()); }
    const std::string& token(i64 id) const { return tokens_[static_cast<size_t>(id)]; }
    i64 id_of(const std::string& tok) const;  // -1 when unknown

    i64 cls_id() const { return cls_; }
    i64 enc_id() const { return enc_; }
    i64 dec_id() const { return dec_; }
    i64 eos_id() const { return eos_; }
    i64 pad_id() const { return pad_; }
    bool is_special(i64 id) const;

private:
    void index_specials();

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, i64> ids_;
    i64 cls_ = -1, enc_ = -1, dec_ = -1, eos_ = -1, pad_ = -1;
};

std::vector<std::string> split_words(const std::string& text);  // lowercase, whitespace

// Batched token matrix with validity mask; position 0 carries the
// task marker ([CLS]/[ENC]/[DEC] depending on the consumer).
struct TokenSequence {
    i64 batch = 0, len = 0;
    std::vector<i64> ids;      // [batch*len]
    std::vector<double> mask;  // [batch*len], 1 = real token

    i64 id(i64 b, i64 l) const { return ids[static_cast<size_t>(b * len + l)]; }
    double m(i64 b, i64 l) const { return mask[static_cast<size_t>(b * len + l)]; }

    // replaces position 0 of every row (CLS -> ENC/DEC)
    TokenSequence with_first(i64 token_id) const;
    std::vector<std::vector<double>> mask_rows() const;
};

// [CLS] + words, truncated to len, padded with [PAD].
TokenSequence tokenize_text(const std::string& text, const Vocabulary& vocab, i64 len);
// [DEC] + words + [EOS], the teacher-forcing layout for generation targets.
TokenSequence lm_sequence(const std::string& text, const Vocabulary& vocab, i64 len);
TokenSequence stack(const std::vector<TokenSequence>& rows);

}  // namespace omnivl
