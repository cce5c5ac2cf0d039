#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace mabsa {

// Every special token the framework uses, in the fixed registry order that
// assigns them the lowest vocabulary ids. The order is part of the on-disk
// contract: checkpoints and serialized vocabularies depend on it.
namespace tok {
inline constexpr int kImg = 0;       // <img>
inline constexpr int kImgEnd = 1;    // </img>
inline constexpr int kBos = 2;       // <bos>
inline constexpr int kEos = 3;       // <eos>
inline constexpr int kMask = 4;      // <mask>
inline constexpr int kMlm = 5;       // <mlm>
inline constexpr int kAoe = 6;       // <aoe>
inline constexpr int kMrm = 7;       // <mrm>
inline constexpr int kAog = 8;       // <aog>
inline constexpr int kMsp = 9;       // <msp>
inline constexpr int kAesc = 10;     // <aesc>
inline constexpr int kMate = 11;     // <mate>
inline constexpr int kMasc = 12;     // <masc>
inline constexpr int kZero = 13;     // <zero>
inline constexpr int kFeat = 14;     // <feat>
inline constexpr int kSep = 15;      // <sep>
inline constexpr int kPos = 16;      // <POS>
inline constexpr int kNeu = 17;      // <NEU>
inline constexpr int kNeg = 18;      // <NEG>
inline constexpr int kUnk = 19;      // <unk>
inline constexpr int kSpecialCount = 20;
}  // namespace tok

const std::vector<std::string>& special_token_strings();

// Tokenized text: vocabulary ids aligned with the original surface forms.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<std::string> surface;
    std::size_t length() const { return surface.size(); }
};

// Whitespace tokenizer that peels leading/trailing punctuation off each
// chunk as separate tokens. Word-level by construction; position indices in
// target sequences refer to these tokens.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
public:
    Vocabulary() = default;

    static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_freq);
    static Vocabulary from_tokens(std::vector<std::string> id_to_token);  // specials included

    int id_of(const std::string& token) const;  // <unk> for unknown words
    const std::string& token_of(int id) const;  // IndexError when out of range
    std::size_t size() const { return id_to_token_.size(); }
    bool frozen() const { return frozen_; }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;
    TokenSequence encode_text(const std::string& text) const;

    // One token per line, line number = id.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
    void freeze();

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    bool frozen_ = false;
};

}  // namespace mabsa
