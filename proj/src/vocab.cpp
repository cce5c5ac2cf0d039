#include "mabsa/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "mabsa/error.hpp"

namespace mabsa {

const std::vector<std::string>& special_token_strings() {
    static const std::vector<std::string> specials = {
        "<img>", "</img>", "<bos>", "<eos>", "<mask>", "<mlm>",  "<aoe>",
        "<mrm>", "<aog>",  "<msp>", "<aesc>", "<mate>", "<masc>", "<zero>",
        "<feat>", "<sep>", "<POS>", "<NEU>",  "<NEG>",  "<unk>"};
    return specials;
}

namespace {

bool is_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// Split one whitespace-delimited chunk into leading punctuation, core, and
// trailing punctuation tokens. Interior punctuation stays attached.
void split_chunk(const std::string& chunk, std::vector<std::string>& out) {
    std::size_t begin = 0, end = chunk.size();
    std::vector<std::string> lead, trail;
    while (begin < end && is_punct(chunk[begin])) {
        lead.emplace_back(1, chunk[begin]);
        ++begin;
    }
    while (end > begin && is_punct(chunk[end - 1])) {
        trail.emplace_back(1, chunk[end - 1]);
        --end;
    }
    for (auto& t : lead) out.push_back(std::move(t));
    if (end > begin) out.push_back(chunk.substr(begin, end - begin));
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) out.push_back(std::move(*it));
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) split_chunk(text.substr(start, i - start), out);
    }
    if (out.empty()) throw ValidationError("tokenize: empty text");
    return out;
}

void Vocabulary::freeze() {
    token_to_id_.clear();
    token_to_id_.reserve(id_to_token_.size());
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], static_cast<int>(i));
        if (!inserted) throw ValidationError("vocabulary has duplicate token: " + id_to_token_[i]);
    }
    frozen_ = true;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             std::size_t min_freq) {
    if (corpus.empty()) throw ValidationError("build_vocab: empty corpus");
    std::map<std::string, std::size_t> freq;  // ordered map gives the lexicographic tie-break
    for (const auto& seq : corpus)
        for (const auto& t : seq) ++freq[t];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [t, n] : freq) {
        if (n >= min_freq) kept.emplace_back(t, n);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocabulary v;
    v.id_to_token_ = special_token_strings();
    for (auto& [t, n] : kept) v.id_to_token_.push_back(t);
    v.freeze();
    return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> id_to_token) {
    const auto& specials = special_token_strings();
    if (id_to_token.size() < specials.size()) {
        throw ValidationError("vocabulary token list is missing the special tokens");
    }
    for (std::size_t i = 0; i < specials.size(); ++i) {
        if (id_to_token[i] != specials[i]) {
            throw ValidationError("vocabulary special token order is wrong at id " +
                                  std::to_string(i));
        }
    }
    Vocabulary v;
    v.id_to_token_ = std::move(id_to_token);
    v.freeze();
    return v;
}

int Vocabulary::id_of(const std::string& token) const {
    if (!frozen_) throw UsageError("vocabulary not frozen");
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? tok::kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw IndexError("token id " + std::to_string(id) + " out of range " +
                         std::to_string(id_to_token_.size()));
    }
    return id_to_token_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id_of(t));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(token_of(id));
    return out;
}

TokenSequence Vocabulary::encode_text(const std::string& text) const {
    TokenSequence seq;
    seq.surface = tokenize(text);
    seq.ids = encode(seq.surface);
    return seq;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot open vocabulary file for writing: " + path);
    for (const auto& t : id_to_token_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open vocabulary file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return from_tokens(std::move(tokens));
}

}  // namespace mabsa
