#pragma once

#include <string>
#include <vector>

#include "mabsa/labels.hpp"

namespace mabsa {

// Dictionary of opinion words/phrases (up to 3 tokens) with polarity tags.
// Matching is case-insensitive. File format: one "phrase<TAB>polarity" per
// line.
class OpinionLexicon {
public:
    void add(const std::string& phrase, Sentiment polarity);
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    // Longest-match polarity lookup on a lowercased token window; returns
    // matched length (0 = no match).
    std::size_t match(const std::vector<std::string>& lowered, std::size_t pos,
                      Sentiment* polarity_out) const;

    void save(const std::string& path) const;
    static OpinionLexicon load(const std::string& path);

    struct Entry {
        std::vector<std::string> tokens;  // lowercased
        Sentiment polarity;
    };
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
};

// Set of entity phrases standing in for a NER system. Matching is
// case-sensitive. File format: one phrase per line.
class AspectGazetteer {
public:
    void add(const std::string& phrase);
    std::size_t size() const { return phrases_.size(); }
    bool empty() const { return phrases_.empty(); }

    std::size_t match(const std::vector<std::string>& tokens, std::size_t pos) const;

    void save(const std::string& path) const;
    static AspectGazetteer load(const std::string& path);

    const std::vector<std::vector<std::string>>& phrases() const { return phrases_; }

private:
    std::vector<std::vector<std::string>> phrases_;
};

// Ordered list of adjective-noun pair strings; index = line number in the
// resource file.
class AnpVocabulary {
public:
    void add(const std::string& pair);
    std::size_t size() const { return pairs_.size(); }
    const std::string& pair(std::size_t i) const;
    const std::vector<std::string>& pairs() const { return pairs_; }

    void save(const std::string& path) const;
    static AnpVocabulary load(const std::string& path);

private:
    std::vector<std::string> pairs_;
};

// Left-to-right longest-match, non-overlapping scans. Spans returned are
// 1-based inclusive and sorted by start.
std::vector<SpanTuple> extract_opinions(const std::vector<std::string>& tokens,
                                        const OpinionLexicon& lexicon);
std::vector<SpanTuple> extract_aspects(const std::vector<std::string>& tokens,
                                       const AspectGazetteer& gazetteer);

// Argmax of the distribution (ties to the lowest index), tokenized into the
// ANP's surface tokens.
std::vector<std::string> select_anp(const std::vector<double>& dist, const AnpVocabulary& anps);

}  // namespace mabsa
