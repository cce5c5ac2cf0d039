#include "mabsa/weak_label.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "mabsa/error.hpp"
#include "mabsa/vocab.hpp"

namespace mabsa {

namespace {

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

void OpinionLexicon::add(const std::string& phrase, Sentiment polarity) {
    std::vector<std::string> toks = tokenize(phrase);  // throws on empty
    if (toks.size() > 3) {
        throw ValidationError("lexicon phrase longer than 3 tokens: " + phrase);
    }
    for (auto& t : toks) t = lower(t);
    entries_.push_back({std::move(toks), polarity});
}

std::size_t OpinionLexicon::match(const std::vector<std::string>& lowered, std::size_t pos,
                                  Sentiment* polarity_out) const {
    std::size_t best = 0;
    for (const Entry& e : entries_) {
        if (e.tokens.size() <= best) continue;
        if (pos + e.tokens.size() > lowered.size()) continue;
        bool ok = true;
        for (std::size_t k = 0; k < e.tokens.size(); ++k) {
            if (lowered[pos + k] != e.tokens[k]) {
                ok = false;
                break;
            }
        }
        if (ok) {
            best = e.tokens.size();
            if (polarity_out) *polarity_out = e.polarity;
        }
    }
    return best;
}

void OpinionLexicon::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write lexicon: " + path);
    for (const Entry& e : entries_) {
        for (std::size_t k = 0; k < e.tokens.size(); ++k) {
            if (k) out << ' ';
            out << e.tokens[k];
        }
        out << '\t' << sentiment_name(e.polarity) << '\n';
    }
}

OpinionLexicon OpinionLexicon::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open lexicon: " + path);
    OpinionLexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw LoadError("lexicon line " + std::to_string(lineno) + ": missing tab separator");
        }
        lex.add(line.substr(0, tab), sentiment_from_name(line.substr(tab + 1)));
    }
    return lex;
}

void AspectGazetteer::add(const std::string& phrase) {
    phrases_.push_back(tokenize(phrase));  // throws on empty
}

std::size_t AspectGazetteer::match(const std::vector<std::string>& tokens, std::size_t pos) const {
    std::size_t best = 0;
    for (const auto& p : phrases_) {
        if (p.size() <= best) continue;
        if (pos + p.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (tokens[pos + k] != p[k]) {
                ok = false;
                break;
            }
        }
        if (ok) best = p.size();
    }
    return best;
}

void AspectGazetteer::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write gazetteer: " + path);
    for (const auto& p : phrases_) {
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (k) out << ' ';
            out << p[k];
        }
        out << '\n';
    }
}

AspectGazetteer AspectGazetteer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open gazetteer: " + path);
    AspectGazetteer gaz;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) gaz.add(line);
    }
    return gaz;
}

void AnpVocabulary::add(const std::string& pair) {
    if (tokenize(pair).size() < 2) {
        throw ValidationError("ANP entry must have at least 2 tokens: " + pair);
    }
    pairs_.push_back(pair);
}

const std::string& AnpVocabulary::pair(std::size_t i) const {
    if (i >= pairs_.size()) throw IndexError("ANP index out of range: " + std::to_string(i));
    return pairs_[i];
}

void AnpVocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write ANP vocabulary: " + path);
    for (const auto& p : pairs_) out << p << '\n';
}

AnpVocabulary AnpVocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open ANP vocabulary: " + path);
    AnpVocabulary anps;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) anps.add(line);
    }
    return anps;
}

std::vector<SpanTuple> extract_opinions(const std::vector<std::string>& tokens,
                                        const OpinionLexicon& lexicon) {
    std::vector<std::string> lowered;
    lowered.reserve(tokens.size());
    for (const auto& t : tokens) lowered.push_back(lower(t));
    std::vector<SpanTuple> spans;
    std::size_t i = 0;
    while (i < tokens.size()) {
        Sentiment pol = Sentiment::NEU;
        std::size_t len = lexicon.match(lowered, i, &pol);
        if (len > 0) {
            SpanTuple s;
            s.start = static_cast<int>(i + 1);
            s.end = static_cast<int>(i + len);
            s.sentiment = pol;
            spans.push_back(s);
            i += len;
        } else {
            ++i;
        }
    }
    return spans;
}

std::vector<SpanTuple> extract_aspects(const std::vector<std::string>& tokens,
                                       const AspectGazetteer& gazetteer) {
    std::vector<SpanTuple> spans;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t len = gazetteer.match(tokens, i);
        if (len > 0) {
            spans.push_back({static_cast<int>(i + 1), static_cast<int>(i + len), std::nullopt});
            i += len;
        } else {
            ++i;
        }
    }
    return spans;
}

std::vector<std::string> select_anp(const std::vector<double>& dist, const AnpVocabulary& anps) {
    if (dist.size() != anps.size()) {
        throw DimensionError("ANP distribution size " + std::to_string(dist.size()) +
                             " does not match vocabulary size " + std::to_string(anps.size()));
    }
    double sum = 0.0;
    for (double v : dist) sum += v;
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ValidationError("ANP distribution does not sum to 1");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i) {
        if (dist[i] > dist[best]) best = i;  // strict: ties keep the lowest index
    }
    return tokenize(anps.pair(best));
}

}  // namespace mabsa
