#include "mabsa/labels.hpp"

#include "mabsa/error.hpp"

namespace mabsa {

const char* sentiment_name(Sentiment s) {
    switch (s) {
        case Sentiment::POS: return "POS";
        case Sentiment::NEU: return "NEU";
        case Sentiment::NEG: return "NEG";
    }
    return "?";
}

Sentiment sentiment_from_name(const std::string& s) {
    if (s == "POS") return Sentiment::POS;
    if (s == "NEU") return Sentiment::NEU;
    if (s == "NEG") return Sentiment::NEG;
    throw ValidationError("unknown sentiment label: " + s);
}

int sentiment_index(Sentiment s) { return static_cast<int>(s); }

Sentiment sentiment_from_index(int i) {
    if (i < 0 || i > 2) throw IndexError("sentiment index out of range: " + std::to_string(i));
    return static_cast<Sentiment>(i);
}

void validate_spans(const std::vector<SpanTuple>& spans, std::size_t text_len,
                    const std::string& what) {
    int prev_end = 0;
    for (const SpanTuple& s : spans) {
        if (s.start < 1 || s.end < s.start) {
            throw ValidationError(what + ": span must satisfy 1 <= start <= end (1-based span), got (" +
                                  std::to_string(s.start) + "," + std::to_string(s.end) + ")");
        }
        if (static_cast<std::size_t>(s.end) > text_len) {
            throw ValidationError(what + ": span end " + std::to_string(s.end) +
                                  " exceeds text length " + std::to_string(text_len));
        }
        if (s.start <= prev_end) {
            throw ValidationError(what + ": spans overlap or are not sorted by start");
        }
        prev_end = s.end;
    }
}

}  // namespace mabsa
