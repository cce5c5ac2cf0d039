#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mabsa {

enum class Sentiment { POS, NEU, NEG };

const char* sentiment_name(Sentiment s);             // "POS" / "NEU" / "NEG"
Sentiment sentiment_from_name(const std::string& s); // ValidationError otherwise
int sentiment_index(Sentiment s);                    // 0 / 1 / 2
Sentiment sentiment_from_index(int i);

// 1-based inclusive token span, optionally carrying a sentiment. Used both
// for gold labels and for parsed predictions.
struct SpanTuple {
    int start = 0;
    int end = 0;
    std::optional<Sentiment> sentiment;

    friend bool operator==(const SpanTuple& a, const SpanTuple& b) {
        return a.start == b.start && a.end == b.end && a.sentiment == b.sentiment;
    }
    friend bool operator<(const SpanTuple& a, const SpanTuple& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.end != b.end) return a.end < b.end;
        int as = a.sentiment ? sentiment_index(*a.sentiment) : -1;
        int bs = b.sentiment ? sentiment_index(*b.sentiment) : -1;
        return as < bs;
    }
};

// Spans sorted by start and pairwise non-overlapping; throws ValidationError
// naming `what` otherwise.
void validate_spans(const std::vector<SpanTuple>& spans, std::size_t text_len,
                    const std::string& what);

}  // namespace mabsa
