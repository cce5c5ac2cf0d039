#include "mabsa/task_codec.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "mabsa/error.hpp"
#include "mabsa/rng.hpp"

namespace mabsa {

const char* task_name(Task t) {
    switch (t) {
        case Task::MLM: return "mlm";
        case Task::AOE: return "aoe";
        case Task::MRM: return "mrm";
        case Task::AOG: return "aog";
        case Task::MSP: return "msp";
        case Task::JMASA: return "jmasa";
        case Task::MATE: return "mate";
        case Task::MASC: return "masc";
    }
    return "?";
}

Task task_from_name(const std::string& name) {
    for (Task t : {Task::MLM, Task::AOE, Task::MRM, Task::AOG, Task::MSP, Task::JMASA, Task::MATE,
                   Task::MASC}) {
        if (name == task_name(t)) return t;
    }
    throw ValidationError("unknown task: " + name);
}

int task_token(Task t) {
    switch (t) {
        case Task::MLM: return tok::kMlm;
        case Task::AOE: return tok::kAoe;
        case Task::MRM: return tok::kMrm;
        case Task::AOG: return tok::kAog;
        case Task::MSP: return tok::kMsp;
        case Task::JMASA: return tok::kAesc;
        case Task::MATE: return tok::kMate;
        case Task::MASC: return tok::kMasc;
    }
    throw UsageError("task_token: bad task");
}

bool is_pointer_task(Task t) {
    return t == Task::AOE || t == Task::JMASA || t == Task::MATE || t == Task::MASC;
}

bool is_downstream_task(Task t) {
    return t == Task::JMASA || t == Task::MATE || t == Task::MASC;
}

const std::vector<int>& candidate_specials(Task t) {
    static const std::vector<int> aoe = {tok::kSep, tok::kEos};
    static const std::vector<int> downstream = {tok::kPos, tok::kNeu, tok::kNeg, tok::kEos};
    if (t == Task::AOE) return aoe;
    if (is_downstream_task(t)) return downstream;
    throw UsageError(std::string("no pointer candidates for task ") + task_name(t));
}

// ---------------------------------------------------------------------------
// masking

MaskedText mask_text(const std::vector<int>& ids, double rate, std::uint64_t seed,
                     const Vocabulary& vocab) {
    if (ids.empty()) throw ValidationError("mask_text: empty token sequence");
    MaskedText out;
    out.original = ids;
    out.corrupted = ids;
    auto rng = make_rng(seed, {0x3a5c});
    const std::size_t regular = vocab.size() - tok::kSpecialCount;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (unit_double(rng()) >= rate) continue;
        out.positions.push_back(i);
        double v = unit_double(rng());
        if (v < 0.8 || regular == 0) {
            out.corrupted[i] = tok::kMask;
        } else if (v < 0.9) {
            out.corrupted[i] = tok::kSpecialCount + static_cast<int>(rng() % regular);
        }  // else: keep the original token
    }
    return out;
}

bool RegionMaskPlan::is_masked(std::size_t i) const {
    return std::binary_search(masked.begin(), masked.end(), i);
}

RegionMaskPlan mask_regions(std::size_t region_count, double rate, std::uint64_t seed) {
    if (region_count == 0) throw ValidationError("mask_regions: no regions");
    RegionMaskPlan plan;
    plan.region_count = region_count;
    auto rng = make_rng(seed, {0x4e61});
    for (std::size_t i = 0; i < region_count; ++i) {
        if (unit_double(rng()) < rate) plan.masked.push_back(i);
    }
    if (plan.masked.empty()) {
        plan.masked.push_back(rng() % region_count);
    }
    return plan;
}

// ---------------------------------------------------------------------------
// target builders

TargetSequence build_aoe_target(const std::vector<SpanTuple>& aspects,
                                const std::vector<SpanTuple>& opinions) {
    validate_spans(aspects, static_cast<std::size_t>(-1), "aspects");
    validate_spans(opinions, static_cast<std::size_t>(-1), "opinions");
    TargetSequence seq;
    seq.task = Task::AOE;
    for (const SpanTuple& a : aspects) {
        seq.items.push_back(TargetItem::position(a.start));
        seq.items.push_back(TargetItem::position(a.end));
    }
    seq.items.push_back(TargetItem::special_token(tok::kSep));
    for (const SpanTuple& o : opinions) {
        seq.items.push_back(TargetItem::position(o.start));
        seq.items.push_back(TargetItem::position(o.end));
    }
    seq.items.push_back(TargetItem::special_token(tok::kEos));
    return seq;
}

namespace {

int sentiment_token(Sentiment s) {
    switch (s) {
        case Sentiment::POS: return tok::kPos;
        case Sentiment::NEU: return tok::kNeu;
        case Sentiment::NEG: return tok::kNeg;
    }
    throw UsageError("bad sentiment");
}

bool is_sentiment_token(int id) {
    return id == tok::kPos || id == tok::kNeu || id == tok::kNeg;
}

Sentiment sentiment_from_token(int id) {
    if (id == tok::kPos) return Sentiment::POS;
    if (id == tok::kNeu) return Sentiment::NEU;
    return Sentiment::NEG;
}

}  // namespace

TargetSequence build_downstream_target(Task task, const std::vector<SpanTuple>& tuples) {
    if (!is_downstream_task(task)) {
        throw UsageError(std::string("build_downstream_target: not a downstream task: ") +
                         task_name(task));
    }
    validate_spans(tuples, static_cast<std::size_t>(-1), "tuples");
    TargetSequence seq;
    seq.task = task;
    for (const SpanTuple& t : tuples) {
        seq.items.push_back(TargetItem::position(t.start));
        seq.items.push_back(TargetItem::position(t.end));
        if (task != Task::MATE) {
            if (!t.sentiment) {
                throw ValidationError(std::string("sentiment missing for ") + task_name(task) +
                                      " tuple");
            }
            seq.items.push_back(TargetItem::special_token(sentiment_token(*t.sentiment)));
        }
    }
    seq.items.push_back(TargetItem::special_token(tok::kEos));
    return seq;
}

// ---------------------------------------------------------------------------
// parsing

namespace {

void dedup(std::vector<SpanTuple>& tuples) {
    std::set<SpanTuple> seen;
    std::vector<SpanTuple> out;
    for (const SpanTuple& t : tuples) {
        if (seen.insert(t).second) out.push_back(t);
    }
    tuples = std::move(out);
}

// Pair/triple scanner shared by the AOE phases and the downstream tasks.
// Returns the index one past the consumed region; sets `terminated` when the
// stop token was seen.
std::size_t scan_tuples(const std::vector<TargetItem>& items, std::size_t begin, int stop_token,
                        bool with_sentiment, std::vector<SpanTuple>& out, ParseReport& report,
                        bool* terminated) {
    *terminated = false;
    std::size_t i = begin;
    while (i < items.size()) {
        const TargetItem& first = items[i];
        if (first.kind == TargetItem::Kind::Special) {
            if (first.special == stop_token) {
                *terminated = true;
                return i + 1;
            }
            report = {false, "invalid item at position " + std::to_string(i)};
            return i;
        }
        if (first.pointer < 1) {
            report = {false, "non-positive index at position " + std::to_string(i)};
            return i;
        }
        if (i + 1 >= items.size()) {
            report = {false, "dangling index"};
            return i;
        }
        const TargetItem& second = items[i + 1];
        if (second.kind != TargetItem::Kind::Pointer || second.pointer < first.pointer) {
            report = {false, "dangling index"};
            return i;
        }
        SpanTuple t;
        t.start = first.pointer;
        t.end = second.pointer;
        if (with_sentiment) {
            if (i + 2 >= items.size() || items[i + 2].kind != TargetItem::Kind::Special ||
                !is_sentiment_token(items[i + 2].special)) {
                report = {false, "missing sentiment token"};
                return i;
            }
            t.sentiment = sentiment_from_token(items[i + 2].special);
            i += 3;
        } else {
            i += 2;
        }
        out.push_back(t);
    }
    report = {false, "missing terminator"};
    return i;
}

}  // namespace

ParsedTarget parse_target(Task task, const std::vector<TargetItem>& items) {
    ParsedTarget result;
    bool terminated = false;
    std::size_t consumed = 0;
    switch (task) {
        case Task::AOE: {
            consumed = scan_tuples(items, 0, tok::kSep, false, result.aspects, result.report,
                                   &terminated);
            if (terminated) {
                result.report = {};  // defect-free so far; scan phase 2
                consumed = scan_tuples(items, consumed, tok::kEos, false, result.opinions,
                                       result.report, &terminated);
            } else if (result.report.defect == "missing terminator") {
                result.report = {false, "missing separator"};
            }
            break;
        }
        case Task::JMASA:
        case Task::MASC:
            consumed =
                scan_tuples(items, 0, tok::kEos, true, result.aspects, result.report, &terminated);
            break;
        case Task::MATE:
            consumed =
                scan_tuples(items, 0, tok::kEos, false, result.aspects, result.report, &terminated);
            break;
        default:
            throw UsageError(std::string("parse_target: not a pointer task: ") + task_name(task));
    }
    if (result.report.valid && consumed < items.size()) {
        result.report = {false, "content after terminator"};
    }
    dedup(result.aspects);
    dedup(result.opinions);
    return result;
}

// ---------------------------------------------------------------------------
// decoding grammar

namespace {

struct GrammarState {
    enum Phase { TupleStart, AfterStart, AfterEnd, OpinionTupleStart, OpinionAfterStart, Done };
    Phase phase = TupleStart;
    int start_index = 0;  // valid in AfterStart / OpinionAfterStart
};

GrammarState scan_prefix(Task task, const std::vector<TargetItem>& prefix) {
    GrammarState st;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        const TargetItem& it = prefix[i];
        auto bad = [&]() -> UsageError {
            return UsageError("ungrammatical prefix at position " + std::to_string(i));
        };
        if (st.phase == GrammarState::Done) throw bad();
        switch (st.phase) {
            case GrammarState::TupleStart:
                if (it.kind == TargetItem::Kind::Pointer) {
                    if (it.pointer < 1) throw bad();
                    st.phase = GrammarState::AfterStart;
                    st.start_index = it.pointer;
                } else if (task == Task::AOE && it.special == tok::kSep) {
                    st.phase = GrammarState::OpinionTupleStart;
                } else if (task != Task::AOE && it.special == tok::kEos) {
                    st.phase = GrammarState::Done;
                } else {
                    throw bad();
                }
                break;
            case GrammarState::AfterStart:
                if (it.kind != TargetItem::Kind::Pointer || it.pointer < st.start_index) throw bad();
                st.phase = (task == Task::MATE || task == Task::AOE) ? GrammarState::TupleStart
                                                                     : GrammarState::AfterEnd;
                break;
            case GrammarState::AfterEnd:
                if (it.kind != TargetItem::Kind::Special || !is_sentiment_token(it.special)) {
                    throw bad();
                }
                st.phase = GrammarState::TupleStart;
                break;
            case GrammarState::OpinionTupleStart:
                if (it.kind == TargetItem::Kind::Pointer) {
                    if (it.pointer < 1) throw bad();
                    st.phase = GrammarState::OpinionAfterStart;
                    st.start_index = it.pointer;
                } else if (it.special == tok::kEos) {
                    st.phase = GrammarState::Done;
                } else {
                    throw bad();
                }
                break;
            case GrammarState::OpinionAfterStart:
                if (it.kind != TargetItem::Kind::Pointer || it.pointer < st.start_index) throw bad();
                st.phase = GrammarState::OpinionTupleStart;
                break;
            case GrammarState::Done:
                throw bad();
        }
    }
    return st;
}

}  // namespace

std::vector<bool> valid_next_mask(Task task, const std::vector<TargetItem>& prefix, std::size_t T,
                                  const std::vector<SpanTuple>* masc_spans) {
    if (!is_pointer_task(task)) {
        throw UsageError(std::string("valid_next_mask: not a pointer task: ") + task_name(task));
    }
    const auto& specials = candidate_specials(task);
    std::vector<bool> mask(T + specials.size(), false);
    auto allow_special = [&](int id) {
        for (std::size_t i = 0; i < specials.size(); ++i) {
            if (specials[i] == id) mask[T + i] = true;
        }
    };

    if (task == Task::MASC) {
        if (!masc_spans) throw UsageError("valid_next_mask: MASC requires gold spans");
        std::size_t idx = prefix.size();
        std::size_t tuple = idx / 3, slot = idx % 3;
        // Prefix must match the forced layout.
        for (std::size_t i = 0; i < idx; ++i) {
            std::size_t ti = i / 3, si = i % 3;
            if (ti >= masc_spans->size()) throw UsageError("ungrammatical prefix: past gold spans");
            const SpanTuple& g = (*masc_spans)[ti];
            const TargetItem& it = prefix[i];
            bool ok = (si == 0)   ? it == TargetItem::position(g.start)
                      : (si == 1) ? it == TargetItem::position(g.end)
                                  : (it.kind == TargetItem::Kind::Special &&
                                     is_sentiment_token(it.special));
            if (!ok) throw UsageError("ungrammatical prefix at position " + std::to_string(i));
        }
        if (tuple >= masc_spans->size()) {
            allow_special(tok::kEos);
            return mask;
        }
        const SpanTuple& g = (*masc_spans)[tuple];
        if (slot == 0) {
            if (g.start >= 1 && static_cast<std::size_t>(g.start) <= T) mask[g.start - 1] = true;
        } else if (slot == 1) {
            if (g.end >= 1 && static_cast<std::size_t>(g.end) <= T) mask[g.end - 1] = true;
        } else {
            allow_special(tok::kPos);
            allow_special(tok::kNeu);
            allow_special(tok::kNeg);
        }
        return mask;
    }

    GrammarState st = scan_prefix(task, prefix);
    switch (st.phase) {
        case GrammarState::TupleStart:
            for (std::size_t p = 0; p < T; ++p) mask[p] = true;
            if (task == Task::AOE) {
                allow_special(tok::kSep);
            } else {
                allow_special(tok::kEos);
            }
            break;
        case GrammarState::AfterStart:
        case GrammarState::OpinionAfterStart:
            for (std::size_t p = static_cast<std::size_t>(st.start_index) - 1; p < T; ++p) {
                mask[p] = true;
            }
            break;
        case GrammarState::AfterEnd:
            allow_special(tok::kPos);
            allow_special(tok::kNeu);
            allow_special(tok::kNeg);
            break;
        case GrammarState::OpinionTupleStart:
            for (std::size_t p = 0; p < T; ++p) mask[p] = true;
            allow_special(tok::kEos);
            break;
        case GrammarState::Done:
            throw UsageError("valid_next_mask: prefix already terminated");
    }
    return mask;
}

std::size_t candidate_index(Task task, const TargetItem& item, std::size_t T) {
    if (item.kind == TargetItem::Kind::Pointer) {
        if (item.pointer < 1 || static_cast<std::size_t>(item.pointer) > T) {
            throw IndexError("pointer index " + std::to_string(item.pointer) +
                             " out of range for T=" + std::to_string(T));
        }
        return static_cast<std::size_t>(item.pointer) - 1;
    }
    const auto& specials = candidate_specials(task);
    for (std::size_t i = 0; i < specials.size(); ++i) {
        if (specials[i] == item.special) return T + i;
    }
    throw IndexError("special token not in this task's candidate set");
}

TargetItem item_from_candidate(Task task, std::size_t index, std::size_t T) {
    if (index < T) return TargetItem::position(static_cast<int>(index) + 1);
    const auto& specials = candidate_specials(task);
    if (index - T >= specials.size()) {
        throw IndexError("candidate index " + std::to_string(index) + " out of range");
    }
    return TargetItem::special_token(specials[index - T]);
}

// ---------------------------------------------------------------------------
// serialization

namespace {

const char* special_json_name(int id) {
    switch (id) {
        case tok::kSep: return "SEP";
        case tok::kEos: return "EOS";
        case tok::kPos: return "POS";
        case tok::kNeu: return "NEU";
        case tok::kNeg: return "NEG";
        default: throw ValidationError("special token not serializable in targets");
    }
}

int special_from_json_name(const std::string& s) {
    if (s == "SEP") return tok::kSep;
    if (s == "EOS") return tok::kEos;
    if (s == "POS") return tok::kPos;
    if (s == "NEU") return tok::kNeu;
    if (s == "NEG") return tok::kNeg;
    throw ValidationError("unknown special token in target: " + s);
}

}  // namespace

std::string target_to_json(const TargetSequence& seq) {
    nlohmann::json arr = nlohmann::json::array();
    for (const TargetItem& it : seq.items) {
        if (it.kind == TargetItem::Kind::Pointer) {
            arr.push_back(it.pointer);
        } else {
            arr.push_back(special_json_name(it.special));
        }
    }
    return arr.dump();
}

TargetSequence target_from_json(Task task, const std::string& text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("target sequence: malformed JSON: ") + e.what());
    }
    if (!arr.is_array()) throw LoadError("target sequence: expected a JSON array");
    TargetSequence seq;
    seq.task = task;
    for (const auto& v : arr) {
        if (v.is_number_integer()) {
            seq.items.push_back(TargetItem::position(v.get<int>()));
        } else if (v.is_string()) {
            seq.items.push_back(TargetItem::special_token(special_from_json_name(v.get<std::string>())));
        } else {
            throw LoadError("target sequence: items must be integers or special-token strings");
        }
    }
    return seq;
}

}  // namespace mabsa
