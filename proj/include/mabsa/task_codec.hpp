#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mabsa/labels.hpp"
#include "mabsa/vocab.hpp"

namespace mabsa {

enum class Task { MLM, AOE, MRM, AOG, MSP, JMASA, MATE, MASC };

const char* task_name(Task t);
Task task_from_name(const std::string& name);
int task_token(Task t);                 // decoder task token id, e.g. <aesc> for JMASA
bool is_pointer_task(Task t);           // AOE / JMASA / MATE / MASC
bool is_downstream_task(Task t);        // JMASA / MATE / MASC

// Specials available to the pointer head for a task, in candidate order:
// AOE -> {<sep>, <eos>}, downstream -> {<POS>, <NEU>, <NEG>, <eos>}.
const std::vector<int>& candidate_specials(Task t);

// ---------------------------------------------------------------------------
// masking

struct MaskedText {
    std::vector<int> corrupted;        // encoder input ids
    std::vector<std::size_t> positions;  // 0-based masked positions
    std::vector<int> original;         // reconstruction targets
};

// BERT-style corruption: each position selected with probability `rate`; of
// the selected, 80% -> <mask>, 10% -> random non-special vocab token, 10%
// unchanged. Deterministic per seed.
MaskedText mask_text(const std::vector<int>& ids, double rate, std::uint64_t seed,
                     const Vocabulary& vocab);

struct RegionMaskPlan {
    std::size_t region_count = 0;
    std::vector<std::size_t> masked;  // sorted, nonempty

    bool is_masked(std::size_t i) const;
};

// Bernoulli(rate) per region; when nothing is selected one region is forced,
// so the MRM loss is never an empty sum.
RegionMaskPlan mask_regions(std::size_t region_count, double rate, std::uint64_t seed);

// ---------------------------------------------------------------------------
// target sequences

struct TargetItem {
    enum class Kind { Pointer, Special };
    Kind kind = Kind::Pointer;
    int pointer = 0;   // 1-based text position when kind == Pointer
    int special = 0;   // vocabulary id when kind == Special

    static TargetItem position(int p) { return {Kind::Pointer, p, 0}; }
    static TargetItem special_token(int id) { return {Kind::Special, 0, id}; }
    friend bool operator==(const TargetItem&, const TargetItem&) = default;
};

struct TargetSequence {
    Task task = Task::AOE;
    std::vector<TargetItem> items;

    std::size_t length() const { return items.size(); }
    friend bool operator==(const TargetSequence&, const TargetSequence&) = default;
};

// [a1s,a1e,...,aMs,aMe,<sep>,o1s,o1e,...,oNs,oNe,<eos>] — length 2M+2N+2.
TargetSequence build_aoe_target(const std::vector<SpanTuple>& aspects,
                                const std::vector<SpanTuple>& opinions);

// JMASA: (start,end,sentiment)*; MATE: (start,end)*; MASC: like JMASA with
// the spans supplied at inference. All terminated by <eos>.
TargetSequence build_downstream_target(Task task, const std::vector<SpanTuple>& tuples);

struct ParseReport {
    bool valid = true;
    std::string defect;  // empty when valid
};

struct ParsedTarget {
    std::vector<SpanTuple> aspects;   // AOE: aspect spans; downstream: tuples
    std::vector<SpanTuple> opinions;  // AOE only
    ParseReport report;
};

// Total inverse of the builders: recovers the longest valid prefix of
// complete tuples from arbitrary item sequences and reports the defect.
// Duplicate tuples are removed.
ParsedTarget parse_target(Task task, const std::vector<TargetItem>& items);

// Decoding grammar: mask over the T + |candidate_specials(task)| candidates
// that keeps any greedy generation parseable. For MASC the gold spans are
// required and span slots admit exactly the forced index.
std::vector<bool> valid_next_mask(Task task, const std::vector<TargetItem>& prefix, std::size_t T,
                                  const std::vector<SpanTuple>* masc_spans = nullptr);

// Candidate-index encoding shared with the pointer head: positions 1..T map
// to 0..T-1, specials follow in candidate_specials order.
std::size_t candidate_index(Task task, const TargetItem& item, std::size_t T);
TargetItem item_from_candidate(Task task, std::size_t index, std::size_t T);

// JSON array form, e.g. [1,2,"POS",9,9,"NEU","EOS"].
std::string target_to_json(const TargetSequence& seq);
TargetSequence target_from_json(Task task, const std::string& text);

}  // namespace mabsa
