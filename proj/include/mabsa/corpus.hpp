#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mabsa/labels.hpp"
#include "mabsa/weak_label.hpp"

namespace mabsa {

// Compact alternative to storing raw region vectors: features are
// re-synthesized deterministically from (seed, dim) and the per-region class
// argmax, as class-conditioned Gaussian clusters.
struct RegionSeed {
    std::uint64_t seed = 0;
    std::size_t dim = 0;

    friend bool operator==(const RegionSeed&, const RegionSeed&) = default;
};

using RegionStorage = std::variant<std::vector<std::vector<double>>, RegionSeed>;

struct MultimodalExample {
    std::string text;
    RegionStorage regions;
    std::vector<std::vector<double>> region_class_dists;
    std::optional<Sentiment> sentiment;
    std::optional<std::vector<SpanTuple>> aspects;   // sentiment per span may be absent
    std::optional<std::vector<SpanTuple>> opinions;  // sentiment field unused
    std::optional<std::vector<double>> anp_dist;

    std::size_t region_count() const { return region_class_dists.size(); }
    std::size_t feature_dim() const;

    friend bool operator==(const MultimodalExample&, const MultimodalExample&) = default;
};

// Per-example validation against the record invariants; `where` prefixes
// error messages (e.g. "line 3").
void validate_example(const MultimodalExample& ex, const std::string& where);

// Materializes the region feature matrix (R rows of feature_dim), identical
// for both storage forms and deterministic for seeded storage.
std::vector<std::vector<double>> materialize_regions(const MultimodalExample& ex);

struct Corpus {
    std::vector<MultimodalExample> examples;
    std::size_t feature_dim = 0;
    std::size_t region_count = 0;
    std::size_t class_count = 0;
    std::size_t anp_count = 0;  // 0 when no example carries anp_dist

    std::size_t size() const { return examples.size(); }
    void refresh_stats();  // recomputes the declared dims from the examples
};

Corpus load_jsonl(const std::string& path);
void save_jsonl(const Corpus& corpus, const std::string& path);
std::string example_to_json(const MultimodalExample& ex);
MultimodalExample example_from_json(const std::string& line, const std::string& where);

struct SyntheticConfig {
    std::size_t vocab_size = 60;    // filler word pool
    std::size_t class_count = 9;    // K
    std::size_t anp_count = 24;
    std::size_t sent_len_min = 8;
    std::size_t sent_len_max = 14;
    std::size_t aspects_min = 1;
    std::size_t aspects_max = 2;
    std::size_t opinions_min = 1;
    std::size_t opinions_max = 2;
    std::size_t region_count = 36;
    std::size_t feature_dim = 24;
    std::size_t example_count = 224;
    std::size_t gazetteer_size = 20;
    std::size_t lexicon_per_polarity = 6;
    double sentiment_mix[3] = {0.45, 0.30, 0.25};  // POS, NEU, NEG
    bool explicit_regions = false;                 // write raw vectors instead of seeds
    std::uint64_t seed = 1;
};

struct SynthResult {
    Corpus corpus;
    OpinionLexicon lexicon;
    AspectGazetteer gazetteer;
    AnpVocabulary anps;
};

// Deterministic per seed. Plants aspects from the generated gazetteer and
// opinions from the generated lexicon, peaks the ANP distribution on a
// planted (opinion, aspect-head) pair, groups region classes by sentiment,
// and records the gold labels.
SynthResult synth_generate(const SyntheticConfig& cfg);

struct SplitResult {
    Corpus train, dev, test;
};

SplitResult split(const Corpus& corpus, const std::array<double, 3>& fractions,
                  std::uint64_t seed);

}  // namespace mabsa
