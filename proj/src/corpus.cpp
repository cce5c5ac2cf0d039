#include "mabsa/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "mabsa/error.hpp"
#include "mabsa/rng.hpp"
#include "mabsa/vocab.hpp"

namespace mabsa {

using nlohmann::json;

namespace {

// Deterministic cluster mean for (class, dimension); the same rule on both
// the writing and the reading side, so seeded region storage needs no extra
// metadata.
double cluster_mean(std::size_t cls, std::size_t dim) {
    std::uint64_t bits = derive_seed(0xC1A55u, {cls, dim});
    return -1.5 + 3.0 * unit_double(bits);
}

constexpr double kRegionNoise = 0.3;

void check_distribution(const std::vector<double>& d, const std::string& what) {
    if (d.empty()) throw ValidationError(what + ": empty distribution");
    double sum = 0.0;
    for (double v : d) {
        if (!(v >= 0.0)) throw ValidationError(what + ": negative or non-finite entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ValidationError(what + ": distribution sums to " + std::to_string(sum) +
                              ", expected 1");
    }
}

std::vector<SpanTuple> spans_from_json(const json& arr, const std::string& what,
                                       bool sentiment_allowed) {
    std::vector<SpanTuple> out;
    for (const auto& item : arr) {
        if (!item.is_array() || item.size() < 2 || item.size() > 3 || !item[0].is_number_integer() ||
            !item[1].is_number_integer()) {
            throw ValidationError(what + ": each entry must be [start,end] or [start,end,sentiment]");
        }
        SpanTuple s;
        s.start = item[0].get<int>();
        s.end = item[1].get<int>();
        if (item.size() == 3) {
            if (!sentiment_allowed) {
                throw ValidationError(what + ": sentiment not allowed here");
            }
            s.sentiment = sentiment_from_name(item[2].get<std::string>());
        }
        out.push_back(s);
    }
    return out;
}

json spans_to_json(const std::vector<SpanTuple>& spans, bool with_sentiment) {
    json arr = json::array();
    for (const SpanTuple& s : spans) {
        json item = json::array({s.start, s.end});
        if (with_sentiment && s.sentiment) item.push_back(sentiment_name(*s.sentiment));
        arr.push_back(item);
    }
    return arr;
}

}  // namespace

std::size_t MultimodalExample::feature_dim() const {
    if (const auto* vecs = std::get_if<std::vector<std::vector<double>>>(&regions)) {
        return vecs->empty() ? 0 : (*vecs)[0].size();
    }
    return std::get<RegionSeed>(regions).dim;
}

void validate_example(const MultimodalExample& ex, const std::string& where) {
    std::vector<std::string> toks;
    try {
        toks = tokenize(ex.text);
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": text: " + e.what());
    }
    const std::size_t T = toks.size();
    if (ex.region_class_dists.empty()) {
        throw ValidationError(where + ": region_class_dists: at least one region required");
    }
    std::size_t K = ex.region_class_dists[0].size();
    for (std::size_t i = 0; i < ex.region_class_dists.size(); ++i) {
        const auto& d = ex.region_class_dists[i];
        if (d.size() != K) {
            throw ValidationError(where + ": region_class_dists: inconsistent class count");
        }
        check_distribution(d, where + ": region_class_dists[" + std::to_string(i) + "]");
    }
    if (const auto* vecs = std::get_if<std::vector<std::vector<double>>>(&ex.regions)) {
        if (vecs->size() != ex.region_class_dists.size()) {
            throw ValidationError(where + ": regions: count differs from region_class_dists");
        }
        std::size_t dim = vecs->empty() ? 0 : (*vecs)[0].size();
        if (dim == 0) throw ValidationError(where + ": regions: empty feature vector");
        for (const auto& v : *vecs) {
            if (v.size() != dim) {
                throw ValidationError(where + ": regions: inconsistent feature_dim");
            }
            for (double x : v) {
                if (!std::isfinite(x)) {
                    throw ValidationError(where + ": regions: non-finite feature value");
                }
            }
        }
    } else if (std::get<RegionSeed>(ex.regions).dim == 0) {
        throw ValidationError(where + ": regions: seeded storage needs dim >= 1");
    }
    if (ex.aspects) {
        try {
            validate_spans(*ex.aspects, T, "aspects");
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    if (ex.opinions) {
        try {
            validate_spans(*ex.opinions, T, "opinions");
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    if (ex.anp_dist) check_distribution(*ex.anp_dist, where + ": anp_dist");
}

std::vector<std::vector<double>> materialize_regions(const MultimodalExample& ex) {
    if (const auto* vecs = std::get_if<std::vector<std::vector<double>>>(&ex.regions)) {
        return *vecs;
    }
    const RegionSeed& rs = std::get<RegionSeed>(ex.regions);
    std::vector<std::vector<double>> out;
    out.reserve(ex.region_count());
    for (std::size_t i = 0; i < ex.region_count(); ++i) {
        const auto& dist = ex.region_class_dists[i];
        std::size_t cls = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        auto rng = make_rng(rs.seed, {i});
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> vec(rs.dim);
        for (std::size_t j = 0; j < rs.dim; ++j) {
            vec[j] = cluster_mean(cls, j) + kRegionNoise * gauss(rng);
        }
        out.push_back(std::move(vec));
    }
    return out;
}

void Corpus::refresh_stats() {
    feature_dim = region_count = class_count = anp_count = 0;
    for (const auto& ex : examples) {
        feature_dim = std::max(feature_dim, ex.feature_dim());
        region_count = std::max(region_count, ex.region_count());
        if (!ex.region_class_dists.empty()) {
            class_count = std::max(class_count, ex.region_class_dists[0].size());
        }
        if (ex.anp_dist) anp_count = std::max(anp_count, ex.anp_dist->size());
    }
}

MultimodalExample example_from_json(const std::string& line, const std::string& where) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw LoadError(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw LoadError(where + ": expected a JSON object");
    MultimodalExample ex;
    try {
        if (!j.contains("text") || !j["text"].is_string()) {
            throw ValidationError("text: required string field");
        }
        ex.text = j["text"].get<std::string>();
        if (!j.contains("regions")) throw ValidationError("regions: required field");
        if (j["regions"].is_object()) {
            RegionSeed rs;
            rs.seed = j["regions"].value("seed", std::uint64_t{0});
            rs.dim = j["regions"].value("dim", std::size_t{0});
            ex.regions = rs;
        } else if (j["regions"].is_array()) {
            ex.regions = j["regions"].get<std::vector<std::vector<double>>>();
        } else {
            throw ValidationError("regions: expected array of vectors or {seed,dim}");
        }
        if (!j.contains("region_class_dists")) {
            throw ValidationError("region_class_dists: required field");
        }
        ex.region_class_dists = j["region_class_dists"].get<std::vector<std::vector<double>>>();
        if (j.contains("sentiment")) {
            ex.sentiment = sentiment_from_name(j["sentiment"].get<std::string>());
        }
        if (j.contains("aspects")) ex.aspects = spans_from_json(j["aspects"], "aspects", true);
        if (j.contains("opinions")) ex.opinions = spans_from_json(j["opinions"], "opinions", false);
        if (j.contains("anp_dist")) ex.anp_dist = j["anp_dist"].get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw LoadError(where + ": " + e.what());
    } catch (const ValidationError& e) {
        throw LoadError(where + ": " + e.what());
    }
    try {
        validate_example(ex, where);
    } catch (const ValidationError& e) {
        throw LoadError(e.what());
    }
    return ex;
}

std::string example_to_json(const MultimodalExample& ex) {
    json j;
    j["text"] = ex.text;
    if (const auto* vecs = std::get_if<std::vector<std::vector<double>>>(&ex.regions)) {
        j["regions"] = *vecs;
    } else {
        const RegionSeed& rs = std::get<RegionSeed>(ex.regions);
        j["regions"] = json{{"seed", rs.seed}, {"dim", rs.dim}};
    }
    j["region_class_dists"] = ex.region_class_dists;
    if (ex.sentiment) j["sentiment"] = sentiment_name(*ex.sentiment);
    if (ex.aspects) j["aspects"] = spans_to_json(*ex.aspects, true);
    if (ex.opinions) j["opinions"] = spans_to_json(*ex.opinions, false);
    if (ex.anp_dist) j["anp_dist"] = *ex.anp_dist;
    return j.dump();
}

Corpus load_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open corpus file: " + path);
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        corpus.examples.push_back(example_from_json(line, "line " + std::to_string(lineno)));
        const MultimodalExample& ex = corpus.examples.back();
        const std::string where = "line " + std::to_string(lineno);
        if (corpus.examples.size() == 1) {
            corpus.feature_dim = ex.feature_dim();
            corpus.region_count = ex.region_count();
            corpus.class_count = ex.region_class_dists[0].size();
        } else {
            if (ex.feature_dim() != corpus.feature_dim) {
                throw LoadError(where + ": regions: feature_dim differs from earlier lines");
            }
            if (ex.region_count() != corpus.region_count) {
                throw LoadError(where + ": regions: region count differs from earlier lines");
            }
            if (ex.region_class_dists[0].size() != corpus.class_count) {
                throw LoadError(where + ": region_class_dists: class count differs from earlier lines");
            }
        }
        if (ex.anp_dist) {
            if (corpus.anp_count == 0) {
                corpus.anp_count = ex.anp_dist->size();
            } else if (ex.anp_dist->size() != corpus.anp_count) {
                throw LoadError(where + ": anp_dist: size differs from earlier lines");
            }
        }
    }
    return corpus;
}

void save_jsonl(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot open corpus file for writing: " + path);
    for (const auto& ex : corpus.examples) out << example_to_json(ex) << '\n';
}

// ---------------------------------------------------------------------------
// synthetic corpus

namespace {

void validate_config(const SyntheticConfig& cfg) {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("synthetic config: " + msg);
    };
    need(cfg.vocab_size >= 1, "vocab_size must be >= 1");
    need(cfg.class_count >= 1, "class_count must be >= 1");
    need(cfg.anp_count >= 1, "anp_count must be >= 1");
    need(cfg.region_count >= 1, "region_count must be >= 1");
    need(cfg.feature_dim >= 1, "feature_dim must be >= 1");
    need(cfg.example_count >= 1, "example_count must be >= 1");
    need(cfg.gazetteer_size >= 1, "gazetteer_size must be >= 1");
    need(cfg.lexicon_per_polarity >= 1, "lexicon_per_polarity must be >= 1");
    need(cfg.sent_len_min >= 1 && cfg.sent_len_min <= cfg.sent_len_max,
         "sentence length range is empty");
    need(cfg.aspects_min <= cfg.aspects_max, "aspects range is empty");
    need(cfg.opinions_min <= cfg.opinions_max, "opinions range is empty");
    double mix = cfg.sentiment_mix[0] + cfg.sentiment_mix[1] + cfg.sentiment_mix[2];
    need(cfg.sentiment_mix[0] >= 0 && cfg.sentiment_mix[1] >= 0 && cfg.sentiment_mix[2] >= 0 &&
             std::abs(mix - 1.0) <= 1e-6,
         "sentiment_mix must be a distribution");
    // Worst case: every aspect is a 2-token phrase, every opinion 1 token,
    // one filler gap between consecutive planted units.
    std::size_t units = cfg.aspects_max + cfg.opinions_max;
    std::size_t worst = cfg.aspects_max * 2 + cfg.opinions_max + (units > 0 ? units - 1 : 0);
    need(worst <= cfg.sent_len_max, "spans longer than sentence: raise sent_len_max");
}

class WordForge {
public:
    explicit WordForge(std::mt19937_64& rng) : rng_(rng) {}

    std::string fresh() {
        static const char* cons[] = {"b", "d", "f", "g", "h", "j", "k", "l", "m",
                                     "n", "p", "r", "s", "t", "v", "w", "z"};
        static const char* vow[] = {"a", "e", "i", "o", "u"};
        for (int attempt = 0; attempt < 1000; ++attempt) {
            std::size_t syllables = 2 + (rng_() % 2);
            std::string w;
            for (std::size_t s = 0; s < syllables; ++s) {
                w += cons[rng_() % 17];
                w += vow[rng_() % 5];
            }
            if (used_.insert(w).second) return w;
        }
        throw ConfigError("synthetic config: pseudo-word pool exhausted");
    }

private:
    std::mt19937_64& rng_;
    std::unordered_set<std::string> used_;
};

std::string capitalize(std::string w) {
    if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
    return v[rng() % v.size()];
}

std::size_t pick_range(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return lo + (hi > lo ? rng() % (hi - lo + 1) : 0);
}

}  // namespace

SynthResult synth_generate(const SyntheticConfig& cfg) {
    validate_config(cfg);
    SynthResult out;

    auto rng_res = make_rng(cfg.seed, {0});
    WordForge forge(rng_res);

    std::vector<std::string> fillers;
    for (std::size_t i = 0; i < cfg.vocab_size; ++i) fillers.push_back(forge.fresh());

    // Lexicon: single-token entries, polarity round-robin.
    std::vector<std::vector<std::string>> opinion_by_pol(3);
    for (std::size_t i = 0; i < 3 * cfg.lexicon_per_polarity; ++i) {
        std::string w = forge.fresh();
        Sentiment pol = sentiment_from_index(static_cast<int>(i % 3));
        out.lexicon.add(w, pol);
        opinion_by_pol[i % 3].push_back(w);
    }

    // Gazetteer: 1-2 token capitalized phrases over a dedicated base pool.
    std::vector<std::string> entity_base;
    for (std::size_t i = 0; i < 2 * cfg.gazetteer_size; ++i) {
        entity_base.push_back(capitalize(forge.fresh()));
    }
    std::vector<std::vector<std::string>> phrases;
    std::set<std::vector<std::string>> phrase_set;
    while (phrases.size() < cfg.gazetteer_size) {
        std::vector<std::string> p;
        if (unit_double(rng_res()) < 0.6) {
            p = {pick(rng_res, entity_base), pick(rng_res, entity_base)};
            if (p[0] == p[1]) continue;
        } else {
            p = {pick(rng_res, entity_base)};
        }
        if (!phrase_set.insert(p).second) continue;
        phrases.push_back(p);
        std::string joined = p[0];
        for (std::size_t k = 1; k < p.size(); ++k) joined += " " + p[k];
        out.gazetteer.add(joined);
    }
    std::unordered_map<std::string, std::vector<std::size_t>> head_to_phrases;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        head_to_phrases[phrases[i].back()].push_back(i);
    }
    std::vector<std::string> heads;
    for (const auto& [h, idx] : head_to_phrases) heads.push_back(h);
    std::sort(heads.begin(), heads.end());

    // ANP entries: (opinion adjective, gazetteer head), polarity round-robin.
    struct AnpEntry {
        std::string adj, noun;
        Sentiment pol;
    };
    std::vector<AnpEntry> anp_entries;
    std::vector<std::vector<std::size_t>> anp_by_pol(3);
    std::set<std::pair<std::string, std::string>> anp_set;
    std::size_t attempts = 0;
    while (anp_entries.size() < cfg.anp_count && attempts < 100000) {
        ++attempts;
        Sentiment pol = sentiment_from_index(static_cast<int>(anp_entries.size() % 3));
        AnpEntry e{pick(rng_res, opinion_by_pol[sentiment_index(pol)]), pick(rng_res, heads), pol};
        if (!anp_set.insert({e.adj, e.noun}).second) continue;
        anp_by_pol[sentiment_index(pol)].push_back(anp_entries.size());
        out.anps.add(e.adj + " " + e.noun);
        anp_entries.push_back(std::move(e));
    }
    if (anp_entries.size() < cfg.anp_count) {
        throw ConfigError("synthetic config: anp_count too large for lexicon/gazetteer sizes");
    }

    // Examples.
    for (std::size_t idx = 0; idx < cfg.example_count; ++idx) {
        auto rng = make_rng(cfg.seed, {1, idx});
        MultimodalExample ex;

        double u = unit_double(rng());
        int s_idx = u < cfg.sentiment_mix[0] ? 0 : (u < cfg.sentiment_mix[0] + cfg.sentiment_mix[1] ? 1 : 2);
        Sentiment s = sentiment_from_index(s_idx);

        std::size_t n_opinions = pick_range(rng, cfg.opinions_min, cfg.opinions_max);
        std::size_t n_aspects = pick_range(rng, cfg.aspects_min, cfg.aspects_max);
        n_aspects = std::min(n_aspects, phrases.size());

        const std::vector<std::size_t>& pol_anps =
            anp_by_pol[s_idx].empty() ? anp_by_pol[(s_idx + 1) % 3] : anp_by_pol[s_idx];
        std::size_t anp_index = pol_anps[rng() % pol_anps.size()];
        const AnpEntry& anp = anp_entries[anp_index];

        // Aspect phrases: tie the first one to the ANP noun when any opinion
        // is planted, so the image signal names something in the text.
        std::vector<std::size_t> aspect_ids;
        std::set<std::size_t> aspect_used;
        if (n_aspects > 0 && n_opinions > 0) {
            const auto& cands = head_to_phrases[anp.noun];
            std::size_t pid = cands[rng() % cands.size()];
            aspect_ids.push_back(pid);
            aspect_used.insert(pid);
        }
        while (aspect_ids.size() < n_aspects) {
            std::size_t pid = rng() % phrases.size();
            if (!aspect_used.insert(pid).second) continue;
            aspect_ids.push_back(pid);
        }

        std::vector<std::string> opinion_words;
        if (n_opinions > 0) {
            opinion_words.push_back(anp.adj);
            const auto& pool = opinion_by_pol[s_idx];
            std::set<std::string> used(opinion_words.begin(), opinion_words.end());
            while (opinion_words.size() < n_opinions && used.size() < pool.size()) {
                const std::string& w = pick(rng, pool);
                if (used.insert(w).second) opinion_words.push_back(w);
            }
        }

        // Planted units in random order with at least one filler between
        // consecutive units, so weak extraction recovers spans exactly.
        struct Unit {
            std::vector<std::string> toks;
            bool is_aspect;
        };
        std::vector<Unit> units;
        for (std::size_t pid : aspect_ids) units.push_back({phrases[pid], true});
        for (const auto& w : opinion_words) units.push_back({{w}, false});
        std::shuffle(units.begin(), units.end(), rng);

        std::size_t planted = 0;
        for (const Unit& unit : units) planted += unit.toks.size();
        std::size_t min_len = planted + (units.empty() ? 0 : units.size() - 1);
        std::size_t length = std::max(pick_range(rng, cfg.sent_len_min, cfg.sent_len_max), min_len);
        if (length > cfg.sent_len_max) {
            // Can only happen if a draw forces more content than sent_len_max.
            throw ConfigError("synthetic config: spans longer than sentence");
        }

        std::vector<std::size_t> gap(units.size() + 1, 0);
        for (std::size_t gi = 1; gi < units.size(); ++gi) gap[gi] = 1;
        std::size_t extra = length - min_len;
        for (std::size_t e = 0; e < extra; ++e) ++gap[rng() % gap.size()];

        std::vector<std::string> toks;
        std::vector<SpanTuple> aspects, opinions;
        for (std::size_t gi = 0; gi <= units.size(); ++gi) {
            for (std::size_t f = 0; f < gap[gi]; ++f) toks.push_back(pick(rng, fillers));
            if (gi == units.size()) break;
            SpanTuple span;
            span.start = static_cast<int>(toks.size() + 1);
            for (const auto& t : units[gi].toks) toks.push_back(t);
            span.end = static_cast<int>(toks.size());
            if (units[gi].is_aspect) {
                span.sentiment = s;
                aspects.push_back(span);
            } else {
                opinions.push_back(span);
            }
        }
        auto by_start = [](const SpanTuple& a, const SpanTuple& b) { return a.start < b.start; };
        std::sort(aspects.begin(), aspects.end(), by_start);
        std::sort(opinions.begin(), opinions.end(), by_start);

        std::string text;
        for (std::size_t t = 0; t < toks.size(); ++t) {
            if (t) text += ' ';
            text += toks[t];
        }
        ex.text = text;
        ex.sentiment = s;
        ex.aspects = aspects;
        ex.opinions = opinions;

        std::vector<double> anp_dist(cfg.anp_count, 0.0);
        if (cfg.anp_count == 1) {
            anp_dist[0] = 1.0;
        } else {
            for (double& v : anp_dist) v = 0.18 / static_cast<double>(cfg.anp_count - 1);
            anp_dist[anp_index] = 0.82;
        }
        ex.anp_dist = std::move(anp_dist);

        // Regions: a sentiment-linked scene class dominates the image.
        std::vector<std::size_t> scene_classes;
        for (std::size_t k = 0; k < cfg.class_count; ++k) {
            if (static_cast<int>(k % 3) == s_idx) scene_classes.push_back(k);
        }
        if (scene_classes.empty()) {
            for (std::size_t k = 0; k < cfg.class_count; ++k) scene_classes.push_back(k);
        }
        std::size_t scene = scene_classes[rng() % scene_classes.size()];
        for (std::size_t r = 0; r < cfg.region_count; ++r) {
            std::size_t cls = unit_double(rng()) < 0.75 ? scene : rng() % cfg.class_count;
            std::vector<double> dist(cfg.class_count, 0.0);
            if (cfg.class_count == 1) {
                dist[0] = 1.0;
            } else {
                for (double& v : dist) v = 0.15 / static_cast<double>(cfg.class_count - 1);
                dist[cls] = 0.85;
            }
            ex.region_class_dists.push_back(std::move(dist));
        }
        RegionSeed rs{rng(), cfg.feature_dim};
        if (cfg.explicit_regions) {
            MultimodalExample probe = ex;
            probe.regions = rs;
            ex.regions = materialize_regions(probe);
        } else {
            ex.regions = rs;
        }

        validate_example(ex, "synthetic example " + std::to_string(idx));
        out.corpus.examples.push_back(std::move(ex));
    }
    out.corpus.refresh_stats();
    return out;
}

SplitResult split(const Corpus& corpus, const std::array<double, 3>& fractions,
                  std::uint64_t seed) {
    double sum = fractions[0] + fractions[1] + fractions[2];
    if (fractions[0] < 0 || fractions[1] < 0 || fractions[2] < 0 || std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be nonnegative and sum to 1");
    }
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, {0x5f117});
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t n = corpus.size();
    std::size_t n_train = static_cast<std::size_t>(std::floor(fractions[0] * n));
    std::size_t n_dev = static_cast<std::size_t>(std::floor(fractions[1] * n));
    if (n_train + n_dev > n) n_dev = n - n_train;

    SplitResult res;
    auto copy_stats = [&](Corpus& c) {
        c.feature_dim = corpus.feature_dim;
        c.region_count = corpus.region_count;
        c.class_count = corpus.class_count;
        c.anp_count = corpus.anp_count;
    };
    copy_stats(res.train);
    copy_stats(res.dev);
    copy_stats(res.test);
    for (std::size_t i = 0; i < n; ++i) {
        const MultimodalExample& ex = corpus.examples[order[i]];
        if (i < n_train) {
            res.train.examples.push_back(ex);
        } else if (i < n_train + n_dev) {
            res.dev.examples.push_back(ex);
        } else {
            res.test.examples.push_back(ex);
        }
    }
    return res;
}

}  // namespace mabsa
