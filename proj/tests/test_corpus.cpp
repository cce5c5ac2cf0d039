#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "mabsa/corpus.hpp"
#include "mabsa/error.hpp"
#include "mabsa/vocab.hpp"
#include "mabsa/weak_label.hpp"

using namespace mabsa;

namespace {

std::string fixture(const std::string& name) {
    return std::string(TEST_FIXTURE_DIR) + "/" + name;
}

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("loads the three-example fixture") {
    Corpus c = load_jsonl(fixture("sample_corpus.jsonl"));
    REQUIRE(c.size() == 3);
    CHECK(c.feature_dim == 4);
    CHECK(c.region_count == 2);
    CHECK(c.class_count == 3);
    CHECK(c.anp_count == 4);
    CHECK(c.examples[0].sentiment == Sentiment::POS);
    REQUIRE(c.examples[0].aspects.has_value());
    CHECK((*c.examples[0].aspects)[0].start == 1);
    CHECK((*c.examples[0].aspects)[0].end == 2);
    CHECK((*c.examples[0].aspects)[0].sentiment == Sentiment::POS);
    // Seeded and explicit storage materialize to the same shape.
    for (const auto& ex : c.examples) {
        auto feats = materialize_regions(ex);
        REQUIRE(feats.size() == 2);
        CHECK(feats[0].size() == 4);
    }
}

TEST_CASE("load errors carry line and field") {
    SUBCASE("zero-based span") {
        std::string path = temp_file("mabsa_bad_span.jsonl");
        std::ofstream(path) << R"({"text": "a b", "regions": {"seed": 1, "dim": 2}, )"
                            << R"("region_class_dists": [[1.0]], "aspects": [[0, 1]]})" << "\n";
        CHECK_THROWS_WITH_AS(load_jsonl(path),
                             doctest::Contains("1-based span"), LoadError);
        try {
            load_jsonl(path);
        } catch (const LoadError& e) {
            CHECK(std::string(e.what()).find("line 1") != std::string::npos);
        }
        std::remove(path.c_str());
    }
    SUBCASE("distribution that sums to 0.8") {
        std::string path = temp_file("mabsa_bad_dist.jsonl");
        std::ofstream(path) << R"({"text": "a", "regions": {"seed": 1, "dim": 2}, )"
                            << R"("region_class_dists": [[0.4, 0.4]]})" << "\n";
        CHECK_THROWS_WITH_AS(load_jsonl(path), doctest::Contains("region_class_dists"), LoadError);
        std::remove(path.c_str());
    }
    SUBCASE("malformed JSON names the line") {
        std::string path = temp_file("mabsa_bad_json.jsonl");
        std::ofstream(path) << "{\"text\": \n";
        CHECK_THROWS_WITH_AS(load_jsonl(path), doctest::Contains("line 1"), LoadError);
        std::remove(path.c_str());
    }
}

TEST_CASE("save then load is a content-identity round trip") {
    Corpus c = load_jsonl(fixture("sample_corpus.jsonl"));
    std::string path = temp_file("mabsa_roundtrip.jsonl");
    save_jsonl(c, path);
    Corpus c2 = load_jsonl(path);
    REQUIRE(c2.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c2.examples[i] == c.examples[i]);
    // And the bytes are stable from then on.
    std::string path2 = temp_file("mabsa_roundtrip2.jsonl");
    save_jsonl(c2, path2);
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("synthetic generation") {
    SyntheticConfig cfg;
    cfg.example_count = 40;
    cfg.region_count = 4;
    cfg.feature_dim = 6;
    cfg.seed = 123;

    SUBCASE("same seed gives byte-identical corpora") {
        SynthResult a = synth_generate(cfg);
        SynthResult b = synth_generate(cfg);
        REQUIRE(a.corpus.size() == b.corpus.size());
        for (std::size_t i = 0; i < a.corpus.size(); ++i) {
            CHECK(a.corpus.examples[i] == b.corpus.examples[i]);
        }
        std::string pa = temp_file("mabsa_synth_a.jsonl"), pb = temp_file("mabsa_synth_b.jsonl");
        save_jsonl(a.corpus, pa);
        save_jsonl(b.corpus, pb);
        CHECK(slurp(pa) == slurp(pb));
        std::remove(pa.c_str());
        std::remove(pb.c_str());
    }
    SUBCASE("zero opinions per example") {
        SyntheticConfig c0 = cfg;
        c0.opinions_min = c0.opinions_max = 0;
        SynthResult r = synth_generate(c0);
        for (const auto& ex : r.corpus.examples) {
            REQUIRE(ex.opinions.has_value());
            CHECK(ex.opinions->empty());
        }
    }
    SUBCASE("gold labels agree with the generated resources") {
        SynthResult r = synth_generate(cfg);
        std::size_t recovered = 0, total = 0;
        for (const auto& ex : r.corpus.examples) {
            auto toks = tokenize(ex.text);
            auto found_ops = extract_opinions(toks, r.lexicon);
            auto found_asps = extract_aspects(toks, r.gazetteer);
            for (const auto& o : *ex.opinions) {
                ++total;
                for (const auto& f : found_ops) {
                    if (f.start == o.start && f.end == o.end) {
                        ++recovered;
                        break;
                    }
                }
            }
            for (const auto& a : *ex.aspects) {
                ++total;
                for (const auto& f : found_asps) {
                    if (f.start == a.start && f.end == a.end) {
                        ++recovered;
                        break;
                    }
                }
            }
        }
        CHECK(total > 0);
        CHECK(static_cast<double>(recovered) >= 0.99 * static_cast<double>(total));
    }
    SUBCASE("sentiment marginals track the configured mixture") {
        SyntheticConfig big = cfg;
        big.example_count = 1000;
        SynthResult r = synth_generate(big);
        std::size_t counts[3] = {0, 0, 0};
        for (const auto& ex : r.corpus.examples) counts[sentiment_index(*ex.sentiment)]++;
        for (int s = 0; s < 3; ++s) {
            double frac = static_cast<double>(counts[s]) / 1000.0;
            CHECK(std::abs(frac - big.sentiment_mix[s]) <= 0.05);
        }
    }
    SUBCASE("impossible config rejected") {
        SyntheticConfig bad = cfg;
        bad.sent_len_max = 3;
        bad.sent_len_min = 3;
        bad.aspects_max = 4;
        CHECK_THROWS_AS(synth_generate(bad), ConfigError);
        SyntheticConfig zero = cfg;
        zero.example_count = 0;
        CHECK_THROWS_AS(synth_generate(zero), ConfigError);
    }
    SUBCASE("explicit region storage matches seeded materialization") {
        SyntheticConfig ce = cfg;
        ce.explicit_regions = true;
        ce.example_count = 5;
        SyntheticConfig cs = cfg;
        cs.example_count = 5;
        SynthResult re = synth_generate(ce);
        SynthResult rs = synth_generate(cs);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(materialize_regions(re.corpus.examples[i]) ==
                  materialize_regions(rs.corpus.examples[i]));
        }
    }
}

TEST_CASE("split") {
    SyntheticConfig cfg;
    cfg.example_count = 10;
    cfg.region_count = 2;
    cfg.feature_dim = 3;
    Corpus c = synth_generate(cfg).corpus;

    SUBCASE("all-train split") {
        SplitResult r = split(c, {1.0, 0.0, 0.0}, 5);
        CHECK(r.train.size() == 10);
        CHECK(r.dev.size() == 0);
        CHECK(r.test.size() == 0);
    }
    SUBCASE("80/10/10 on ten examples") {
        SplitResult r = split(c, {0.8, 0.1, 0.1}, 5);
        CHECK(r.train.size() == 8);
        CHECK(r.dev.size() == 1);
        CHECK(r.test.size() == 1);
    }
    SUBCASE("deterministic and exhaustive") {
        SplitResult a = split(c, {0.6, 0.2, 0.2}, 9);
        SplitResult b = split(c, {0.6, 0.2, 0.2}, 9);
        CHECK(a.train.examples == b.train.examples);
        CHECK(a.dev.examples == b.dev.examples);
        CHECK(a.test.examples == b.test.examples);
        std::multiset<std::string> all;
        for (const auto& ex : a.train.examples) all.insert(ex.text);
        for (const auto& ex : a.dev.examples) all.insert(ex.text);
        for (const auto& ex : a.test.examples) all.insert(ex.text);
        std::multiset<std::string> orig;
        for (const auto& ex : c.examples) orig.insert(ex.text);
        CHECK(all == orig);
    }
    SUBCASE("bad fractions rejected") {
        CHECK_THROWS_AS(split(c, {0.5, 0.2, 0.2}, 1), ConfigError);
    }
}

TEST_SUITE_END();
