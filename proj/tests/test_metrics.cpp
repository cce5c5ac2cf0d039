#include <doctest.h>

#include <algorithm>

#include "mabsa/error.hpp"
#include "mabsa/metrics.hpp"
#include "mabsa/rng.hpp"

using namespace mabsa;

namespace {

// Independent oracle: count true positives by per-tuple comparison, no set
// machinery shared with the implementation.
struct BruteCounts {
    std::size_t tp = 0, np = 0, ng = 0;
};

BruteCounts brute_force(const std::vector<std::vector<SpanTuple>>& preds,
                        const std::vector<std::vector<SpanTuple>>& golds) {
    BruteCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::vector<SpanTuple> p, g;
        for (const SpanTuple& t : preds[i]) {
            if (std::find(p.begin(), p.end(), t) == p.end()) p.push_back(t);
        }
        for (const SpanTuple& t : golds[i]) {
            if (std::find(g.begin(), g.end(), t) == g.end()) g.push_back(t);
        }
        c.np += p.size();
        c.ng += g.size();
        for (const SpanTuple& t : p) {
            if (std::find(g.begin(), g.end(), t) != g.end()) ++c.tp;
        }
    }
    return c;
}

std::vector<SpanTuple> random_tuples(std::mt19937_64& rng, bool with_sentiment) {
    std::vector<SpanTuple> out;
    std::size_t n = rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
        SpanTuple t;
        t.start = 1 + static_cast<int>(rng() % 8);
        t.end = t.start + static_cast<int>(rng() % 3);
        if (with_sentiment) t.sentiment = sentiment_from_index(static_cast<int>(rng() % 3));
        out.push_back(t);
    }
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("micro_prf basics") {
    SUBCASE("perfect prediction") {
        std::vector<std::vector<SpanTuple>> golds = {{{1, 2, Sentiment::POS}}};
        Prf r = micro_prf(golds, golds);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
    }
    SUBCASE("published half-overlap case") {
        std::vector<std::vector<SpanTuple>> golds = {
            {{1, 2, Sentiment::POS}, {9, 9, Sentiment::NEU}}};
        std::vector<std::vector<SpanTuple>> preds = {
            {{1, 2, Sentiment::POS}, {5, 6, Sentiment::POS}}};
        Prf r = micro_prf(preds, golds);
        CHECK(r.precision == doctest::Approx(0.5));
        CHECK(r.recall == doctest::Approx(0.5));
        CHECK(r.f1 == doctest::Approx(0.5));
    }
    SUBCASE("empty prediction against nonempty gold") {
        std::vector<std::vector<SpanTuple>> golds = {{{1, 1, Sentiment::NEG}}};
        std::vector<std::vector<SpanTuple>> preds = {{}};
        Prf r = micro_prf(preds, golds);
        CHECK(r.precision == 0.0);
        CHECK(r.recall == 0.0);
        CHECK(r.f1 == 0.0);
    }
    SUBCASE("sentiment mismatch is not a match") {
        std::vector<std::vector<SpanTuple>> golds = {{{1, 2, Sentiment::POS}}};
        std::vector<std::vector<SpanTuple>> preds = {{{1, 2, Sentiment::NEG}}};
        CHECK(micro_prf(preds, golds).f1 == 0.0);
    }
    SUBCASE("misaligned inputs rejected") {
        CHECK_THROWS_AS(micro_prf({{}, {}}, {{}}), UsageError);
    }
}

TEST_CASE("micro_prf equals the brute-force oracle on random fixtures") {
    auto rng = make_rng(404);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng() % 6;
        std::vector<std::vector<SpanTuple>> preds, golds;
        for (std::size_t i = 0; i < n; ++i) {
            preds.push_back(random_tuples(rng, true));
            golds.push_back(random_tuples(rng, true));
        }
        Prf r = micro_prf(preds, golds);
        BruteCounts c = brute_force(preds, golds);
        double p = c.np ? static_cast<double>(c.tp) / c.np : 0.0;
        double rec = c.ng ? static_cast<double>(c.tp) / c.ng : 0.0;
        double f1 = (p + rec) > 0 ? 2 * p * rec / (p + rec) : 0.0;
        CHECK(r.precision == doctest::Approx(p).epsilon(1e-12));
        CHECK(r.recall == doctest::Approx(rec).epsilon(1e-12));
        CHECK(r.f1 == doctest::Approx(f1).epsilon(1e-12));
        if (c.tp == 0) CHECK(r.f1 == 0.0);
    }
}

TEST_CASE("metrics are invariant to example order") {
    auto rng = make_rng(17);
    std::vector<std::vector<SpanTuple>> preds, golds;
    for (int i = 0; i < 8; ++i) {
        preds.push_back(random_tuples(rng, true));
        golds.push_back(random_tuples(rng, true));
    }
    Prf a = micro_prf(preds, golds);
    std::vector<std::size_t> perm = {7, 3, 0, 5, 1, 6, 2, 4};
    std::vector<std::vector<SpanTuple>> p2, g2;
    for (std::size_t i : perm) {
        p2.push_back(preds[i]);
        g2.push_back(golds[i]);
    }
    Prf b = micro_prf(p2, g2);
    CHECK(a.precision == b.precision);
    CHECK(a.recall == b.recall);
    CHECK(a.f1 == b.f1);
}

TEST_CASE("accuracy") {
    SUBCASE("all correct") {
        std::vector<std::vector<SpanTuple>> golds = {
            {{1, 1, Sentiment::POS}, {3, 4, Sentiment::NEU}}};
        CHECK(accuracy(golds, golds) == 1.0);
    }
    SUBCASE("three of four") {
        std::vector<std::vector<SpanTuple>> golds = {{{1, 1, Sentiment::POS},
                                                      {3, 4, Sentiment::NEU},
                                                      {6, 6, Sentiment::NEG},
                                                      {8, 8, Sentiment::POS}}};
        std::vector<std::vector<SpanTuple>> preds = golds;
        preds[0][2].sentiment = Sentiment::POS;
        CHECK(accuracy(preds, golds) == doctest::Approx(0.75));
    }
    SUBCASE("missing span raises unless restricted") {
        std::vector<std::vector<SpanTuple>> golds = {{{1, 1, Sentiment::POS},
                                                      {3, 3, Sentiment::NEU}}};
        std::vector<std::vector<SpanTuple>> preds = {{{1, 1, Sentiment::POS}}};
        CHECK_THROWS_AS(accuracy(preds, golds), UsageError);
        CHECK(accuracy(preds, golds, true) == 1.0);
    }
    SUBCASE("random fixture against a counting oracle") {
        auto rng = make_rng(88);
        std::vector<std::vector<SpanTuple>> golds(1), preds(1);
        std::size_t correct = 0;
        for (int i = 0; i < 100; ++i) {
            SpanTuple g;
            g.start = 1 + i * 2;
            g.end = g.start;
            g.sentiment = sentiment_from_index(static_cast<int>(rng() % 3));
            SpanTuple p = g;
            if (rng() % 4 == 0) {
                p.sentiment = sentiment_from_index((sentiment_index(*g.sentiment) + 1) % 3);
            } else {
                ++correct;
            }
            golds[0].push_back(g);
            preds[0].push_back(p);
        }
        CHECK(accuracy(preds, golds) == doctest::Approx(correct / 100.0));
    }
}

TEST_CASE("metric report serializes every field") {
    MetricReport r;
    r.task = Task::MASC;
    r.precision = 0.5;
    r.recall = 0.25;
    r.f1 = 1.0 / 3.0;
    r.acc = 0.75;
    r.example_count = 12;
    std::string j = r.to_json();
    CHECK(j.find("\"task\":\"masc\"") != std::string::npos);
    CHECK(j.find("\"P\":0.5") != std::string::npos);
    CHECK(j.find("\"Acc\":0.75") != std::string::npos);
    CHECK(j.find("\"example_count\":12") != std::string::npos);
}

TEST_SUITE_END();
