#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mabsa/corpus.hpp"
#include "mabsa/error.hpp"
#include "mabsa/features.hpp"
#include "mabsa/model.hpp"
#include "mabsa/rng.hpp"
#include "mabsa/trainer.hpp"

using namespace mabsa;

namespace {

ModelConfig tiny_config(std::size_t vocab_size, std::size_t R = 3, std::size_t fd = 4) {
    ModelConfig cfg;
    cfg.hidden = 16;
    cfg.enc_layers = 1;
    cfg.dec_layers = 1;
    cfg.heads = 2;
    cfg.ffn = 24;
    cfg.region_count = R;
    cfg.class_count = 4;
    cfg.feature_dim = fd;
    cfg.vocab_size = vocab_size;
    cfg.max_seq_len = 48;
    cfg.max_gen_len = 24;
    return cfg;
}

Vocabulary tiny_vocab() {
    return Vocabulary::build(
        {{"the", "match", "was", "great", "today", "City", "Arena", "dull", "crowd", "big"}}, 1);
}

MultimodalExample tiny_example(std::size_t R = 3, std::size_t fd = 4, std::uint64_t seed = 5) {
    MultimodalExample ex;
    ex.text = "the match at City Arena was great today";
    ex.regions = RegionSeed{seed, fd};
    for (std::size_t i = 0; i < R; ++i) {
        ex.region_class_dists.push_back({0.7, 0.1, 0.1, 0.1});
    }
    ex.sentiment = Sentiment::POS;
    ex.aspects = std::vector<SpanTuple>{{4, 5, Sentiment::POS}};
    ex.opinions = std::vector<SpanTuple>{{7, 7, std::nullopt}};
    return ex;
}

std::vector<std::vector<double>> random_regions(std::size_t R, std::size_t fd,
                                                std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::vector<std::vector<double>> out(R, std::vector<double>(fd));
    for (auto& row : out)
        for (double& v : row) v = 2.0 * unit_double(rng()) - 1.0;
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("features-model");

TEST_CASE("input layout arithmetic") {
    InputLayout a{36, 10};
    CHECK(a.length() == 50);
    CHECK(a.bos_slot() == 38);
    CHECK(a.text_begin() == 39);
    CHECK(a.eos_slot() == 49);
    InputLayout b{1, 1};
    CHECK(b.length() == 6);
}

TEST_CASE("project_regions") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    SUBCASE("zero weights give the bias in every region row") {
        ModelParams p = init_params(cfg, 1);
        for (double& v : p.proj_w.data()) v = 0.0;
        for (std::size_t j = 0; j < cfg.hidden; ++j) p.proj_b[j] = 0.25 * (j + 1);
        Graph g;
        BoundParams bp = bind_params(g, p, false);
        Var regions = g.constant(Tensor({3, cfg.feature_dim},
                                        std::vector<double>(3 * cfg.feature_dim, 0.5)));
        const Tensor& v = g.value(project_regions(g, bp.feature_vars(), regions));
        REQUIRE(v.rows() == 3);
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t j = 0; j < cfg.hidden; ++j)
                CHECK(v(r, j) == doctest::Approx(0.25 * (j + 1)));
    }
    SUBCASE("identity-like projection copies the features") {
        ModelConfig icfg = tiny_config(vocab.size(), 2, cfg.hidden);
        ModelParams p = init_params(icfg, 1);
        for (double& v : p.proj_w.data()) v = 0.0;
        for (std::size_t j = 0; j < icfg.hidden; ++j) p.proj_w(j, j) = 1.0;
        for (double& v : p.proj_b.data()) v = 0.0;
        Graph g;
        BoundParams bp = bind_params(g, p, false);
        Tensor feats({2, icfg.hidden});
        for (std::size_t i = 0; i < feats.size(); ++i) feats[i] = 0.01 * (i + 1);
        const Tensor& v = g.value(project_regions(g, bp.feature_vars(), g.constant(feats)));
        for (std::size_t i = 0; i < feats.size(); ++i) CHECK(v[i] == doctest::Approx(feats[i]));
    }
    SUBCASE("gradient check through the projection") {
        auto rng = make_rng(8);
        Tensor w({3, 4}), b({3}), r({2, 4});
        for (double& v : w.data()) v = 2.0 * unit_double(rng()) - 1.0;
        for (double& v : b.data()) v = 2.0 * unit_double(rng()) - 1.0;
        for (double& v : r.data()) v = 2.0 * unit_double(rng()) - 1.0;
        double err = grad_check(
            [](Graph& g, const std::vector<Var>& v) {
                Var proj = g.add_row_vector(g.matmul(v[2], g.transpose(v[0])), v[1]);
                return g.sum(g.mul(proj, proj));
            },
            {w, b, r});
        CHECK(err <= 1e-4);
    }
    SUBCASE("feature_dim mismatch") {
        ModelParams p = init_params(cfg, 1);
        Graph g;
        BoundParams bp = bind_params(g, p, false);
        Var regions = g.constant(Tensor({3, cfg.feature_dim + 1}));
        CHECK_THROWS_AS(project_regions(g, bp.feature_vars(), regions), DimensionError);
    }
}

TEST_CASE("encode shapes and slot recovery") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    ModelParams p = init_params(cfg, 2);
    MultimodalExample ex = tiny_example();
    std::vector<int> ids = vocab.encode(tokenize(ex.text));

    Graph g;
    BoundParams bp = bind_params(g, p, false);
    EncodeResult enc = encode(g, bp, ids, materialize_regions(ex));
    CHECK(g.value(enc.hidden).rows() == 3 + ids.size() + 4);
    CHECK(g.value(enc.hidden).cols() == cfg.hidden);
    CHECK(g.value(enc.text).rows() == ids.size());
    CHECK(g.value(enc.visual).rows() == 3);
    // text_avg is the elementwise mean of token embeddings and encoder states
    const Tensor& avg = g.value(enc.text_avg);
    const Tensor& emb = g.value(enc.token_embeds);
    const Tensor& hs = g.value(enc.text);
    for (std::size_t i = 0; i < avg.size(); ++i) {
        CHECK(avg[i] == doctest::Approx(0.5 * (emb[i] + hs[i])));
    }
    SUBCASE("length over capacity raises") {
        ModelConfig small = cfg;
        small.max_seq_len = 10;
        ModelParams sp = init_params(small, 2);
        Graph g2;
        BoundParams bp2 = bind_params(g2, sp, false);
        CHECK_THROWS_AS(encode(g2, bp2, ids, materialize_regions(ex)), CapacityError);
    }
}

TEST_CASE("permuting regions permutes their encoder rows when region positions are off") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    cfg.region_positions = false;
    ModelParams p = init_params(cfg, 3);
    std::vector<int> ids = vocab.encode({"the", "match"});
    auto feats = random_regions(3, cfg.feature_dim, 11);

    Graph g1;
    BoundParams bp1 = bind_params(g1, p, false);
    Tensor h1 = g1.value(encode(g1, bp1, ids, feats).hidden);

    std::swap(feats[0], feats[2]);
    Graph g2;
    BoundParams bp2 = bind_params(g2, p, false);
    Tensor h2 = g2.value(encode(g2, bp2, ids, feats).hidden);

    for (std::size_t j = 0; j < cfg.hidden; ++j) {
        CHECK(h1(1, j) == doctest::Approx(h2(3, j)).epsilon(1e-9));
        CHECK(h1(3, j) == doctest::Approx(h2(1, j)).epsilon(1e-9));
        CHECK(h1(2, j) == doctest::Approx(h2(2, j)).epsilon(1e-9));
        CHECK(h1(0, j) == doctest::Approx(h2(0, j)).epsilon(1e-9));
    }
}

TEST_CASE("decoder causality") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    ModelParams p = init_params(cfg, 4);
    MultimodalExample ex = tiny_example();

    Tensor short_h = decode_step(p, vocab, ex, {tok::kBos, tok::kMlm});
    Tensor long_h_ignored = decode_step(p, vocab, ex, {tok::kBos, tok::kMlm, tok::kSpecialCount});
    // Re-run the longer prefix and compare the *second* position against the
    // short run's last position.
    Graph g;
    BoundParams bp = bind_params(g, p, false);
    EncodeResult enc = encode(g, bp, vocab.encode(tokenize(ex.text)), materialize_regions(ex));
    Var states = decode_states(
        g, bp, enc.hidden,
        decoder_token_inputs(g, bp, {tok::kBos, tok::kMlm, tok::kSpecialCount}));
    const Tensor& all = g.value(states);
    for (std::size_t j = 0; j < cfg.hidden; ++j) {
        CHECK(all(1, j) == doctest::Approx(short_h[j]).epsilon(1e-12));
    }
    CHECK(g.value(states).rows() == 3);
    (void)long_h_ignored;
    SUBCASE("empty prefix rejected") {
        Graph g2;
        BoundParams bp2 = bind_params(g2, p, false);
        CHECK_THROWS_AS(decoder_token_inputs(g2, bp2, {}), UsageError);
    }
}

TEST_CASE("pointer distribution properties") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    ModelParams p = init_params(cfg, 5);
    MultimodalExample ex = tiny_example();
    std::size_t T = tokenize(ex.text).size();

    SUBCASE("size and normalization for the downstream candidate set") {
        Tensor dist = pointer_distribution(p, vocab, ex, Task::JMASA, {});
        REQUIRE(dist.size() == T + 4);
        double sum = 0.0;
        for (double v : dist.data()) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    SUBCASE("orthogonal hidden state gives the uniform distribution") {
        Graph g;
        std::size_t C = 5;
        Tensor cands({C, 4});
        for (std::size_t i = 0; i < C; ++i) cands(i, i % 4 == 0 ? 0 : i % 4) = 1.0;
        // h orthogonal to every candidate row: zero vector
        Var dist = g.softmax(pointer_logits(g, g.constant(cands), g.constant(Tensor({1, 4}))));
        for (std::size_t i = 0; i < C; ++i) {
            CHECK(g.value(dist)[i] == doctest::Approx(1.0 / C));
        }
    }
    SUBCASE("doubling the hidden state never reorders the argmax") {
        auto rng = make_rng(21);
        Tensor cands({6, 8}), h({1, 8});
        for (double& v : cands.data()) v = 2.0 * unit_double(rng()) - 1.0;
        for (double& v : h.data()) v = 2.0 * unit_double(rng()) - 1.0;
        Graph g;
        Var c = g.constant(cands);
        Tensor d1 = g.value(g.softmax(pointer_logits(g, c, g.constant(h))));
        Tensor h2 = h;
        for (double& v : h2.data()) v *= 2.0;
        Tensor d2 = g.value(g.softmax(pointer_logits(g, c, g.constant(h2))));
        auto argmax = [](const Tensor& t) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < t.size(); ++i)
                if (t[i] > t[best]) best = i;
            return best;
        };
        CHECK(argmax(d1) == argmax(d2));
        CHECK(d2[argmax(d2)] >= d1[argmax(d1)]);  // sharper, not reordered
    }
}

TEST_CASE("lm distribution uses the shared embedding table") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    ModelParams p = init_params(cfg, 6);

    SUBCASE("size and normalization") {
        Tensor h({cfg.hidden});
        Tensor dist = lm_distribution_of(p, h);
        REQUIRE(dist.size() == vocab.size());
        double sum = 0.0;
        for (double v : dist.data()) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    SUBCASE("hidden state aligned with one embedding row wins") {
        ModelParams q = p;
        // Make row 7 orthogonal to the others and align h with it.
        for (std::size_t j = 0; j < cfg.hidden; ++j) q.tok_embed(7, j) = 0.0;
        q.tok_embed(7, 0) = 5.0;
        Tensor h({cfg.hidden});
        h[0] = 3.0;
        Tensor dist = lm_distribution_of(q, h);
        std::size_t best = 0;
        for (std::size_t i = 1; i < dist.size(); ++i)
            if (dist[i] > dist[best]) best = i;
        CHECK(best == 7);
    }
    SUBCASE("mutating the embedding table moves both input and output head") {
        MultimodalExample ex = tiny_example();
        std::vector<int> tokens = vocab.encode(tokenize(ex.text));
        Tensor h = decode_step(p, vocab, ex, {tok::kBos, tok::kMlm});
        Tensor before = lm_distribution_of(p, h);
        ModelParams q = p;
        q.tok_embed(static_cast<std::size_t>(tokens[0]), 0) += 0.5;
        q.tok_embed(static_cast<std::size_t>(tokens[0]), 1) -= 0.25;
        // Same hidden state, new head values: the shared table moved the head.
        Tensor after = lm_distribution_of(q, h);
        bool changed = false;
        for (std::size_t i = 0; i < before.size(); ++i) {
            if (std::abs(before[i] - after[i]) > 1e-12) changed = true;
        }
        CHECK(changed);
        // And the encoder input changed too: encoding the same text differs.
        Tensor h2 = decode_step(q, vocab, ex, {tok::kBos, tok::kMlm});
        bool enc_changed = false;
        for (std::size_t j = 0; j < cfg.hidden; ++j) {
            if (std::abs(h[j] - h2[j]) > 1e-12) enc_changed = true;
        }
        CHECK(enc_changed);
    }
    SUBCASE("gradient reaches the embedding table") {
        Vocabulary v = tiny_vocab();
        TrainResources res;
        TrainConfig tc;
        Graph g;
        BoundParams bp = bind_params(g, p, true);
        Var loss = example_task_loss(g, bp, Task::MLM, tiny_example(), v, res, tc, 3);
        g.backward(loss);
        REQUIRE(g.has_grad(bp.tok_embed));
        double norm = 0.0;
        for (double x : g.grad(bp.tok_embed).data()) norm += x * x;
        CHECK(norm > 0.0);
    }
}

TEST_CASE("mrm and msp heads") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    ModelParams p = init_params(cfg, 7);
    MultimodalExample ex = tiny_example();

    SUBCASE("mrm emits one distribution per masked region") {
        RegionMaskPlan plan = mask_regions(3, 1.0, 1);
        auto dists = mrm_predict(p, vocab, ex, plan);
        REQUIRE(dists.size() == 3);
        for (const Tensor& d : dists) {
            REQUIRE(d.size() == cfg.class_count);
            double sum = 0.0;
            for (double v : d.data()) sum += v;
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
    SUBCASE("empty plan rejected") {
        RegionMaskPlan plan;
        plan.region_count = 3;
        CHECK_THROWS_AS(mrm_predict(p, vocab, ex, plan), UsageError);
    }
    SUBCASE("msp distribution over three classes") {
        Tensor d = msp_predict(p, vocab, ex);
        REQUIRE(d.size() == 3);
        double sum = 0.0;
        for (double v : d.data()) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    SUBCASE("zero msp head weights give the uniform distribution") {
        ModelParams q = p;
        for (double& v : q.msp_w1.data()) v = 0.0;
        for (double& v : q.msp_b1.data()) v = 0.0;
        for (double& v : q.msp_w2.data()) v = 0.0;
        for (double& v : q.msp_b2.data()) v = 0.0;
        Tensor d = msp_predict(q, vocab, ex);
        for (int i = 0; i < 3; ++i) CHECK(d[i] == doctest::Approx(1.0 / 3));
    }
}

TEST_CASE("generation obeys the grammar") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    ModelParams p = init_params(cfg, 8);
    MultimodalExample ex = tiny_example();

    SUBCASE("untrained JMASA output still parses") {
        GenerateResult r = generate(Task::JMASA, p, vocab, ex, 16);
        if (r.complete) {
            ParsedTarget parsed = parse_target(Task::JMASA, r.seq.items);
            CHECK(parsed.report.valid);
        } else {
            CHECK(r.seq.items.size() == 16);
        }
    }
    SUBCASE("MASC forces the gold spans") {
        std::vector<SpanTuple> gold = {{1, 2, std::nullopt}, {4, 5, std::nullopt}};
        GenerateResult r = generate(Task::MASC, p, vocab, ex, 16, &gold);
        REQUIRE(r.complete);
        REQUIRE(r.seq.items.size() == 7);
        CHECK(r.seq.items[0] == TargetItem::position(1));
        CHECK(r.seq.items[1] == TargetItem::position(2));
        CHECK(r.seq.items[3] == TargetItem::position(4));
        CHECK(r.seq.items[4] == TargetItem::position(5));
        for (std::size_t slot : {std::size_t{2}, std::size_t{5}}) {
            CHECK(r.seq.items[slot].kind == TargetItem::Kind::Special);
            int id = r.seq.items[slot].special;
            CHECK((id == tok::kPos || id == tok::kNeu || id == tok::kNeg));
        }
        CHECK(r.seq.items[6] == TargetItem::special_token(tok::kEos));
    }
    SUBCASE("MASC without spans is an error") {
        CHECK_THROWS_AS(generate(Task::MASC, p, vocab, ex, 16), UsageError);
    }
    SUBCASE("AOG emits vocabulary tokens") {
        GenerateResult r = generate(Task::AOG, p, vocab, ex, 6);
        for (const TargetItem& it : r.seq.items) {
            CHECK(it.kind == TargetItem::Kind::Special);
            CHECK(it.special >= 0);
            CHECK(static_cast<std::size_t>(it.special) < vocab.size());
        }
    }
    SUBCASE("non-generation task rejected") {
        CHECK_THROWS_AS(generate(Task::MLM, p, vocab, ex, 8), UsageError);
    }
}

TEST_CASE("one-layer encoder and decoder pass gradient checks") {
    // Tiny end-to-end slices: parameters as grad-check inputs via
    // bind_param_vars.
    Vocabulary vocab = Vocabulary::build({{"a", "b", "c"}}, 1);
    ModelConfig cfg;
    cfg.hidden = 8;
    cfg.enc_layers = 1;
    cfg.dec_layers = 1;
    cfg.heads = 2;
    cfg.ffn = 12;
    cfg.region_count = 2;
    cfg.class_count = 3;
    cfg.feature_dim = 3;
    cfg.vocab_size = vocab.size();
    cfg.max_seq_len = 24;
    ModelParams params = init_params(cfg, 9);

    std::vector<std::string> names;
    std::vector<Tensor> inputs;
    params.for_each([&](const std::string& n, const Tensor& t) {
        names.push_back(n);
        inputs.push_back(t);
    });
    MultimodalExample ex;
    ex.text = "a b c";
    ex.regions = RegionSeed{3, cfg.feature_dim};
    ex.region_class_dists = {{0.5, 0.25, 0.25}, {0.25, 0.5, 0.25}};
    ex.sentiment = Sentiment::NEU;
    auto feats = materialize_regions(ex);
    std::vector<int> ids = vocab.encode(tokenize(ex.text));

    auto build = [&](Graph& g, const std::vector<Var>& vars) {
        std::vector<std::pair<std::string, Var>> registry;
        for (std::size_t i = 0; i < vars.size(); ++i) registry.emplace_back(names[i], vars[i]);
        BoundParams bp = bind_param_vars(cfg, std::move(registry));
        EncodeResult enc = encode(g, bp, ids, feats);
        Var states = decode_states(g, bp, enc.hidden,
                                   decoder_token_inputs(g, bp, {tok::kBos, tok::kMsp}));
        Var h = g.slice_rows(states, 1, 1);
        Var msp = g.cross_entropy(msp_logits(g, bp, h), 1);
        Var cands = candidate_matrix(g, bp, enc, Task::JMASA);
        Var ptr = g.cross_entropy(pointer_logits(g, cands, h), 0);
        return g.add(msp, ptr);
    };
    double err = grad_check(build, inputs, 1e-5);
    CHECK(err <= 1e-3);
}

TEST_CASE("checkpoint round trip and validation") {
    Vocabulary vocab = tiny_vocab();
    ModelConfig cfg = tiny_config(vocab.size());
    ModelParams p = init_params(cfg, 10);
    std::string path = (std::filesystem::temp_directory_path() / "mabsa_test.ckpt").string();
    save_checkpoint(path, p, vocab);
    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.params.config == cfg);
    CHECK(ck.vocab.size() == vocab.size());
    bool same = true;
    ck.params.for_each([&](const std::string& name, const Tensor& t) {
        p.for_each([&](const std::string& name2, const Tensor& t2) {
            if (name == name2 && t.data() != t2.data()) same = false;
        });
    });
    CHECK(same);
    SUBCASE("corrupt magic rejected") {
        std::ofstream out(path, std::ios::binary);
        out << "nope";
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), LoadError);
    }
    std::remove(path.c_str());
}

TEST_SUITE_END();
