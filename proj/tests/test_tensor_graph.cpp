#include <doctest.h>

#include <cmath>
#include <random>

#include "mabsa/error.hpp"
#include "mabsa/graph.hpp"
#include "mabsa/rng.hpp"
#include "mabsa/tensor.hpp"

using namespace mabsa;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = (2.0 * unit_double(rng()) - 1.0) * scale;
    return t;
}

}  // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("tensor shape and data agree") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("matmul basics") {
    Graph g;
    SUBCASE("identity times x") {
        Tensor id({3, 3});
        for (int i = 0; i < 3; ++i) id(i, i) = 1.0;
        Tensor x({3, 2}, {1, 2, 3, 4, 5, 6});
        Var out = g.matmul(g.input(id), g.input(x));
        for (std::size_t i = 0; i < 6; ++i) CHECK(g.value(out)[i] == x[i]);
    }
    SUBCASE("hand-computed product") {
        Var a = g.input(Tensor({2, 2}, {1, 2, 3, 4}));
        Var b = g.input(Tensor({2, 1}, {1, 1}));
        Var out = g.matmul(a, b);
        CHECK(g.value(out)[0] == doctest::Approx(3.0));
        CHECK(g.value(out)[1] == doctest::Approx(7.0));
    }
    SUBCASE("zeros times anything") {
        Var a = g.input(Tensor::zeros({2, 3}));
        Var b = g.input(Tensor::full({3, 4}, 2.5));
        const Tensor& out = g.value(g.matmul(a, b));
        CHECK(out.shape() == std::vector<std::size_t>{2, 4});
        for (double v : out.data()) CHECK(v == 0.0);
    }
    SUBCASE("shape mismatch") {
        Var a = g.input(Tensor::zeros({2, 3}));
        Var b = g.input(Tensor::zeros({4, 2}));
        CHECK_THROWS_AS(g.matmul(a, b), DimensionError);
    }
}

TEST_CASE("softmax values and stabilization") {
    Graph g;
    SUBCASE("symmetry") {
        const Tensor& y = g.value(g.softmax(g.input(Tensor({3}, {0, 0, 0}))));
        for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(1.0 / 3));
    }
    SUBCASE("huge logit does not overflow") {
        const Tensor& y = g.value(g.softmax(g.input(Tensor({2}, {1000, 0}))));
        CHECK(y[0] == doctest::Approx(1.0));
        CHECK(y[1] == doctest::Approx(0.0));
        CHECK(y.all_finite());
    }
    SUBCASE("closed form ln2/ln1") {
        const Tensor& y = g.value(g.softmax(g.input(Tensor({2}, {std::log(2.0), 0.0}))));
        CHECK(y[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
        CHECK(y[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }
    SUBCASE("rows sum to one") {
        auto rng = make_rng(7);
        Tensor x = random_tensor({5, 9}, rng, 1e4);
        const Tensor& y = g.value(g.softmax(g.input(x)));
        for (std::size_t r = 0; r < 5; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < 9; ++c) s += y(r, c);
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }
    SUBCASE("empty axis") {
        CHECK_THROWS_AS(g.softmax(g.input(Tensor::zeros({3, 0}))), DimensionError);
    }
}

TEST_CASE("layer_norm values") {
    Graph g;
    Var gain = g.input(Tensor({2}, {1, 1}));
    Var bias = g.input(Tensor({2}, {0, 0}));
    SUBCASE("constant row maps to zero") {
        const Tensor& y =
            g.value(g.layer_norm(g.input(Tensor({1, 2}, {4, 4})), gain, bias, 1e-5));
        CHECK(y[0] == doctest::Approx(0.0));
        CHECK(y[1] == doctest::Approx(0.0));
    }
    SUBCASE("unit variance row") {
        const Tensor& y =
            g.value(g.layer_norm(g.input(Tensor({1, 2}, {1, 3})), gain, bias, 1e-12));
        CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("zero gain broadcasts bias") {
        Var g0 = g.input(Tensor({2}, {0, 0}));
        Var b = g.input(Tensor({2}, {2.5, -1.0}));
        const Tensor& y = g.value(g.layer_norm(g.input(Tensor({1, 2}, {1, 3})), g0, b, 1e-5));
        CHECK(y[0] == doctest::Approx(2.5));
        CHECK(y[1] == doctest::Approx(-1.0));
    }
}

TEST_CASE("cross_entropy values") {
    Graph g;
    SUBCASE("uniform over 3 classes") {
        Var l = g.input(Tensor({3}, {0.7, 0.7, 0.7}));
        CHECK(g.value(g.cross_entropy(l, 1)).item() == doctest::Approx(std::log(3.0)));
    }
    SUBCASE("dominant logit") {
        Var l = g.input(Tensor({3}, {50, 0, 0}));
        CHECK(g.value(g.cross_entropy(l, 0)).item() == doctest::Approx(0.0));
    }
    SUBCASE("two equal logits") {
        Var l = g.input(Tensor({2}, {0, 0}));
        CHECK(g.value(g.cross_entropy(l, 0)).item() == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("target out of range") {
        Var l = g.input(Tensor({2}, {0, 0}));
        CHECK_THROWS_AS(g.cross_entropy(l, 2), IndexError);
    }
}

TEST_CASE("kl_divergence values") {
    Graph g;
    SUBCASE("equal distributions") {
        Var q = g.input(Tensor({2}, {0.5, 0.5}));
        Var p = g.input(Tensor({2}, {0.5, 0.5}));
        CHECK(g.value(g.kl_divergence(q, p)).item() == doctest::Approx(0.0));
    }
    SUBCASE("point mass vs uniform") {
        Var q = g.input(Tensor({2}, {1.0, 0.0}));
        Var p = g.input(Tensor({2}, {0.5, 0.5}));
        CHECK(g.value(g.kl_divergence(q, p)).item() == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("hand-computed asymmetric case") {
        Var q = g.input(Tensor({2}, {0.25, 0.75}));
        Var p = g.input(Tensor({2}, {0.75, 0.25}));
        CHECK(g.value(g.kl_divergence(q, p)).item() ==
              doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-10));
    }
    SUBCASE("kl(q,q) vanishes for random distributions") {
        auto rng = make_rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            std::size_t n = 2 + rng() % 6;
            Tensor q({n});
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                q[i] = unit_double(rng()) + 1e-3;
                sum += q[i];
            }
            for (std::size_t i = 0; i < n; ++i) q[i] /= sum;
            Graph g2;
            Var qa = g2.input(q), qb = g2.input(q);
            CHECK(g2.value(g2.kl_divergence(qa, qb)).item() <= 1e-9);
        }
    }
    SUBCASE("rejects non-distributions") {
        Var q = g.input(Tensor({2}, {0.9, 0.9}));
        Var p = g.input(Tensor({2}, {0.5, 0.5}));
        CHECK_THROWS_AS(g.kl_divergence(q, p), ValidationError);
    }
}

TEST_CASE("backward basics") {
    SUBCASE("sum gives ones") {
        Graph g;
        Var x = g.input(Tensor({2, 2}, {1, 2, 3, 4}), true);
        g.backward(g.sum(x));
        for (double v : g.grad(x).data()) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("x dot x gives 2x") {
        Graph g;
        Var x = g.input(Tensor({3}, {1, -2, 0.5}), true);
        g.backward(g.sum(g.mul(x, x)));
        CHECK(g.grad(x)[0] == doctest::Approx(2.0));
        CHECK(g.grad(x)[1] == doctest::Approx(-4.0));
        CHECK(g.grad(x)[2] == doctest::Approx(1.0));
    }
    SUBCASE("non-scalar root rejected") {
        Graph g;
        Var x = g.input(Tensor({3}, {1, 2, 3}), true);
        CHECK_THROWS_AS(g.backward(x), UsageError);
    }
    SUBCASE("deterministic gradients") {
        auto run = [] {
            Graph g;
            auto rng = make_rng(99);
            Var x = g.input(random_tensor({4, 4}, rng), true);
            Var w = g.input(random_tensor({4, 4}, rng), true);
            g.backward(g.sum(g.softmax(g.matmul(x, w))));
            return g.grad(w);
        };
        Tensor a = run(), b = run();
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
}

TEST_CASE("grad_check against central differences") {
    auto rng = make_rng(3);
    SUBCASE("linear function is exact") {
        std::vector<Tensor> inputs = {random_tensor({4}, rng)};
        double err = grad_check(
            [](Graph& g, const std::vector<Var>& v) { return g.sum(g.scale(v[0], 3.0)); }, inputs);
        CHECK(err <= 1e-8);
    }
    SUBCASE("softmax-matmul chain") {
        std::vector<Tensor> inputs = {random_tensor({3, 4}, rng), random_tensor({4, 3}, rng)};
        double err = grad_check(
            [](Graph& g, const std::vector<Var>& v) {
                Var y = g.softmax(g.matmul(v[0], v[1]));
                return g.sum(g.mul(y, y));
            },
            inputs);
        CHECK(err <= 1e-4);
    }
    SUBCASE("layer_norm with eps") {
        std::vector<Tensor> inputs = {random_tensor({3, 5}, rng), random_tensor({5}, rng),
                                      random_tensor({5}, rng)};
        double err = grad_check(
            [](Graph& g, const std::vector<Var>& v) {
                Var y = g.layer_norm(v[0], v[1], v[2], 1e-5);
                return g.sum(g.mul(y, y));
            },
            inputs);
        CHECK(err <= 1e-3);
    }
    SUBCASE("three-layer random net") {
        std::vector<Tensor> inputs = {random_tensor({2, 4}, rng),  // x
                                      random_tensor({4, 4}, rng),  // w1
                                      random_tensor({4}, rng),     // b1
                                      random_tensor({4, 4}, rng),  // w2
                                      random_tensor({4}, rng),     // b2
                                      random_tensor({4, 3}, rng)}; // w3
        double err = grad_check(
            [](Graph& g, const std::vector<Var>& v) {
                Var h1 = g.gelu(g.add_row_vector(g.matmul(v[0], v[1]), v[2]));
                Var h2 = g.gelu(g.add_row_vector(g.matmul(h1, v[3]), v[4]));
                Var out = g.softmax(g.matmul(h2, v[5]));
                return g.cross_entropy(g.reshape(g.slice_rows(out, 0, 1), {3}), 1);
            },
            inputs);
        CHECK(err <= 1e-4);
    }
    SUBCASE("every op on random shapes") {
        for (int trial = 0; trial < 3; ++trial) {
            std::size_t n = 2 + rng() % 7, m = 2 + rng() % 7;
            std::vector<Tensor> mats = {random_tensor({n, m}, rng), random_tensor({m, n}, rng)};
            double err = grad_check(
                [](Graph& g, const std::vector<Var>& v) {
                    Var prod = g.matmul(v[0], v[1]);
                    Var s = g.softmax(prod);
                    Var t = g.gelu(g.transpose(g.add(prod, g.scale(s, 0.5))));
                    return g.mean(g.mul(t, t));
                },
                mats);
            CHECK(err <= 1e-4);

            std::vector<Tensor> pieces = {random_tensor({n, m}, rng), random_tensor({n, m}, rng),
                                          random_tensor({m}, rng)};
            err = grad_check(
                [n](Graph& g, const std::vector<Var>& v) {
                    Var cat = g.concat_rows({v[0], v[1]});
                    Var c2 = g.concat_cols({g.slice_rows(cat, 0, n), g.slice_rows(cat, n, n)});
                    Var b = g.add_row_vector(g.slice_cols(c2, 0, g.value(v[2]).size()), v[2]);
                    return g.sum(g.mul(b, b));
                },
                pieces);
            CHECK(err <= 1e-4);
        }
    }
    SUBCASE("gather_rows scatters gradient") {
        std::vector<Tensor> inputs = {random_tensor({5, 3}, rng)};
        double err = grad_check(
            [](Graph& g, const std::vector<Var>& v) {
                Var rows = g.gather_rows(v[0], {0, 2, 2, 4});
                return g.sum(g.mul(rows, rows));
            },
            inputs);
        CHECK(err <= 1e-4);
    }
    SUBCASE("kl and cross entropy") {
        Tensor q({3}, {0.2, 0.5, 0.3});
        std::vector<Tensor> inputs = {random_tensor({3}, rng)};
        double err = grad_check(
            [&](Graph& g, const std::vector<Var>& v) {
                Var p = g.softmax(v[0]);
                return g.add(g.kl_divergence(g.input(q), p), g.cross_entropy(v[0], 2));
            },
            inputs);
        CHECK(err <= 1e-4);
    }
}

TEST_SUITE_END();
