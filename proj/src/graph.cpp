#include "mabsa/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mabsa/error.hpp"

namespace mabsa {

namespace {

constexpr double kLogClamp = 1e-12;  // floor for probabilities before log
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) {
        throw ValidationError(std::string(op) + " produced a non-finite value");
    }
}

// (rows, row_len) view of a tensor treated as a stack of last-axis rows.
std::pair<std::size_t, std::size_t> row_view(const Tensor& t) {
    if (t.rank() == 0 || t.size() == 0) return {0, 0};
    std::size_t row = t.shape().back();
    return {t.size() / row, row};
}

void validate_distribution(const Tensor& t, const char* who) {
    double sum = 0.0;
    for (double v : t.data()) {
        if (v < 0.0) throw ValidationError(std::string(who) + " has a negative entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ValidationError(std::string(who) + " does not sum to 1 (got " +
                              std::to_string(sum) + ")");
    }
}

}  // namespace

Var Graph::emit(Tensor value, bool requires_grad,
                std::function<void(Graph&, std::uint32_t)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    grads_.emplace_back();
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::check(Var v) const {
    if (v.id >= nodes_.size()) throw UsageError("Var does not belong to this graph");
}

Var Graph::input(Tensor value) {
    bool rg = value.requires_grad;
    return input(std::move(value), rg);
}

Var Graph::input(Tensor value, bool requires_grad) {
    require_finite(value, "input");
    return emit(std::move(value), requires_grad, nullptr);
}

const Tensor& Graph::value(Var v) const {
    check(v);
    return nodes_[v.id].value;
}

bool Graph::requires_grad(Var v) const {
    check(v);
    return nodes_[v.id].requires_grad;
}

bool Graph::has_grad(Var v) const {
    check(v);
    return grads_[v.id].size() > 0;
}

const Tensor& Graph::grad(Var v) const {
    check(v);
    if (grads_[v.id].size() == 0) {
        throw UsageError("no gradient for this node; call backward() on a loss that reaches it");
    }
    return grads_[v.id];
}

void Graph::accumulate(std::uint32_t id, const Tensor& g) {
    Tensor& slot = grads_[id];
    if (slot.size() == 0) {
        slot = g;
        return;
    }
    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

// ---------------------------------------------------------------------------
// elementwise / shape

Var Graph::add(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (!ta.same_shape(tb)) {
        throw DimensionError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
    require_finite(out, "add");
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    return emit(std::move(out), rg, [a, b](Graph& g, std::uint32_t self) {
        const Tensor& go = g.grads_[self];
        if (g.nodes_[a.id].requires_grad) g.accumulate(a.id, go);
        if (g.nodes_[b.id].requires_grad) g.accumulate(b.id, go);
    });
}

Var Graph::sub(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (!ta.same_shape(tb)) {
        throw DimensionError("sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
    require_finite(out, "sub");
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    return emit(std::move(out), rg, [a, b](Graph& g, std::uint32_t self) {
        const Tensor& go = g.grads_[self];
        if (g.nodes_[a.id].requires_grad) g.accumulate(a.id, go);
        if (g.nodes_[b.id].requires_grad) {
            Tensor neg = go;
            for (double& v : neg.data()) v = -v;
            g.accumulate(b.id, neg);
        }
    });
}

Var Graph::mul(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (!ta.same_shape(tb)) {
        throw DimensionError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
    require_finite(out, "mul");
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    return emit(std::move(out), rg, [a, b](Graph& g, std::uint32_t self) {
        const Tensor& go = g.grads_[self];
        if (g.nodes_[a.id].requires_grad) {
            Tensor da = go;
            const Tensor& tb2 = g.nodes_[b.id].value;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= tb2[i];
            g.accumulate(a.id, da);
        }
        if (g.nodes_[b.id].requires_grad) {
            Tensor db = go;
            const Tensor& ta2 = g.nodes_[a.id].value;
            for (std::size_t i = 0; i < db.size(); ++i) db[i] *= ta2[i];
            g.accumulate(b.id, db);
        }
    });
}

Var Graph::scale(Var a, double c) {
    check(a);
    Tensor out = nodes_[a.id].value;
    for (double& v : out.data()) v *= c;
    require_finite(out, "scale");
    return emit(std::move(out), nodes_[a.id].requires_grad,
                [a, c](Graph& g, std::uint32_t self) {
                    Tensor da = g.grads_[self];
                    for (double& v : da.data()) v *= c;
                    g.accumulate(a.id, da);
                });
}

Var Graph::reshape(Var a, std::vector<std::size_t> shape) {
    check(a);
    const Tensor& ta = nodes_[a.id].value;
    if (shape_size(shape) != ta.size()) {
        throw DimensionError("reshape: size mismatch for " + ta.shape_str());
    }
    Tensor out(shape, ta.data());
    std::vector<std::size_t> old_shape = ta.shape();
    return emit(std::move(out), nodes_[a.id].requires_grad,
                [a, old_shape](Graph& g, std::uint32_t self) {
                    Tensor da(old_shape, g.grads_[self].data());
                    g.accumulate(a.id, da);
                });
}

Var Graph::transpose(Var a) {
    check(a);
    const Tensor& ta = nodes_[a.id].value;
    if (ta.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + ta.shape_str());
    std::size_t n = ta.rows(), m = ta.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out(j, i) = ta(i, j);
    return emit(std::move(out), nodes_[a.id].requires_grad,
                [a, n, m](Graph& g, std::uint32_t self) {
                    const Tensor& go = g.grads_[self];  // m x n
                    Tensor da({n, m});
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < m; ++j) da(i, j) = go(j, i);
                    g.accumulate(a.id, da);
                });
}

Var Graph::sum(Var a) {
    check(a);
    double s = 0.0;
    for (double v : nodes_[a.id].value.data()) s += v;
    Tensor out = Tensor::scalar(s);
    require_finite(out, "sum");
    std::vector<std::size_t> shape = nodes_[a.id].value.shape();
    return emit(std::move(out), nodes_[a.id].requires_grad,
                [a, shape](Graph& g, std::uint32_t self) {
                    double go = g.grads_[self][0];
                    g.accumulate(a.id, Tensor::full(shape, go));
                });
}

Var Graph::mean(Var a) {
    check(a);
    std::size_t n = nodes_[a.id].value.size();
    if (n == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// linear algebra

Var Graph::matmul(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (ta.rank() != 2 || tb.rank() != 2) {
        throw DimensionError("matmul: expected rank-2 operands, got " + ta.shape_str() + " and " +
                             tb.shape_str());
    }
    if (ta.cols() != tb.rows()) {
        throw DimensionError("matmul: inner extents differ, " + ta.shape_str() + " x " +
                             tb.shape_str());
    }
    const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out({m, n});
    const double* pa = ta.data().data();
    const double* pb = tb.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            double av = pa[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            double* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    require_finite(out, "matmul");
    bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    return emit(std::move(out), rg, [a, b, m, k, n](Graph& g, std::uint32_t self) {
        const Tensor& go = g.grads_[self];  // m x n
        if (g.nodes_[a.id].requires_grad) {
            // da = go . b^T
            const Tensor& tb2 = g.nodes_[b.id].value;
            Tensor da({m, k});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double gv = go(i, j);
                    if (gv == 0.0) continue;
                    for (std::size_t kk = 0; kk < k; ++kk) da(i, kk) += gv * tb2(kk, j);
                }
            g.accumulate(a.id, da);
        }
        if (g.nodes_[b.id].requires_grad) {
            // db = a^T . go
            const Tensor& ta2 = g.nodes_[a.id].value;
            Tensor db({k, n});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double av = ta2(i, kk);
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) db(kk, j) += av * go(i, j);
                }
            g.accumulate(b.id, db);
        }
    });
}

Var Graph::add_row_vector(Var m, Var v) {
    check(m);
    check(v);
    const Tensor& tm = nodes_[m.id].value;
    const Tensor& tv = nodes_[v.id].value;
    if (tm.rank() != 2 || tv.rank() != 1 || tv.shape()[0] != tm.cols()) {
        throw DimensionError("add_row_vector: " + tm.shape_str() + " + " + tv.shape_str());
    }
    Tensor out = tm;
    for (std::size_t i = 0; i < tm.rows(); ++i)
        for (std::size_t j = 0; j < tm.cols(); ++j) out(i, j) += tv[j];
    require_finite(out, "add_row_vector");
    bool rg = nodes_[m.id].requires_grad || nodes_[v.id].requires_grad;
    return emit(std::move(out), rg, [m, v](Graph& g, std::uint32_t self) {
        const Tensor& go = g.grads_[self];
        if (g.nodes_[m.id].requires_grad) g.accumulate(m.id, go);
        if (g.nodes_[v.id].requires_grad) {
            Tensor dv({go.cols()});
            for (std::size_t i = 0; i < go.rows(); ++i)
                for (std::size_t j = 0; j < go.cols(); ++j) dv[j] += go(i, j);
            g.accumulate(v.id, dv);
        }
    });
}

// ---------------------------------------------------------------------------
// nonlinearities and losses

Var Graph::softmax(Var a) {
    check(a);
    const Tensor& ta = nodes_[a.id].value;
    auto [nrows, rowlen] = row_view(ta);
    if (rowlen == 0) throw DimensionError("softmax over an empty axis");
    Tensor out = ta;
    for (std::size_t r = 0; r < nrows; ++r) {
        double* row = out.data().data() + r * rowlen;
        double mx = row[0];
        for (std::size_t j = 1; j < rowlen; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < rowlen; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < rowlen; ++j) row[j] /= sum;
    }
    require_finite(out, "softmax");
    return emit(std::move(out), nodes_[a.id].requires_grad,
                [a, nrows = nrows, rowlen = rowlen](Graph& g, std::uint32_t self) {
                    const Tensor& y = g.nodes_[self].value;
                    const Tensor& go = g.grads_[self];
                    Tensor da(y.shape());
                    for (std::size_t r = 0; r < nrows; ++r) {
                        const double* yr = y.data().data() + r * rowlen;
                        const double* gr = go.data().data() + r * rowlen;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < rowlen; ++j) dot += yr[j] * gr[j];
                        double* dr = da.data().data() + r * rowlen;
                        for (std::size_t j = 0; j < rowlen; ++j) dr[j] = yr[j] * (gr[j] - dot);
                    }
                    g.accumulate(a.id, da);
                });
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
    check(x);
    check(gain);
    check(bias);
    const Tensor& tx = nodes_[x.id].value;
    const Tensor& tg = nodes_[gain.id].value;
    const Tensor& tb = nodes_[bias.id].value;
    auto [nrows, rowlen] = row_view(tx);
    if (rowlen == 0) throw DimensionError("layer_norm over an empty axis");
    if (tg.rank() != 1 || tb.rank() != 1 || tg.shape()[0] != rowlen || tb.shape()[0] != rowlen) {
        throw DimensionError("layer_norm: gain/bias must match last axis of " + tx.shape_str());
    }
    Tensor out(tx.shape());
    for (std::size_t r = 0; r < nrows; ++r) {
        const double* xr = tx.data().data() + r * rowlen;
        double* yr = out.data().data() + r * rowlen;
        double mu = 0.0;
        for (std::size_t j = 0; j < rowlen; ++j) mu += xr[j];
        mu /= rowlen;
        double var = 0.0;
        for (std::size_t j = 0; j < rowlen; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= rowlen;
        double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < rowlen; ++j) yr[j] = tg[j] * ((xr[j] - mu) * inv) + tb[j];
    }
    require_finite(out, "layer_norm");
    bool rg = nodes_[x.id].requires_grad || nodes_[gain.id].requires_grad ||
              nodes_[bias.id].requires_grad;
    return emit(std::move(out), rg,
                [x, gain, bias, eps, nrows = nrows, rowlen = rowlen](Graph& g, std::uint32_t self) {
                    const Tensor& tx2 = g.nodes_[x.id].value;
                    const Tensor& tg2 = g.nodes_[gain.id].value;
                    const Tensor& go = g.grads_[self];
                    Tensor dx(tx2.shape());
                    Tensor dgain({rowlen});
                    Tensor dbias({rowlen});
                    for (std::size_t r = 0; r < nrows; ++r) {
                        const double* xr = tx2.data().data() + r * rowlen;
                        const double* gr = go.data().data() + r * rowlen;
                        double mu = 0.0;
                        for (std::size_t j = 0; j < rowlen; ++j) mu += xr[j];
                        mu /= rowlen;
                        double var = 0.0;
                        for (std::size_t j = 0; j < rowlen; ++j) var += (xr[j] - mu) * (xr[j] - mu);
                        var /= rowlen;
                        double inv = 1.0 / std::sqrt(var + eps);
                        // dxhat and the two reduction terms
                        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                        for (std::size_t j = 0; j < rowlen; ++j) {
                            double xhat = (xr[j] - mu) * inv;
                            double dxhat = gr[j] * tg2[j];
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                            dgain[j] += gr[j] * xhat;
                            dbias[j] += gr[j];
                        }
                        double* dr = dx.data().data() + r * rowlen;
                        double n = static_cast<double>(rowlen);
                        for (std::size_t j = 0; j < rowlen; ++j) {
                            double xhat = (xr[j] - mu) * inv;
                            double dxhat = gr[j] * tg2[j];
                            dr[j] = inv * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
                        }
                    }
                    if (g.nodes_[x.id].requires_grad) g.accumulate(x.id, dx);
                    if (g.nodes_[gain.id].requires_grad) g.accumulate(gain.id, dgain);
                    if (g.nodes_[bias.id].requires_grad) g.accumulate(bias.id, dbias);
                });
}

Var Graph::gelu(Var a) {
    check(a);
    Tensor out = nodes_[a.id].value;
    for (double& v : out.data()) {
        v = v * 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    }
    require_finite(out, "gelu");
    return emit(std::move(out), nodes_[a.id].requires_grad,
                [a](Graph& g, std::uint32_t self) {
                    const Tensor& tx = g.nodes_[a.id].value;
                    const Tensor& go = g.grads_[self];
                    Tensor da(tx.shape());
                    for (std::size_t i = 0; i < tx.size(); ++i) {
                        double x = tx[i];
                        double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                        da[i] = go[i] * (phi + x * pdf);
                    }
                    g.accumulate(a.id, da);
                });
}

Var Graph::cross_entropy(Var logits, std::size_t target) {
    check(logits);
    const Tensor& tl = nodes_[logits.id].value;
    if (tl.rank() != 1) throw DimensionError("cross_entropy: expected rank-1 logits");
    std::size_t n = tl.size();
    if (n == 0) throw DimensionError("cross_entropy over empty logits");
    if (target >= n) {
        throw IndexError("cross_entropy: target " + std::to_string(target) + " out of range " +
                         std::to_string(n));
    }
    double mx = tl[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, tl[i]);
    double lse = 0.0;
    for (std::size_t i = 0; i < n; ++i) lse += std::exp(tl[i] - mx);
    lse = std::log(lse) + mx;
    Tensor out = Tensor::scalar(lse - tl[target]);
    require_finite(out, "cross_entropy");
    return emit(std::move(out), nodes_[logits.id].requires_grad,
                [logits, target, n](Graph& g, std::uint32_t self) {
                    const Tensor& tl2 = g.nodes_[logits.id].value;
                    double go = g.grads_[self][0];
                    double mx = tl2[0];
                    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, tl2[i]);
                    double z = 0.0;
                    for (std::size_t i = 0; i < n; ++i) z += std::exp(tl2[i] - mx);
                    Tensor da({n});
                    for (std::size_t i = 0; i < n; ++i) {
                        double p = std::exp(tl2[i] - mx) / z;
                        da[i] = go * (p - (i == target ? 1.0 : 0.0));
                    }
                    g.accumulate(logits.id, da);
                });
}

Var Graph::kl_divergence(Var q, Var p) {
    check(q);
    check(p);
    const Tensor& tq = nodes_[q.id].value;
    const Tensor& tp = nodes_[p.id].value;
    if (tq.rank() != 1 || tp.rank() != 1 || tq.size() != tp.size()) {
        throw DimensionError("kl_divergence: expected matching rank-1 distributions");
    }
    validate_distribution(tq, "kl_divergence q");
    validate_distribution(tp, "kl_divergence p");
    std::size_t n = tq.size();
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (tq[i] <= 0.0) continue;  // lim q->0 of q log q = 0
        kl += tq[i] * (std::log(tq[i]) - std::log(std::max(tp[i], kLogClamp)));
    }
    Tensor out = Tensor::scalar(kl);
    require_finite(out, "kl_divergence");
    bool rg = nodes_[q.id].requires_grad || nodes_[p.id].requires_grad;
    return emit(std::move(out), rg, [q, p, n](Graph& g, std::uint32_t self) {
        const Tensor& tq2 = g.nodes_[q.id].value;
        const Tensor& tp2 = g.nodes_[p.id].value;
        double go = g.grads_[self][0];
        if (g.nodes_[p.id].requires_grad) {
            Tensor dp({n});
            for (std::size_t i = 0; i < n; ++i) {
                double pc = std::max(tp2[i], kLogClamp);
                dp[i] = (tp2[i] > kLogClamp) ? go * (-tq2[i] / pc) : 0.0;
            }
            g.accumulate(p.id, dp);
        }
        if (g.nodes_[q.id].requires_grad) {
            Tensor dq({n});
            for (std::size_t i = 0; i < n; ++i) {
                double qc = std::max(tq2[i], kLogClamp);
                double pc = std::max(tp2[i], kLogClamp);
                dq[i] = go * (std::log(qc) - std::log(pc) + 1.0);
            }
            g.accumulate(q.id, dq);
        }
    });
}

// ---------------------------------------------------------------------------
// structural ops

Var Graph::gather_rows(Var table, std::vector<std::size_t> ids) {
    check(table);
    const Tensor& tt = nodes_[table.id].value;
    if (tt.rank() != 2) throw DimensionError("gather_rows: table must be rank 2");
    std::size_t nrows = tt.rows(), d = tt.cols();
    for (std::size_t id : ids) {
        if (id >= nrows) {
            throw IndexError("gather_rows: row " + std::to_string(id) + " out of range " +
                             std::to_string(nrows));
        }
    }
    Tensor out({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) = tt(ids[i], j);
    return emit(std::move(out), nodes_[table.id].requires_grad,
                [table, ids = std::move(ids), nrows, d](Graph& g, std::uint32_t self) {
                    const Tensor& go = g.grads_[self];
                    Tensor dt({nrows, d});
                    for (std::size_t i = 0; i < ids.size(); ++i)
                        for (std::size_t j = 0; j < d; ++j) dt(ids[i], j) += go(i, j);
                    g.accumulate(table.id, dt);
                });
}

Var Graph::slice_rows(Var a, std::size_t begin, std::size_t count) {
    check(a);
    const Tensor& ta = nodes_[a.id].value;
    if (ta.rank() != 2) throw DimensionError("slice_rows: expected rank 2");
    if (begin + count > ta.rows()) {
        throw IndexError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") exceeds " + std::to_string(ta.rows()));
    }
    std::size_t d = ta.cols();
    Tensor out({count, d});
    std::copy(ta.data().begin() + begin * d, ta.data().begin() + (begin + count) * d,
              out.data().begin());
    std::size_t nrows = ta.rows();
    return emit(std::move(out), nodes_[a.id].requires_grad,
                [a, begin, count, nrows, d](Graph& g, std::uint32_t self) {
                    const Tensor& go = g.grads_[self];
                    Tensor da({nrows, d});
                    std::copy(go.data().begin(), go.data().end(), da.data().begin() + begin * d);
                    g.accumulate(a.id, da);
                });
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t count) {
    check(a);
    const Tensor& ta = nodes_[a.id].value;
    if (ta.rank() != 2) throw DimensionError("slice_cols: expected rank 2");
    if (begin + count > ta.cols()) {
        throw IndexError("slice_cols: range exceeds " + std::to_string(ta.cols()) + " columns");
    }
    std::size_t n = ta.rows(), m = ta.cols();
    Tensor out({n, count});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = ta(i, begin + j);
    return emit(std::move(out), nodes_[a.id].requires_grad,
                [a, begin, count, n, m](Graph& g, std::uint32_t self) {
                    const Tensor& go = g.grads_[self];
                    Tensor da({n, m});
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < count; ++j) da(i, begin + j) = go(i, j);
                    g.accumulate(a.id, da);
                });
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw UsageError("concat_rows of zero parts");
    std::size_t d = 0, total = 0;
    bool rg = false;
    for (Var p : parts) {
        check(p);
        const Tensor& t = nodes_[p.id].value;
        if (t.rank() != 2) throw DimensionError("concat_rows: expected rank-2 parts");
        if (d == 0) d = t.cols();
        if (t.cols() != d) throw DimensionError("concat_rows: column mismatch");
        total += t.rows();
        rg = rg || nodes_[p.id].requires_grad;
    }
    Tensor out({total, d});
    std::size_t row = 0;
    for (Var p : parts) {
        const Tensor& t = nodes_[p.id].value;
        std::copy(t.data().begin(), t.data().end(), out.data().begin() + row * d);
        row += t.rows();
    }
    std::vector<Var> parts_copy = parts;
    return emit(std::move(out), rg, [parts = std::move(parts_copy), d](Graph& g, std::uint32_t self) {
        const Tensor& go = g.grads_[self];
        std::size_t row = 0;
        for (Var p : parts) {
            std::size_t r = g.nodes_[p.id].value.rows();
            if (g.nodes_[p.id].requires_grad) {
                Tensor dp({r, d});
                std::copy(go.data().begin() + row * d, go.data().begin() + (row + r) * d,
                          dp.data().begin());
                g.accumulate(p.id, dp);
            }
            row += r;
        }
    });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw UsageError("concat_cols of zero parts");
    std::size_t n = 0, total = 0;
    bool rg = false;
    for (Var p : parts) {
        check(p);
        const Tensor& t = nodes_[p.id].value;
        if (t.rank() != 2) throw DimensionError("concat_cols: expected rank-2 parts");
        if (n == 0) n = t.rows();
        if (t.rows() != n) throw DimensionError("concat_cols: row mismatch");
        total += t.cols();
        rg = rg || nodes_[p.id].requires_grad;
    }
    Tensor out({n, total});
    std::size_t col = 0;
    for (Var p : parts) {
        const Tensor& t = nodes_[p.id].value;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) out(i, col + j) = t(i, j);
        col += t.cols();
    }
    std::vector<Var> parts_copy = parts;
    return emit(std::move(out), rg, [parts = std::move(parts_copy), n](Graph& g, std::uint32_t self) {
        const Tensor& go = g.grads_[self];
        std::size_t col = 0;
        for (Var p : parts) {
            std::size_t c = g.nodes_[p.id].value.cols();
            if (g.nodes_[p.id].requires_grad) {
                Tensor dp({n, c});
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < c; ++j) dp(i, j) = go(i, col + j);
                g.accumulate(p.id, dp);
            }
            col += c;
        }
    });
}

// ---------------------------------------------------------------------------

void Graph::backward(Var root) {
    check(root);
    const Node& r = nodes_[root.id];
    if (r.value.size() != 1) {
        throw UsageError("backward: root must be a scalar, got " + r.value.shape_str());
    }
    if (!r.requires_grad) {
        throw UsageError("backward: loss does not depend on any requires_grad input");
    }
    grads_[root.id] = Tensor::scalar(1.0);
    for (std::uint32_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || grads_[i].size() == 0 || !n.backprop) continue;
        n.backprop(*this, i);
    }
}

double grad_check(const std::function<Var(Graph&, const std::vector<Var>&)>& f,
                  const std::vector<Tensor>& inputs, double h) {
    // Analytic pass.
    std::vector<Tensor> analytic;
    {
        Graph g;
        std::vector<Var> vars;
        vars.reserve(inputs.size());
        for (const Tensor& t : inputs) vars.push_back(g.input(t, true));
        Var loss = f(g, vars);
        g.backward(loss);
        for (Var v : vars) {
            analytic.push_back(g.has_grad(v) ? g.grad(v)
                                             : Tensor::zeros(g.value(v).shape()));
        }
    }
    auto eval = [&](const std::vector<Tensor>& pts) {
        Graph g;
        std::vector<Var> vars;
        vars.reserve(pts.size());
        for (const Tensor& t : pts) vars.push_back(g.input(t, true));
        return g.value(f(g, vars)).item();
    };
    double max_rel = 0.0;
    std::vector<Tensor> work = inputs;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        for (std::size_t i = 0; i < inputs[t].size(); ++i) {
            double orig = work[t][i];
            work[t][i] = orig + h;
            double fp = eval(work);
            work[t][i] = orig - h;
            double fm = eval(work);
            work[t][i] = orig;
            double numeric = (fp - fm) / (2.0 * h);
            double a = analytic[t][i];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace mabsa
