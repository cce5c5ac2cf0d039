#include "mabsa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mabsa/error.hpp"
#include "mabsa/rng.hpp"

namespace mabsa {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

int lambda_index(Task t) {
    switch (t) {
        case Task::MLM: return 0;
        case Task::AOE: return 1;
        case Task::MRM: return 2;
        case Task::AOG: return 3;
        case Task::MSP: return 4;
        default: return -1;
    }
}

}  // namespace

void TrainConfig::validate() const {
    for (double l : lambdas) {
        if (l < 0.0) throw ConfigError("train config: lambdas must be nonnegative");
    }
    if (pretrain_epochs < 1 || finetune_epochs < 1) {
        throw ConfigError("train config: epochs must be >= 1");
    }
    if (pretrain_batch < 1 || finetune_batch < 1) {
        throw ConfigError("train config: batch sizes must be >= 1");
    }
    if (!(lr > 0.0)) throw ConfigError("train config: learning rate must be positive");
    if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) {
        throw ConfigError("train config: mask_rate must be in [0,1]");
    }
    if (task_order.empty()) throw ConfigError("train config: task_order must not be empty");
    for (Task t : task_order) {
        if (lambda_index(t) < 0) {
            throw ConfigError(std::string("train config: ") + task_name(t) +
                              " is not a pre-training task");
        }
    }
}

double task_lambda(const TrainConfig& cfg, Task t) {
    int i = lambda_index(t);
    if (i < 0) return 1.0;  // downstream fine-tuning is unweighted
    return cfg.lambdas[i];
}

// ---------------------------------------------------------------------------
// per-example losses

namespace {

// Sum of pointer cross-entropies over the teacher-forced steps of a target
// sequence; MASC restricts the summed steps to the sentiment slots.
Var pointer_sequence_loss(Graph& g, const BoundParams& bp, Task task, const EncodeResult& enc,
                          const TargetSequence& target, bool* has_terms) {
    const std::size_t T = enc.layout.text_len;
    Var cands = candidate_matrix(g, bp, enc, task);
    std::vector<TargetItem> teacher(target.items.begin(), target.items.end() - 1);
    Var dec_in = decoder_pointer_inputs(g, bp, task, cands, T, teacher);
    Var states = decode_states(g, bp, enc.hidden, dec_in);
    std::vector<Var> terms;
    for (std::size_t t = 0; t < target.items.size(); ++t) {
        if (task == Task::MASC && t % 3 != 2) continue;  // spans and <eos> are forced inputs
        Var h = g.slice_rows(states, 1 + t, 1);
        Var logits = pointer_logits(g, cands, h);
        terms.push_back(g.cross_entropy(logits, candidate_index(task, target.items[t], T)));
    }
    if (has_terms) *has_terms = !terms.empty();
    if (terms.empty()) return g.constant(Tensor::scalar(0.0));
    Var loss = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) loss = g.add(loss, terms[i]);
    return loss;
}

std::vector<SpanTuple> strip_sentiment(const std::vector<SpanTuple>& spans) {
    std::vector<SpanTuple> out = spans;
    for (SpanTuple& s : out) s.sentiment.reset();
    return out;
}

}  // namespace

std::vector<SpanTuple> gold_tuples(Task task, const MultimodalExample& ex) {
    if (!ex.aspects) {
        throw ValidationError(std::string(task_name(task)) + ": example has no aspect labels");
    }
    if (task == Task::MATE) return strip_sentiment(*ex.aspects);
    for (const SpanTuple& a : *ex.aspects) {
        if (!a.sentiment) {
            throw ValidationError(std::string(task_name(task)) +
                                  ": aspect label is missing its sentiment");
        }
    }
    return *ex.aspects;
}

Var example_task_loss(Graph& g, const BoundParams& bp, Task task, const MultimodalExample& ex,
                      const Vocabulary& vocab, const TrainResources& res, const TrainConfig& cfg,
                      std::uint64_t seed) {
    const std::vector<int> tokens = vocab.encode(tokenize(ex.text));
    const auto regions = materialize_regions(ex);

    switch (task) {
        case Task::MLM: {
            MaskedText masked = mask_text(tokens, cfg.mask_rate, seed, vocab);
            EncodeResult enc = encode(g, bp, masked.corrupted, regions);
            std::vector<int> dec_ids = {tok::kBos, tok::kMlm};
            dec_ids.insert(dec_ids.end(), masked.original.begin(), masked.original.end() - 1);
            Var states = decode_states(g, bp, enc.hidden, decoder_token_inputs(g, bp, dec_ids));
            std::vector<Var> terms;
            for (std::size_t i = 0; i < masked.original.size(); ++i) {
                if (cfg.mlm_masked_only &&
                    !std::binary_search(masked.positions.begin(), masked.positions.end(), i)) {
                    continue;
                }
                Var h = g.slice_rows(states, 1 + i, 1);
                terms.push_back(g.cross_entropy(lm_logits(g, bp, h),
                                                static_cast<std::size_t>(masked.original[i])));
            }
            if (terms.empty()) return g.constant(Tensor::scalar(0.0));
            Var loss = terms[0];
            for (std::size_t i = 1; i < terms.size(); ++i) loss = g.add(loss, terms[i]);
            return loss;
        }
        case Task::AOE: {
            if (!ex.aspects || !ex.opinions) {
                throw ConfigError("aoe: example lacks aspect/opinion supervision");
            }
            EncodeResult enc = encode(g, bp, tokens, regions);
            TargetSequence target =
                build_aoe_target(strip_sentiment(*ex.aspects), strip_sentiment(*ex.opinions));
            return pointer_sequence_loss(g, bp, Task::AOE, enc, target, nullptr);
        }
        case Task::MRM: {
            RegionMaskPlan plan = mask_regions(regions.size(), cfg.mask_rate, seed);
            EncodeResult enc = encode(g, bp, tokens, regions, &plan);
            std::vector<int> dec_ids = {tok::kBos, tok::kMrm};
            for (std::size_t i = 0; i < plan.region_count; ++i) {
                dec_ids.push_back(plan.is_masked(i) ? tok::kZero : tok::kFeat);
            }
            Var states = decode_states(g, bp, enc.hidden, decoder_token_inputs(g, bp, dec_ids));
            Var loss = g.constant(Tensor::scalar(0.0));
            for (std::size_t z : plan.masked) {
                Var h = g.slice_rows(states, 2 + z, 1);
                Var p = g.softmax(mrm_logits(g, bp, h));
                Var q = g.constant(Tensor({ex.region_class_dists[z].size()},
                                          ex.region_class_dists[z]));
                loss = g.add(loss, g.kl_divergence(q, p));
            }
            return g.scale(loss, 1.0 / static_cast<double>(plan.masked.size()));
        }
        case Task::AOG: {
            if (!ex.anp_dist) throw ConfigError("aog: example lacks anp_dist supervision");
            std::vector<int> anp_ids = vocab.encode(select_anp(*ex.anp_dist, res.anps));
            EncodeResult enc = encode(g, bp, tokens, regions);
            std::vector<int> dec_ids = {tok::kBos, tok::kAog};
            dec_ids.insert(dec_ids.end(), anp_ids.begin(), anp_ids.end());
            Var states = decode_states(g, bp, enc.hidden, decoder_token_inputs(g, bp, dec_ids));
            std::vector<int> targets = anp_ids;
            targets.push_back(tok::kEos);
            Var loss = g.constant(Tensor::scalar(0.0));
            for (std::size_t i = 0; i < targets.size(); ++i) {
                Var h = g.slice_rows(states, 1 + i, 1);
                loss = g.add(loss, g.cross_entropy(lm_logits(g, bp, h),
                                                   static_cast<std::size_t>(targets[i])));
            }
            return loss;
        }
        case Task::MSP: {
            if (!ex.sentiment) throw ConfigError("msp: example lacks a sentiment label");
            EncodeResult enc = encode(g, bp, tokens, regions);
            Var states = decode_states(g, bp, enc.hidden,
                                       decoder_token_inputs(g, bp, {tok::kBos, tok::kMsp}));
            Var h = g.slice_rows(states, 1, 1);
            return g.cross_entropy(msp_logits(g, bp, h),
                                   static_cast<std::size_t>(sentiment_index(*ex.sentiment)));
        }
        case Task::JMASA:
        case Task::MATE:
        case Task::MASC: {
            EncodeResult enc = encode(g, bp, tokens, regions);
            TargetSequence target = build_downstream_target(task, gold_tuples(task, ex));
            return pointer_sequence_loss(g, bp, task, enc, target, nullptr);
        }
    }
    throw UsageError("example_task_loss: bad task");
}

Var build_batch_loss(Graph& g, const BoundParams& bp, Task task, const Corpus& corpus,
                     const std::vector<std::size_t>& batch, const Vocabulary& vocab,
                     const TrainResources& res, const TrainConfig& cfg, std::uint64_t seed) {
    if (batch.empty()) throw UsageError("build_batch_loss: empty batch");
    Var loss = g.constant(Tensor::scalar(0.0));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        std::uint64_t ex_seed = derive_seed(seed, {static_cast<std::uint64_t>(batch[k])});
        loss = g.add(loss, example_task_loss(g, bp, task, corpus.examples[batch[k]], vocab, res,
                                             cfg, ex_seed));
    }
    return g.scale(loss, 1.0 / static_cast<double>(batch.size()));
}

double compute_task_loss(Task task, const Corpus& corpus, const std::vector<std::size_t>& batch,
                         const ModelParams& params, const Vocabulary& vocab,
                         const TrainResources& res, const TrainConfig& cfg, std::uint64_t seed) {
    Graph g;
    BoundParams bp = bind_params(g, params, false);
    return g.value(build_batch_loss(g, bp, task, corpus, batch, vocab, res, cfg, seed)).item();
}

// ---------------------------------------------------------------------------
// optimizer

GradMap collect_grads(const Graph& g, const BoundParams& bp) {
    GradMap out;
    out.reserve(bp.registry.size());
    for (const auto& [name, var] : bp.registry) {
        out.emplace_back(name, g.has_grad(var) ? g.grad(var) : Tensor::zeros(g.value(var).shape()));
    }
    return out;
}

double clip_gradients(GradMap& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, t] : grads) {
        for (double v : t.data()) sq += v * v;
    }
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double s = max_norm / norm;
        for (auto& [name, t] : grads) {
            for (double& v : t.data()) v *= s;
        }
    }
    return norm;
}

void optimizer_step(ModelParams& params, const GradMap& grads, OptimizerState& state, double lr) {
    if (state.m.empty()) {
        for (const auto& [name, t] : grads) {
            state.m.emplace_back(name, Tensor::zeros(t.shape()));
            state.v.emplace_back(name, Tensor::zeros(t.shape()));
        }
    }
    if (state.m.size() != grads.size()) {
        throw TrainingError("optimizer state does not match gradient count");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    std::size_t gi = 0;
    params.for_each([&](const std::string& name, Tensor& t) {
        if (gi >= grads.size() || grads[gi].first != name) {
            throw TrainingError("gradient order does not match parameters at " + name);
        }
        const Tensor& grad = grads[gi].second;
        if (!grad.same_shape(t)) {
            throw TrainingError("gradient shape mismatch for " + name);
        }
        if (!grad.all_finite()) {
            throw TrainingError("non-finite gradient for parameter " + name);
        }
        Tensor& m = state.m[gi].second;
        Tensor& v = state.v[gi].second;
        for (std::size_t i = 0; i < t.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            t[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        ++gi;
    });
}

// ---------------------------------------------------------------------------
// history

std::string history_to_csv(const std::vector<HistoryRow>& rows) {
    std::string out = "epoch,task,loss,P,R,F1,Acc\n";
    for (const HistoryRow& r : rows) {
        out += std::to_string(r.epoch) + "," + r.task + "," + fmt_double(r.weighted_loss) + ",";
        if (r.has_metrics) {
            out += fmt_double(r.precision);
            out += ",";
            out += fmt_double(r.recall);
            out += ",";
            out += fmt_double(r.f1);
            out += ",";
            out += fmt_double(r.acc);
        } else {
            out += ",,,";
        }
        out += "\n";
    }
    return out;
}

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write history CSV: " + path);
    out << history_to_csv(rows);
}

// ---------------------------------------------------------------------------
// training loops

namespace {

void check_supervision(const Corpus& corpus, const TrainConfig& cfg, const TrainResources& res) {
    for (Task t : cfg.task_order) {
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const MultimodalExample& ex = corpus.examples[i];
            auto fail = [&](const char* field) {
                throw ConfigError(std::string("pretrain: task ") + task_name(t) + " needs field '" +
                                  field + "' but example " + std::to_string(i) + " lacks it");
            };
            switch (t) {
                case Task::AOE:
                    if (!ex.aspects || !ex.opinions) fail("aspects/opinions");
                    break;
                case Task::AOG:
                    if (!ex.anp_dist) fail("anp_dist");
                    break;
                case Task::MSP:
                    if (!ex.sentiment) fail("sentiment");
                    break;
                default:
                    break;
            }
        }
        if (t == Task::AOG && res.anps.size() != corpus.anp_count) {
            throw ConfigError("pretrain: ANP vocabulary size " + std::to_string(res.anps.size()) +
                              " does not match corpus anp_dist size " +
                              std::to_string(corpus.anp_count));
        }
    }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = std::mt19937_64(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace

PretrainResult pretrain(const Corpus& corpus, ModelParams params, const TrainConfig& cfg,
                        const TrainResources& res, const Vocabulary& vocab,
                        const std::string& out_dir) {
    cfg.validate();
    if (corpus.size() == 0) throw ConfigError("pretrain: empty corpus");
    check_supervision(corpus, cfg, res);

    PretrainResult result;
    OptimizerState opt;
    const std::size_t n = corpus.size();
    const std::size_t batches = (n + cfg.pretrain_batch - 1) / cfg.pretrain_batch;

    for (std::size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
        // Each task walks the corpus in its own shuffled order.
        std::vector<std::vector<std::size_t>> orders;
        for (std::size_t ti = 0; ti < cfg.task_order.size(); ++ti) {
            orders.push_back(shuffled_indices(n, derive_seed(cfg.seed, {0xe90c, epoch, ti})));
        }
        for (std::size_t b = 0; b < batches; ++b) {
            for (std::size_t ti = 0; ti < cfg.task_order.size(); ++ti) {
                Task task = cfg.task_order[ti];
                std::size_t lo = b * cfg.pretrain_batch;
                std::size_t hi = std::min(lo + cfg.pretrain_batch, n);
                std::vector<std::size_t> batch(orders[ti].begin() + lo, orders[ti].begin() + hi);
                std::uint64_t step_seed = derive_seed(cfg.seed, {0xba7c, epoch, b, ti});

                double lambda = task_lambda(cfg, task);
                Graph g;
                BoundParams bp = bind_params(g, params, lambda > 0.0);
                Var loss = build_batch_loss(g, bp, task, corpus, batch, vocab, res, cfg, step_seed);
                double raw = g.value(loss).item();
                if (lambda > 0.0) {
                    Var weighted = g.scale(loss, lambda);
                    g.backward(weighted);
                    GradMap grads = collect_grads(g, bp);
                    clip_gradients(grads, cfg.clip_norm);
                    optimizer_step(params, grads, opt, cfg.lr);
                }
                HistoryRow row;
                row.epoch = epoch;
                row.task = task_name(task);
                row.loss = raw;
                row.weighted_loss = lambda * raw;
                result.history.push_back(row);
            }
        }
        if (!out_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03zu.ckpt", epoch);
            save_checkpoint((std::filesystem::path(out_dir) / name).string(), params, vocab);
        }
    }
    result.params = std::move(params);
    return result;
}

MetricReport evaluate(Task task, const Corpus& corpus, const ModelParams& params,
                      const Vocabulary& vocab, bool restricted_masc) {
    if (!is_downstream_task(task)) {
        throw UsageError(std::string("evaluate: not a downstream task: ") + task_name(task));
    }
    std::vector<std::vector<SpanTuple>> preds, golds;
    for (const MultimodalExample& ex : corpus.examples) {
        std::vector<SpanTuple> gold = gold_tuples(task, ex);
        const std::vector<SpanTuple>* masc_spans = nullptr;
        std::vector<SpanTuple> spans_only;
        if (task == Task::MASC) {
            spans_only = gold;
            masc_spans = &spans_only;
        }
        GenerateResult gen = generate(task, params, vocab, ex, 0, masc_spans);
        ParsedTarget parsed = parse_target(task, gen.seq.items);
        preds.push_back(parsed.aspects);
        golds.push_back(gold);
    }
    MetricReport report;
    report.task = task;
    report.example_count = corpus.size();
    Prf prf = micro_prf(preds, golds);
    report.precision = prf.precision;
    report.recall = prf.recall;
    report.f1 = prf.f1;
    if (task == Task::MASC) report.acc = accuracy(preds, golds, restricted_masc);
    return report;
}

FinetuneResult finetune(Task task, const Corpus& train, const Corpus& dev, ModelParams params,
                        const TrainConfig& cfg, const Vocabulary& vocab) {
    cfg.validate();
    if (!is_downstream_task(task)) {
        throw UsageError(std::string("finetune: not a downstream task: ") + task_name(task));
    }
    if (train.size() == 0) throw ConfigError("finetune: empty training corpus");
    for (std::size_t i = 0; i < train.size(); ++i) gold_tuples(task, train.examples[i]);

    FinetuneResult result;
    OptimizerState opt;
    TrainResources res;  // unused by downstream losses
    const std::size_t n = train.size();
    const std::size_t batches = (n + cfg.finetune_batch - 1) / cfg.finetune_batch;
    double best = -1.0;

    for (std::size_t epoch = 1; epoch <= cfg.finetune_epochs; ++epoch) {
        std::vector<std::size_t> order =
            shuffled_indices(n, derive_seed(cfg.seed, {0xf17e, epoch}));
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::size_t lo = b * cfg.finetune_batch;
            std::size_t hi = std::min(lo + cfg.finetune_batch, n);
            std::vector<std::size_t> batch(order.begin() + lo, order.begin() + hi);
            std::uint64_t step_seed = derive_seed(cfg.seed, {0xfb, epoch, b});

            Graph g;
            BoundParams bp = bind_params(g, params, true);
            Var loss = build_batch_loss(g, bp, task, train, batch, vocab, res, cfg, step_seed);
            double raw = g.value(loss).item();
            epoch_loss += raw * static_cast<double>(batch.size());
            if (g.requires_grad(loss)) {
                g.backward(loss);
                GradMap grads = collect_grads(g, bp);
                clip_gradients(grads, cfg.clip_norm);
                optimizer_step(params, grads, opt, cfg.lr);
            }
        }
        HistoryRow row;
        row.epoch = epoch;
        row.task = task_name(task);
        row.loss = epoch_loss / static_cast<double>(n);
        row.weighted_loss = row.loss;
        if (dev.size() > 0) {
            MetricReport report = evaluate(task, dev, params, vocab);
            row.has_metrics = true;
            row.precision = report.precision;
            row.recall = report.recall;
            row.f1 = report.f1;
            row.acc = report.acc;
            double score = task == Task::MASC ? report.acc : report.f1;
            if (score > best) {
                best = score;
                result.best_params = params;
                result.best_metric = score;
                result.best_epoch = epoch;
            }
        }
        result.history.push_back(row);
    }
    if (best < 0.0) {
        result.best_params = std::move(params);
        result.best_epoch = cfg.finetune_epochs;
    }
    return result;
}

Corpus subsample(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
    Corpus out = corpus;
    out.examples.clear();
    std::vector<std::size_t> order = shuffled_indices(corpus.size(), derive_seed(seed, {0x5ab5}));
    for (std::size_t i = 0; i < std::min(n, corpus.size()); ++i) {
        out.examples.push_back(corpus.examples[order[i]]);
    }
    return out;
}

}  // namespace mabsa
