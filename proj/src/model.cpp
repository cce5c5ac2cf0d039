#include "mabsa/model.hpp"

#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "mabsa/error.hpp"
#include "mabsa/rng.hpp"

namespace mabsa {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

void ModelConfig::validate() const {
    if (hidden == 0 || heads == 0 || hidden % heads != 0) {
        throw ConfigError("model config: hidden must be a positive multiple of heads");
    }
    if (enc_layers < 1 || dec_layers < 1) throw ConfigError("model config: layers must be >= 1");
    if (ffn == 0 || region_count == 0 || class_count == 0 || feature_dim == 0) {
        throw ConfigError("model config: ffn/region_count/class_count/feature_dim must be >= 1");
    }
    if (vocab_size < tok::kSpecialCount) {
        throw ConfigError("model config: vocab_size must cover the special tokens");
    }
    if (max_seq_len < region_count + 6) {
        throw ConfigError("model config: max_seq_len too small for the region count");
    }
}

std::string ModelConfig::to_json() const {
    json j;
    j["hidden"] = hidden;
    j["enc_layers"] = enc_layers;
    j["dec_layers"] = dec_layers;
    j["heads"] = heads;
    j["ffn"] = ffn;
    j["region_count"] = region_count;
    j["class_count"] = class_count;
    j["feature_dim"] = feature_dim;
    j["vocab_size"] = vocab_size;
    j["max_seq_len"] = max_seq_len;
    j["max_gen_len"] = max_gen_len;
    j["region_positions"] = region_positions;
    j["ln_eps"] = ln_eps;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw LoadError(std::string("model config: malformed JSON: ") + e.what());
    }
    ModelConfig cfg;
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.enc_layers = j.value("enc_layers", cfg.enc_layers);
    cfg.dec_layers = j.value("dec_layers", cfg.dec_layers);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.ffn = j.value("ffn", cfg.ffn);
    cfg.region_count = j.value("region_count", cfg.region_count);
    cfg.class_count = j.value("class_count", cfg.class_count);
    cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
    cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
    cfg.max_seq_len = j.value("max_seq_len", cfg.max_seq_len);
    cfg.max_gen_len = j.value("max_gen_len", cfg.max_gen_len);
    cfg.region_positions = j.value("region_positions", cfg.region_positions);
    cfg.ln_eps = j.value("ln_eps", cfg.ln_eps);
    return cfg;
}

// ---------------------------------------------------------------------------
// parameters

namespace {

template <typename Params, typename Fn>
void visit_attn(const std::string& prefix, Params& a, Fn&& fn) {
    fn(prefix + "wq", a.wq);
    fn(prefix + "bq", a.bq);
    fn(prefix + "wk", a.wk);
    fn(prefix + "bk", a.bk);
    fn(prefix + "wv", a.wv);
    fn(prefix + "bv", a.bv);
    fn(prefix + "wo", a.wo);
    fn(prefix + "bo", a.bo);
}

template <typename Params, typename Fn>
void visit_ln(const std::string& prefix, Params& l, Fn&& fn) {
    fn(prefix + "gain", l.gain);
    fn(prefix + "bias", l.bias);
}

template <typename Params, typename Fn>
void visit_ffn(const std::string& prefix, Params& f, Fn&& fn) {
    fn(prefix + "w1", f.w1);
    fn(prefix + "b1", f.b1);
    fn(prefix + "w2", f.w2);
    fn(prefix + "b2", f.b2);
}

template <typename Params, typename Fn>
void visit_params(Params& p, Fn&& fn) {
    fn("tok_embed", p.tok_embed);
    fn("pos_embed", p.pos_embed);
    fn("dec_pos_embed", p.dec_pos_embed);
    fn("type_embed", p.type_embed);
    fn("proj.w", p.proj_w);
    fn("proj.b", p.proj_b);
    for (std::size_t i = 0; i < p.encoder.size(); ++i) {
        const std::string pre = "enc." + std::to_string(i) + ".";
        visit_attn(pre + "attn.", p.encoder[i].attn, fn);
        visit_ln(pre + "ln1.", p.encoder[i].ln1, fn);
        visit_ffn(pre + "ffn.", p.encoder[i].ffn, fn);
        visit_ln(pre + "ln2.", p.encoder[i].ln2, fn);
    }
    for (std::size_t i = 0; i < p.decoder.size(); ++i) {
        const std::string pre = "dec." + std::to_string(i) + ".";
        visit_attn(pre + "self.", p.decoder[i].self_attn, fn);
        visit_ln(pre + "ln1.", p.decoder[i].ln1, fn);
        visit_attn(pre + "cross.", p.decoder[i].cross_attn, fn);
        visit_ln(pre + "ln2.", p.decoder[i].ln2, fn);
        visit_ffn(pre + "ffn.", p.decoder[i].ffn, fn);
        visit_ln(pre + "ln3.", p.decoder[i].ln3, fn);
    }
    fn("mrm.w1", p.mrm_w1);
    fn("mrm.b1", p.mrm_b1);
    fn("mrm.w2", p.mrm_w2);
    fn("mrm.b2", p.mrm_b2);
    fn("msp.w1", p.msp_w1);
    fn("msp.b1", p.msp_b1);
    fn("msp.w2", p.msp_w2);
    fn("msp.b2", p.msp_b2);
}

}  // namespace

void ModelParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
    visit_params(*this, fn);
}

void ModelParams::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
    visit_params(*this, fn);
}

std::size_t ModelParams::tensor_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor&) { ++n; });
    return n;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const std::size_t d = cfg.hidden;

    auto attn = [&]() {
        AttnParams a;
        a.wq = Tensor({d, d});
        a.bq = Tensor({d});
        a.wk = Tensor({d, d});
        a.bk = Tensor({d});
        a.wv = Tensor({d, d});
        a.bv = Tensor({d});
        a.wo = Tensor({d, d});
        a.bo = Tensor({d});
        return a;
    };
    auto ln = [&]() {
        LayerNormParams l;
        l.gain = Tensor::full({d}, 1.0);
        l.bias = Tensor({d});
        return l;
    };
    auto ffn = [&]() {
        FfnParams f;
        f.w1 = Tensor({cfg.ffn, d});
        f.b1 = Tensor({cfg.ffn});
        f.w2 = Tensor({d, cfg.ffn});
        f.b2 = Tensor({d});
        return f;
    };

    p.tok_embed = Tensor({cfg.vocab_size, d});
    p.pos_embed = Tensor({cfg.max_seq_len, d});
    p.dec_pos_embed = Tensor({cfg.max_seq_len, d});
    p.type_embed = Tensor({2, d});
    p.proj_w = Tensor({d, cfg.feature_dim});
    p.proj_b = Tensor({d});
    for (std::size_t i = 0; i < cfg.enc_layers; ++i) p.encoder.push_back({attn(), ln(), ffn(), ln()});
    for (std::size_t i = 0; i < cfg.dec_layers; ++i) {
        p.decoder.push_back({attn(), ln(), attn(), ln(), ffn(), ln()});
    }
    p.mrm_w1 = Tensor({d, d});
    p.mrm_b1 = Tensor({d});
    p.mrm_w2 = Tensor({cfg.class_count, d});
    p.mrm_b2 = Tensor({cfg.class_count});
    p.msp_w1 = Tensor({d, d});
    p.msp_b1 = Tensor({d});
    p.msp_w2 = Tensor({3, d});
    p.msp_b2 = Tensor({3});

    // Uniform (-1/sqrt(d), 1/sqrt(d)) for weights and embeddings; biases stay
    // zero and layer-norm gains stay one.
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    auto rng = make_rng(seed, {0x1417});
    p.for_each([&](const std::string&, Tensor& t) {
        if (t.rank() >= 2) {
            for (double& v : t.data()) v = (2.0 * unit_double(rng()) - 1.0) * bound;
        }
        t.requires_grad = true;
    });
    return p;
}

BoundParams bind_params(Graph& g, const ModelParams& params, bool requires_grad) {
    std::vector<std::pair<std::string, Var>> registry;
    params.for_each([&](const std::string& name, const Tensor& t) {
        registry.emplace_back(name, g.input(t, requires_grad));
    });
    return bind_param_vars(params.config, std::move(registry));
}

BoundParams bind_param_vars(const ModelConfig& cfg,
                            std::vector<std::pair<std::string, Var>> registry) {
    BoundParams bp;
    bp.config = &cfg;
    std::unordered_map<std::string, Var> by_name;
    for (const auto& [name, v] : registry) by_name.emplace(name, v);
    bp.registry = std::move(registry);
    auto at = [&](const std::string& n) {
        auto it = by_name.find(n);
        if (it == by_name.end()) throw UsageError("bind_param_vars: missing parameter " + n);
        return it->second;
    };
    bp.tok_embed = at("tok_embed");
    bp.pos_embed = at("pos_embed");
    bp.dec_pos_embed = at("dec_pos_embed");
    bp.type_embed = at("type_embed");
    bp.proj_w = at("proj.w");
    bp.proj_b = at("proj.b");
    auto bind_attn = [&](const std::string& pre) {
        return BoundAttn{at(pre + "wq"), at(pre + "bq"), at(pre + "wk"), at(pre + "bk"),
                         at(pre + "wv"), at(pre + "bv"), at(pre + "wo"), at(pre + "bo")};
    };
    auto bind_ln = [&](const std::string& pre) { return BoundLn{at(pre + "gain"), at(pre + "bias")}; };
    auto bind_ffn = [&](const std::string& pre) {
        return BoundFfn{at(pre + "w1"), at(pre + "b1"), at(pre + "w2"), at(pre + "b2")};
    };
    for (std::size_t i = 0; i < cfg.enc_layers; ++i) {
        const std::string pre = "enc." + std::to_string(i) + ".";
        bp.enc.push_back({bind_attn(pre + "attn."), bind_ln(pre + "ln1."), bind_ffn(pre + "ffn."),
                          bind_ln(pre + "ln2.")});
    }
    for (std::size_t i = 0; i < cfg.dec_layers; ++i) {
        const std::string pre = "dec." + std::to_string(i) + ".";
        bp.dec.push_back({bind_attn(pre + "self."), bind_ln(pre + "ln1."),
                          bind_attn(pre + "cross."), bind_ln(pre + "ln2."),
                          bind_ffn(pre + "ffn."), bind_ln(pre + "ln3.")});
    }
    bp.mrm_w1 = at("mrm.w1");
    bp.mrm_b1 = at("mrm.b1");
    bp.mrm_w2 = at("mrm.w2");
    bp.mrm_b2 = at("mrm.b2");
    bp.msp_w1 = at("msp.w1");
    bp.msp_b1 = at("msp.b1");
    bp.msp_w2 = at("msp.w2");
    bp.msp_b2 = at("msp.b2");
    return bp;
}

FeatureVars BoundParams::feature_vars() const {
    FeatureVars fv;
    fv.proj_w = proj_w;
    fv.proj_b = proj_b;
    fv.tok_embed = tok_embed;
    fv.pos_embed = pos_embed;
    fv.type_embed = type_embed;
    fv.region_positions = config->region_positions;
    return fv;
}

// ---------------------------------------------------------------------------
// transformer pieces

namespace {

Var linear(Graph& g, Var x, Var w, Var b) {
    return g.add_row_vector(g.matmul(x, g.transpose(w)), b);
}

Var attention(Graph& g, const BoundAttn& a, std::size_t heads, Var q_in, Var kv_in,
              const Var* additive_mask) {
    Var q = linear(g, q_in, a.wq, a.bq);
    Var k = linear(g, kv_in, a.wk, a.bk);
    Var v = linear(g, kv_in, a.wv, a.bv);
    const std::size_t d = g.value(q).cols();
    const std::size_t dh = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = g.slice_cols(q, h * dh, dh);
        Var kh = g.slice_cols(k, h * dh, dh);
        Var vh = g.slice_cols(v, h * dh, dh);
        Var scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt);
        if (additive_mask) scores = g.add(scores, *additive_mask);
        outs.push_back(g.matmul(g.softmax(scores), vh));
    }
    Var o = outs.size() == 1 ? outs[0] : g.concat_cols(outs);
    return linear(g, o, a.wo, a.bo);
}

Var ffn_block(Graph& g, const BoundFfn& f, Var x) {
    return linear(g, g.gelu(linear(g, x, f.w1, f.b1)), f.w2, f.b2);
}

Var encoder_layer(Graph& g, const BoundEncLayer& l, std::size_t heads, double eps, Var x) {
    Var x1 = g.layer_norm(g.add(x, attention(g, l.attn, heads, x, x, nullptr)), l.ln1.gain,
                          l.ln1.bias, eps);
    return g.layer_norm(g.add(x1, ffn_block(g, l.ffn, x1)), l.ln2.gain, l.ln2.bias, eps);
}

Var decoder_layer(Graph& g, const BoundDecLayer& l, std::size_t heads, double eps, Var x,
                  Var enc_hidden, Var causal_mask) {
    Var x1 = g.layer_norm(g.add(x, attention(g, l.self_attn, heads, x, x, &causal_mask)),
                          l.ln1.gain, l.ln1.bias, eps);
    Var x2 = g.layer_norm(g.add(x1, attention(g, l.cross_attn, heads, x1, enc_hidden, nullptr)),
                          l.ln2.gain, l.ln2.bias, eps);
    return g.layer_norm(g.add(x2, ffn_block(g, l.ffn, x2)), l.ln3.gain, l.ln3.bias, eps);
}

Tensor causal_mask_tensor(std::size_t n) {
    Tensor m({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m(i, j) = -1e9;
    return m;
}

Var last_row(Graph& g, Var states) {
    return g.slice_rows(states, g.value(states).rows() - 1, 1);
}

Var mlp_head(Graph& g, Var w1, Var b1, Var w2, Var b2, Var h_row) {
    Var hidden = g.gelu(linear(g, h_row, w1, b1));
    Var logits = linear(g, hidden, w2, b2);
    return g.reshape(logits, {g.value(logits).cols()});
}

}  // namespace

EncodeResult encode(Graph& g, const BoundParams& bp, const std::vector<int>& token_ids,
                    const std::vector<std::vector<double>>& region_features,
                    const RegionMaskPlan* region_mask) {
    const ModelConfig& cfg = *bp.config;
    if (token_ids.empty()) throw ValidationError("encode: empty token sequence");
    if (region_features.empty()) throw ValidationError("encode: no region features");
    const std::size_t R = region_features.size();
    const std::size_t fd = region_features[0].size();
    const std::size_t L = R + token_ids.size() + 4;
    if (L > cfg.max_seq_len) {
        throw CapacityError("encoder input length " + std::to_string(L) + " exceeds max_seq_len " +
                            std::to_string(cfg.max_seq_len));
    }
    Tensor regions({R, fd});
    for (std::size_t i = 0; i < R; ++i) {
        if (region_features[i].size() != fd) {
            throw DimensionError("encode: inconsistent region feature dims");
        }
        if (region_mask && region_mask->is_masked(i)) continue;  // zero vector stays
        for (std::size_t j = 0; j < fd; ++j) regions(i, j) = region_features[i][j];
    }
    AssembledInput in = assemble_input(g, bp.feature_vars(), g.constant(std::move(regions)),
                                       token_ids);
    Var x = in.embedded;
    for (const BoundEncLayer& l : bp.enc) x = encoder_layer(g, l, cfg.heads, cfg.ln_eps, x);

    EncodeResult out;
    out.hidden = x;
    out.layout = in.layout;
    out.token_embeds = in.token_embeds;
    out.visual = g.slice_rows(x, 1, R);
    out.text = g.slice_rows(x, in.layout.text_begin(), in.layout.text_len);
    out.text_avg = g.scale(g.add(in.token_embeds, out.text), 0.5);
    return out;
}

Var candidate_matrix(Graph& g, const BoundParams& bp, const EncodeResult& enc, Task task) {
    const auto& specials = candidate_specials(task);
    std::vector<std::size_t> ids(specials.begin(), specials.end());
    return g.concat_rows({enc.text_avg, g.gather_rows(bp.tok_embed, ids)});
}

Var decode_states(Graph& g, const BoundParams& bp, Var enc_hidden, Var dec_embedded) {
    const ModelConfig& cfg = *bp.config;
    const std::size_t S = g.value(dec_embedded).rows();
    if (S == 0) throw UsageError("decode: empty decoder prefix");
    Var mask = g.constant(causal_mask_tensor(S));
    Var x = dec_embedded;
    for (const BoundDecLayer& l : bp.dec) {
        x = decoder_layer(g, l, cfg.heads, cfg.ln_eps, x, enc_hidden, mask);
    }
    return x;
}

namespace {

Var add_dec_positions(Graph& g, const BoundParams& bp, Var rows) {
    const std::size_t S = g.value(rows).rows();
    if (S > bp.config->max_seq_len) {
        throw CapacityError("decoder prefix length " + std::to_string(S) + " exceeds max_seq_len");
    }
    return g.add(rows, g.slice_rows(bp.dec_pos_embed, 0, S));
}

}  // namespace

Var decoder_token_inputs(Graph& g, const BoundParams& bp, const std::vector<int>& token_ids) {
    if (token_ids.empty()) throw UsageError("decoder prefix must be non-empty");
    std::vector<std::size_t> ids(token_ids.begin(), token_ids.end());
    return add_dec_positions(g, bp, g.gather_rows(bp.tok_embed, ids));
}

Var decoder_pointer_inputs(Graph& g, const BoundParams& bp, Task task, Var candidates,
                           std::size_t T, const std::vector<TargetItem>& items) {
    std::vector<Var> rows;
    rows.reserve(items.size() + 2);
    rows.push_back(g.gather_rows(bp.tok_embed, {tok::kBos}));
    rows.push_back(g.gather_rows(bp.tok_embed, {static_cast<std::size_t>(task_token(task))}));
    for (const TargetItem& it : items) {
        rows.push_back(g.slice_rows(candidates, candidate_index(task, it, T), 1));
    }
    return add_dec_positions(g, bp, g.concat_rows(rows));
}

Var pointer_logits(Graph& g, Var candidates, Var h_row) {
    const std::size_t d = g.value(candidates).cols();
    Var col = g.reshape(h_row, {d, 1});
    return g.reshape(g.matmul(candidates, col), {g.value(candidates).rows()});
}

Var lm_logits(Graph& g, const BoundParams& bp, Var h_row) {
    return pointer_logits(g, bp.tok_embed, h_row);
}

Var mrm_logits(Graph& g, const BoundParams& bp, Var h_row) {
    return mlp_head(g, bp.mrm_w1, bp.mrm_b1, bp.mrm_w2, bp.mrm_b2, h_row);
}

Var msp_logits(Graph& g, const BoundParams& bp, Var h_row) {
    return mlp_head(g, bp.msp_w1, bp.msp_b1, bp.msp_w2, bp.msp_b2, h_row);
}

// ---------------------------------------------------------------------------
// spec-facing wrappers (fresh graph, no gradients)

namespace {

struct EvalContext {
    Graph g;
    BoundParams bp;
    EncodeResult enc;
    std::vector<int> token_ids;
};

EvalContext make_context(const ModelParams& params, const Vocabulary& vocab,
                         const MultimodalExample& ex, const RegionMaskPlan* plan = nullptr) {
    EvalContext ctx;
    ctx.bp = bind_params(ctx.g, params, false);
    ctx.token_ids = vocab.encode(tokenize(ex.text));
    ctx.enc = encode(ctx.g, ctx.bp, ctx.token_ids, materialize_regions(ex), plan);
    return ctx;
}

}  // namespace

Tensor pointer_distribution(const ModelParams& params, const Vocabulary& vocab,
                            const MultimodalExample& ex, Task task,
                            const std::vector<TargetItem>& prefix) {
    EvalContext ctx = make_context(params, vocab, ex);
    Var cands = candidate_matrix(ctx.g, ctx.bp, ctx.enc, task);
    Var dec_in = decoder_pointer_inputs(ctx.g, ctx.bp, task, cands, ctx.enc.layout.text_len, prefix);
    Var states = decode_states(ctx.g, ctx.bp, ctx.enc.hidden, dec_in);
    Var dist = ctx.g.softmax(pointer_logits(ctx.g, cands, last_row(ctx.g, states)));
    return ctx.g.value(dist);
}

Tensor lm_distribution_of(const ModelParams& params, const Tensor& hidden_row) {
    Graph g;
    BoundParams bp = bind_params(g, params, false);
    Var h = g.constant(hidden_row.rank() == 1
                           ? Tensor({1, hidden_row.size()}, hidden_row.data())
                           : hidden_row);
    return g.value(g.softmax(lm_logits(g, bp, h)));
}

std::vector<Tensor> mrm_predict(const ModelParams& params, const Vocabulary& vocab,
                                const MultimodalExample& ex, const RegionMaskPlan& plan) {
    if (plan.masked.empty()) throw UsageError("mrm_predict: plan has no masked regions");
    EvalContext ctx = make_context(params, vocab, ex, &plan);
    std::vector<int> dec_ids = {tok::kBos, tok::kMrm};
    for (std::size_t i = 0; i < plan.region_count; ++i) {
        dec_ids.push_back(plan.is_masked(i) ? tok::kZero : tok::kFeat);
    }
    Var states = decode_states(ctx.g, ctx.bp, ctx.enc.hidden,
                               decoder_token_inputs(ctx.g, ctx.bp, dec_ids));
    std::vector<Tensor> out;
    for (std::size_t i : plan.masked) {
        Var h = ctx.g.slice_rows(states, 2 + i, 1);
        out.push_back(ctx.g.value(ctx.g.softmax(mrm_logits(ctx.g, ctx.bp, h))));
    }
    return out;
}

Tensor msp_predict(const ModelParams& params, const Vocabulary& vocab,
                   const MultimodalExample& ex) {
    EvalContext ctx = make_context(params, vocab, ex);
    Var states = decode_states(ctx.g, ctx.bp, ctx.enc.hidden,
                               decoder_token_inputs(ctx.g, ctx.bp, {tok::kBos, tok::kMsp}));
    Var h = ctx.g.slice_rows(states, 1, 1);  // the <msp> slot
    return ctx.g.value(ctx.g.softmax(msp_logits(ctx.g, ctx.bp, h)));
}

Tensor decode_step(const ModelParams& params, const Vocabulary& vocab,
                   const MultimodalExample& ex, const std::vector<int>& prefix_tokens) {
    EvalContext ctx = make_context(params, vocab, ex);
    Var states = decode_states(ctx.g, ctx.bp, ctx.enc.hidden,
                               decoder_token_inputs(ctx.g, ctx.bp, prefix_tokens));
    Tensor h = ctx.g.value(last_row(ctx.g, states));
    return Tensor({h.cols()}, h.data());
}

// ---------------------------------------------------------------------------
// generation

GenerateResult generate(Task task, const ModelParams& params, const Vocabulary& vocab,
                        const MultimodalExample& ex, std::size_t max_len,
                        const std::vector<SpanTuple>* masc_spans) {
    if (task == Task::MLM || task == Task::MRM || task == Task::MSP) {
        throw UsageError(std::string("generate: unsupported task ") + task_name(task));
    }
    if (max_len == 0) max_len = params.config.max_gen_len;
    GenerateResult res;
    res.seq.task = task;

    EvalContext ctx = make_context(params, vocab, ex);
    const std::size_t T = ctx.enc.layout.text_len;

    if (task == Task::AOG) {
        // Vocabulary-token decoding via the shared-embedding LM head.
        std::vector<int> prefix = {tok::kBos, tok::kAog};
        res.complete = false;
        for (std::size_t step = 0; step < max_len; ++step) {
            Var states = decode_states(ctx.g, ctx.bp, ctx.enc.hidden,
                                       decoder_token_inputs(ctx.g, ctx.bp, prefix));
            const Tensor scores = ctx.g.value(lm_logits(ctx.g, ctx.bp, last_row(ctx.g, states)));
            std::size_t best = 0;
            for (std::size_t i = 1; i < scores.size(); ++i) {
                if (scores[i] > scores[best]) best = i;
            }
            if (static_cast<int>(best) == tok::kEos) {
                res.complete = true;
                break;
            }
            res.seq.items.push_back(TargetItem::special_token(static_cast<int>(best)));
            prefix.push_back(static_cast<int>(best));
        }
        return res;
    }

    if (task == Task::MASC) {
        if (!masc_spans) throw UsageError("generate: MASC requires gold spans");
        for (const SpanTuple& s : *masc_spans) {
            if (s.start < 1 || s.end < s.start || static_cast<std::size_t>(s.end) > T) {
                throw ValidationError("generate: MASC gold span out of range");
            }
        }
    }

    Var cands = candidate_matrix(ctx.g, ctx.bp, ctx.enc, task);
    res.complete = false;
    while (res.seq.items.size() < max_len) {
        Var dec_in =
            decoder_pointer_inputs(ctx.g, ctx.bp, task, cands, T, res.seq.items);
        Var states = decode_states(ctx.g, ctx.bp, ctx.enc.hidden, dec_in);
        const Tensor dist =
            ctx.g.value(ctx.g.softmax(pointer_logits(ctx.g, cands, last_row(ctx.g, states))));
        std::vector<bool> allowed = valid_next_mask(task, res.seq.items, T, masc_spans);
        std::ptrdiff_t best = -1;
        for (std::size_t i = 0; i < dist.size(); ++i) {
            if (!allowed[i]) continue;
            if (best < 0 || dist[i] > dist[static_cast<std::size_t>(best)]) {
                best = static_cast<std::ptrdiff_t>(i);
            }
        }
        if (best < 0) throw UsageError("generate: grammar admits no candidate");
        TargetItem item = item_from_candidate(task, static_cast<std::size_t>(best), T);
        res.seq.items.push_back(item);
        if (item.kind == TargetItem::Kind::Special && item.special == tok::kEos) {
            res.complete = true;
            break;
        }
    }
    return res;
}

}  // namespace mabsa
