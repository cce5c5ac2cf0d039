#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mabsa/corpus.hpp"
#include "mabsa/features.hpp"
#include "mabsa/graph.hpp"
#include "mabsa/task_codec.hpp"
#include "mabsa/vocab.hpp"

namespace mabsa {

struct ModelConfig {
    std::size_t hidden = 768;
    std::size_t enc_layers = 6;
    std::size_t dec_layers = 6;
    std::size_t heads = 12;
    std::size_t ffn = 3072;
    std::size_t region_count = 36;
    std::size_t class_count = 9;
    std::size_t feature_dim = 2048;
    std::size_t vocab_size = 0;  // set after the vocabulary is built
    std::size_t max_seq_len = 160;
    std::size_t max_gen_len = 48;
    bool region_positions = true;
    double ln_eps = 1e-5;

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AttnParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};
struct LayerNormParams {
    Tensor gain, bias;
};
struct FfnParams {
    Tensor w1, b1, w2, b2;
};
struct EncLayerParams {
    AttnParams attn;
    LayerNormParams ln1;
    FfnParams ffn;
    LayerNormParams ln2;
};
struct DecLayerParams {
    AttnParams self_attn;
    LayerNormParams ln1;
    AttnParams cross_attn;
    LayerNormParams ln2;
    FfnParams ffn;
    LayerNormParams ln3;
};

// All learnable tensors. The token embedding table doubles as the LM output
// head; there is no separate output matrix anywhere.
struct ModelParams {
    ModelConfig config;
    Tensor tok_embed;     // V x d
    Tensor pos_embed;     // max_seq x d
    Tensor dec_pos_embed; // max_seq x d
    Tensor type_embed;    // 2 x d
    Tensor proj_w;        // d x feature_dim
    Tensor proj_b;        // d
    std::vector<EncLayerParams> encoder;
    std::vector<DecLayerParams> decoder;
    Tensor mrm_w1, mrm_b1, mrm_w2, mrm_b2;  // d -> d -> K
    Tensor msp_w1, msp_b1, msp_w2, msp_b2;  // d -> d -> 3

    void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    std::size_t tensor_count() const;
};

// Scaled-uniform initialization in (-1/sqrt(d), 1/sqrt(d)), deterministic
// per seed.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

struct BoundAttn {
    Var wq, bq, wk, bk, wv, bv, wo, bo;
};
struct BoundLn {
    Var gain, bias;
};
struct BoundFfn {
    Var w1, b1, w2, b2;
};
struct BoundEncLayer {
    BoundAttn attn;
    BoundLn ln1;
    BoundFfn ffn;
    BoundLn ln2;
};
struct BoundDecLayer {
    BoundAttn self_attn;
    BoundLn ln1;
    BoundAttn cross_attn;
    BoundLn ln2;
    BoundFfn ffn;
    BoundLn ln3;
};

// One graph's view of the parameters, plus a name registry in the same order
// as ModelParams::for_each for gradient collection.
struct BoundParams {
    const ModelConfig* config = nullptr;
    Var tok_embed, pos_embed, dec_pos_embed, type_embed, proj_w, proj_b;
    std::vector<BoundEncLayer> enc;
    std::vector<BoundDecLayer> dec;
    Var mrm_w1, mrm_b1, mrm_w2, mrm_b2;
    Var msp_w1, msp_b1, msp_w2, msp_b2;
    std::vector<std::pair<std::string, Var>> registry;

    FeatureVars feature_vars() const;
};

BoundParams bind_params(Graph& g, const ModelParams& params, bool requires_grad);

// Assembles a BoundParams from pre-created graph variables named per
// ModelParams::for_each; lets callers (e.g. gradient checks) own the inputs.
BoundParams bind_param_vars(const ModelConfig& cfg,
                            std::vector<std::pair<std::string, Var>> registry);

struct EncodeResult {
    Var hidden;        // (R+T+4) x d
    Var visual;        // R x d
    Var text;          // T x d
    Var text_avg;      // (token_embeds + text) / 2
    Var token_embeds;  // T x d
    InputLayout layout;
};

// Full bidirectional encoding of one example. A region mask plan, when
// given, zeroes the masked raw feature vectors before projection.
EncodeResult encode(Graph& g, const BoundParams& bp,
                    const std::vector<int>& token_ids,
                    const std::vector<std::vector<double>>& region_features,
                    const RegionMaskPlan* region_mask = nullptr);

// Pointer candidates for one example: text positions 1..T as rows of
// text_avg, then the task's special-token embeddings.
Var candidate_matrix(Graph& g, const BoundParams& bp, const EncodeResult& enc, Task task);

// Decoder over an already-embedded input (S x d); causal self-attention plus
// cross-attention over the encoder output. Returns all S hidden states.
Var decode_states(Graph& g, const BoundParams& bp, Var enc_hidden, Var dec_embedded);

// Decoder input builders (decoder position embeddings included).
Var decoder_token_inputs(Graph& g, const BoundParams& bp, const std::vector<int>& token_ids);
Var decoder_pointer_inputs(Graph& g, const BoundParams& bp, Task task, Var candidates,
                           std::size_t T, const std::vector<TargetItem>& items);

// Heads. h_row is 1 x d; logits come back rank-1.
Var pointer_logits(Graph& g, Var candidates, Var h_row);
Var lm_logits(Graph& g, const BoundParams& bp, Var h_row);
Var mrm_logits(Graph& g, const BoundParams& bp, Var h_row);  // K classes
Var msp_logits(Graph& g, const BoundParams& bp, Var h_row);  // 3 classes

// Spec-facing convenience wrappers (fresh graph, eval mode).
Tensor pointer_distribution(const ModelParams& params, const Vocabulary& vocab,
                            const MultimodalExample& ex, Task task,
                            const std::vector<TargetItem>& prefix);
Tensor lm_distribution_of(const ModelParams& params, const Tensor& hidden_row);
std::vector<Tensor> mrm_predict(const ModelParams& params, const Vocabulary& vocab,
                                const MultimodalExample& ex, const RegionMaskPlan& plan);
Tensor msp_predict(const ModelParams& params, const Vocabulary& vocab,
                   const MultimodalExample& ex);
Tensor decode_step(const ModelParams& params, const Vocabulary& vocab,
                   const MultimodalExample& ex, const std::vector<int>& prefix_tokens);

struct GenerateResult {
    TargetSequence seq;
    bool complete = true;
};

// Greedy decoding under the task grammar. MASC requires gold spans; AOG
// decodes vocabulary tokens (items come back as Special entries holding
// vocabulary ids, <eos> excluded).
GenerateResult generate(Task task, const ModelParams& params, const Vocabulary& vocab,
                        const MultimodalExample& ex, std::size_t max_len,
                        const std::vector<SpanTuple>* masc_spans = nullptr);

// Versioned binary checkpoint: header JSON (config + vocabulary) followed by
// named tensors. Loading validates every shape against the config.
void save_checkpoint(const std::string& path, const ModelParams& params, const Vocabulary& vocab);
struct Checkpoint {
    ModelParams params;
    Vocabulary vocab;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mabsa
