#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mabsa/corpus.hpp"
#include "mabsa/metrics.hpp"
#include "mabsa/model.hpp"
#include "mabsa/task_codec.hpp"
#include "mabsa/weak_label.hpp"

namespace mabsa {

struct TrainConfig {
    double lambdas[5] = {1, 1, 1, 1, 1};  // MLM, AOE, MRM, AOG, MSP
    double lr = 5e-5;
    std::size_t pretrain_epochs = 40;
    std::size_t finetune_epochs = 35;
    std::size_t pretrain_batch = 64;
    std::size_t finetune_batch = 16;
    std::uint64_t seed = 0;
    std::vector<Task> task_order = {Task::MLM, Task::AOE, Task::MRM, Task::AOG, Task::MSP};
    double clip_norm = 1.0;
    double mask_rate = 0.15;
    bool mlm_masked_only = false;  // Eq-style full-text loss when false

    void validate() const;
};

double task_lambda(const TrainConfig& cfg, Task t);

struct TrainResources {
    AnpVocabulary anps;  // required when AOG is enabled
};

// Adam with bias correction; state shapes mirror the parameters.
struct OptimizerState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::pair<std::string, Tensor>> m, v;  // lazily sized on first step
};

using GradMap = std::vector<std::pair<std::string, Tensor>>;

// Collects gradients for every bound parameter (zeros where the loss did not
// reach); order matches ModelParams::for_each.
GradMap collect_grads(const Graph& g, const BoundParams& bp);

// Global-norm clip in place; returns the pre-clip norm.
double clip_gradients(GradMap& grads, double max_norm);

// In-place adaptive-moment update; throws TrainingError on non-finite
// gradients, naming the parameter.
void optimizer_step(ModelParams& params, const GradMap& grads, OptimizerState& state, double lr);

// Teacher-forced loss of one example for any task (pre-training or
// downstream). Seeds drive the masking draws.
Var example_task_loss(Graph& g, const BoundParams& bp, Task task, const MultimodalExample& ex,
                      const Vocabulary& vocab, const TrainResources& res, const TrainConfig& cfg,
                      std::uint64_t seed);

// Mean over the batch; the spec-facing forward-only variant below returns
// its value.
Var build_batch_loss(Graph& g, const BoundParams& bp, Task task, const Corpus& corpus,
                     const std::vector<std::size_t>& batch, const Vocabulary& vocab,
                     const TrainResources& res, const TrainConfig& cfg, std::uint64_t seed);

double compute_task_loss(Task task, const Corpus& corpus, const std::vector<std::size_t>& batch,
                         const ModelParams& params, const Vocabulary& vocab,
                         const TrainResources& res, const TrainConfig& cfg, std::uint64_t seed);

struct HistoryRow {
    std::size_t epoch = 0;
    std::string task;
    double loss = 0.0;           // unweighted
    double weighted_loss = 0.0;  // lambda * loss (equal to loss during fine-tuning)
    bool has_metrics = false;
    double precision = 0.0, recall = 0.0, f1 = 0.0, acc = 0.0;
};

// CSV: epoch,task,loss,P,R,F1,Acc (metric cells empty on pre-training rows).
void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows);
std::string history_to_csv(const std::vector<HistoryRow>& rows);

struct PretrainResult {
    ModelParams params;
    std::vector<HistoryRow> history;
};

// Alternating multi-task pre-training: per batch index, one batch of every
// enabled task in the configured order, each loss scaled by its lambda.
// Writes one checkpoint per epoch when out_dir is given.
PretrainResult pretrain(const Corpus& corpus, ModelParams params, const TrainConfig& cfg,
                        const TrainResources& res, const Vocabulary& vocab,
                        const std::string& out_dir = "");

struct FinetuneResult {
    ModelParams best_params;
    std::vector<HistoryRow> history;
    double best_metric = 0.0;
    std::size_t best_epoch = 0;
};

// Downstream teacher-forced training with per-epoch dev evaluation and
// best-dev checkpoint selection (F1, or accuracy for MASC). With an empty
// dev split the final-epoch parameters win.
FinetuneResult finetune(Task task, const Corpus& train, const Corpus& dev, ModelParams params,
                        const TrainConfig& cfg, const Vocabulary& vocab);

// Greedy-decode the corpus and score it.
MetricReport evaluate(Task task, const Corpus& corpus, const ModelParams& params,
                      const Vocabulary& vocab, bool restricted_masc = false);

// Gold tuples for a downstream task (sentiment stripped for MATE).
std::vector<SpanTuple> gold_tuples(Task task, const MultimodalExample& ex);

// Deterministic subsample of n examples (shuffle by seed, take the head).
Corpus subsample(const Corpus& corpus, std::size_t n, std::uint64_t seed);

}  // namespace mabsa
