#pragma once

#include <string>
#include <vector>

#include "mabsa/labels.hpp"
#include "mabsa/task_codec.hpp"

namespace mabsa {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Exact-match micro precision/recall/F1 over per-example tuple sets.
// Duplicates within an example are collapsed before counting; empty
// denominators yield 0.
Prf micro_prf(const std::vector<std::vector<SpanTuple>>& preds,
              const std::vector<std::vector<SpanTuple>>& golds);

// MASC accuracy: fraction of gold (span -> sentiment) assignments matched.
// Every gold span must be present in the prediction unless
// `restrict_to_predicted` is set (then missing spans are skipped, the JML
// protocol).
double accuracy(const std::vector<std::vector<SpanTuple>>& preds,
                const std::vector<std::vector<SpanTuple>>& golds,
                bool restrict_to_predicted = false);

struct MetricReport {
    Task task = Task::JMASA;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double acc = 0.0;
    std::size_t example_count = 0;

    std::string to_json() const;
};

}  // namespace mabsa
