#include "mabsa/metrics.hpp"

#include <set>

#include <json.hpp>

#include "mabsa/error.hpp"

namespace mabsa {

namespace {

std::set<SpanTuple> as_set(const std::vector<SpanTuple>& v) {
    return std::set<SpanTuple>(v.begin(), v.end());
}

}  // namespace

Prf micro_prf(const std::vector<std::vector<SpanTuple>>& preds,
              const std::vector<std::vector<SpanTuple>>& golds) {
    if (preds.size() != golds.size()) {
        throw UsageError("micro_prf: prediction/gold example counts differ");
    }
    std::size_t tp = 0, n_pred = 0, n_gold = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::set<SpanTuple> p = as_set(preds[i]);
        std::set<SpanTuple> g = as_set(golds[i]);
        n_pred += p.size();
        n_gold += g.size();
        for (const SpanTuple& t : p) {
            if (g.count(t)) ++tp;
        }
    }
    Prf out;
    out.precision = n_pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_pred);
    out.recall = n_gold == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_gold);
    out.f1 = (out.precision + out.recall) == 0.0
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

double accuracy(const std::vector<std::vector<SpanTuple>>& preds,
                const std::vector<std::vector<SpanTuple>>& golds, bool restrict_to_predicted) {
    if (preds.size() != golds.size()) {
        throw UsageError("accuracy: prediction/gold example counts differ");
    }
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (const SpanTuple& g : golds[i]) {
            const SpanTuple* match = nullptr;
            for (const SpanTuple& p : preds[i]) {
                if (p.start == g.start && p.end == g.end) {
                    match = &p;
                    break;
                }
            }
            if (!match) {
                if (restrict_to_predicted) continue;
                throw UsageError("accuracy: prediction missing for a gold span");
            }
            ++total;
            if (match->sentiment == g.sentiment) ++correct;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["task"] = task_name(task);
    j["P"] = precision;
    j["R"] = recall;
    j["F1"] = f1;
    j["Acc"] = acc;
    j["example_count"] = example_count;
    return j.dump();
}

}  // namespace mabsa
