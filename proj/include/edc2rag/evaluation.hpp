#pragma once

#include <optional>
#include <string>
#include <vector>

namespace edc2rag {

/// Token-level QA score on the 0-100 scale.
struct QAScore {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct ConfusionCounts {
    long long tp = 0;
    long long fp = 0;
    long long tn = 0;
    long long fn = 0;
};

struct PriceSchedule {
    double input_usd_per_million = 0.0;
    double output_usd_per_million = 0.0;
};

struct CostReport {
    double avg_input_tokens = 0.0;
    double avg_output_tokens = 0.0;
    double api_cost_usd = 0.0;
    std::optional<double> relative_cost;
};

/// Lowercase, strip punctuation, drop the articles a/an/the, split on
/// whitespace.
std::vector<std::string> normalize_answer(const std::string& text);

/// Max over gold answers of the token-multiset F1 between normalized
/// prediction and gold.
QAScore token_f1(const std::string& prediction, const std::vector<std::string>& gold_answers);

/// Mean of true-positive rate and true-negative rate. Requires both classes
/// to be represented.
double balanced_accuracy(const ConfusionCounts& c);

double accuracy(const ConfusionCounts& c);

CostReport compute_cost(double avg_input_tokens, double avg_output_tokens,
                        const PriceSchedule& schedule,
                        std::optional<double> baseline_cost_usd = std::nullopt);

/// One per-query metric value with its aggregation cell.
struct MetricSample {
    std::string method;
    int top_k = 0;
    double mix = 0.0;  // noise rate or redundancy rate of the cell
    std::string task;
    double value = 0.0;
};

struct CellSummary {
    std::string method;
    int top_k = 0;
    double mix = 0.0;
    int count = 0;
    double mean = 0.0;
    std::optional<double> sd;  // unbiased; absent for single samples
};

/// Mean (and unbiased standard deviation across repeats) per
/// (method, top_k, mix) cell. Mixed task kinds are an error; empty input
/// yields an empty table.
std::vector<CellSummary> aggregate(const std::vector<MetricSample>& samples);

/// "76.85 ±1.98" style cell text; the ± part is omitted without repeats.
std::string format_cell(const CellSummary& cell);

std::string summary_csv(const std::vector<CellSummary>& cells);
std::string summary_table(const std::vector<CellSummary>& cells);

}  // namespace edc2rag
