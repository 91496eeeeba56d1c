#include "edc2rag/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace edc2rag {

std::vector<std::string> normalize_answer(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char raw : text) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            cleaned.push_back(static_cast<char>(std::tolower(c)));
        } else if (std::isspace(c)) {
            cleaned.push_back(' ');
        }
        // other punctuation is dropped without inserting a space
    }
    std::istringstream in(cleaned);
    std::vector<std::string> tokens;
    std::string token;
    while (in >> token) {
        if (token == "a" || token == "an" || token == "the") continue;
        tokens.push_back(token);
    }
    return tokens;
}

namespace {

QAScore score_pair(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() && gold.empty()) return {100.0, 100.0, 100.0};
    if (pred.empty() || gold.empty()) return {0.0, 0.0, 0.0};

    std::map<std::string, int> gold_counts;
    for (const auto& t : gold) gold_counts[t]++;
    long long overlap = 0;
    for (const auto& t : pred) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return {0.0, 0.0, 0.0};
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
    const double f1 = 2.0 * precision * recall / (precision + recall);
    return {f1 * 100.0, precision * 100.0, recall * 100.0};
}

}  // namespace

QAScore token_f1(const std::string& prediction, const std::vector<std::string>& gold_answers) {
    if (gold_answers.empty()) {
        throw std::invalid_argument("token_f1 requires at least one gold answer");
    }
    const auto pred = normalize_answer(prediction);
    QAScore best;
    bool first = true;
    for (const auto& gold : gold_answers) {
        const QAScore score = score_pair(pred, normalize_answer(gold));
        if (first || score.f1 > best.f1) {
            best = score;
            first = false;
        }
    }
    return best;
}

double balanced_accuracy(const ConfusionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) {
        throw std::invalid_argument("confusion counts must be >= 0");
    }
    if (c.tp + c.fn < 1 || c.tn + c.fp < 1) {
        throw std::invalid_argument("balanced accuracy needs both classes present");
    }
    const double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    const double tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    return (tpr + tnr) / 2.0;
}

double accuracy(const ConfusionCounts& c) {
    const long long total = c.tp + c.fp + c.tn + c.fn;
    if (total < 1) throw std::invalid_argument("accuracy needs at least one sample");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
}

CostReport compute_cost(double avg_input_tokens, double avg_output_tokens,
                        const PriceSchedule& schedule, std::optional<double> baseline_cost_usd) {
    CostReport report;
    report.avg_input_tokens = avg_input_tokens;
    report.avg_output_tokens = avg_output_tokens;
    report.api_cost_usd = (avg_input_tokens * schedule.input_usd_per_million +
                           avg_output_tokens * schedule.output_usd_per_million) /
                          1e6;
    if (baseline_cost_usd) {
        if (*baseline_cost_usd == 0.0) {
            throw std::invalid_argument("relative cost undefined against a zero baseline");
        }
        report.relative_cost = report.api_cost_usd / *baseline_cost_usd;
    }
    return report;
}

std::vector<CellSummary> aggregate(const std::vector<MetricSample>& samples) {
    if (samples.empty()) return {};
    const std::string& task = samples.front().task;
    for (const auto& s : samples) {
        if (s.task != task) {
            throw std::invalid_argument("aggregate requires a homogeneous task kind");
        }
    }

    std::map<std::tuple<std::string, int, double>, std::vector<double>> cells;
    for (const auto& s : samples) {
        cells[{s.method, s.top_k, s.mix}].push_back(s.value);
    }

    std::vector<CellSummary> out;
    for (const auto& [key, values] : cells) {
        CellSummary cell;
        cell.method = std::get<0>(key);
        cell.top_k = std::get<1>(key);
        cell.mix = std::get<2>(key);
        cell.count = static_cast<int>(values.size());
        double sum = 0.0;
        for (double v : values) sum += v;
        cell.mean = sum / static_cast<double>(values.size());
        if (values.size() >= 2) {
            double sq = 0.0;
            for (double v : values) sq += (v - cell.mean) * (v - cell.mean);
            cell.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
        }
        out.push_back(cell);
    }
    return out;
}

namespace {

std::string two_decimals(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

}  // namespace

std::string format_cell(const CellSummary& cell) {
    std::string out = two_decimals(cell.mean);
    if (cell.sd) out += " ±" + two_decimals(*cell.sd);
    return out;
}

std::string summary_csv(const std::vector<CellSummary>& cells) {
    std::string out = "method,top_k,noise_or_r,count,mean,sd\n";
    for (const auto& cell : cells) {
        out += cell.method + "," + std::to_string(cell.top_k) + "," + two_decimals(cell.mix) +
               "," + std::to_string(cell.count) + "," + two_decimals(cell.mean) + ",";
        if (cell.sd) out += two_decimals(*cell.sd);
        out += "\n";
    }
    return out;
}

std::string summary_table(const std::vector<CellSummary>& cells) {
    std::ostringstream out;
    out << "method          top_k  noise/r  n     value\n";
    for (const auto& cell : cells) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-15s %5d  %7.2f  %-5d %s\n", cell.method.c_str(),
                      cell.top_k, cell.mix, cell.count, format_cell(cell).c_str());
        out << line;
    }
    return out.str();
}

}  // namespace edc2rag
