#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edc2rag/backends.hpp"
#include "edc2rag/core.hpp"

namespace edc2rag {

/// One JSONL row: a query with its retrieved documents and optional
/// task-specific fields.
struct DatasetRow {
    Query query;
    std::vector<Document> docs;                 // ordered by rank ascending
    std::map<std::string, double> scores;       // retrieval scores by doc id
    std::optional<std::string> gold_label;      // task gold (e.g. "factual", "1")
    std::string knowledge;                      // halueval knowledge block
    std::string answer1;
    std::string answer2;
    nlohmann::ordered_json spec;                // mixing cell, e.g. {top_k, noise_rate}

    RetrievedSet retrieved() const { return RetrievedSet(query.id, docs); }
};

DatasetRow parse_dataset_row(const std::string& line, std::size_t line_no);
std::string serialize_dataset_row(const DatasetRow& row);  // byte-stable field order

std::vector<DatasetRow> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRow>& rows);

/// A query's retrieval pool split by gold-answer containment, each side in
/// similarity order.
struct LabeledPool {
    std::string query_id;
    Query query;
    std::vector<Document> has_answer_docs;
    std::vector<Document> noise_docs;
};

struct NoiseSpec {
    int top_k = 20;
    double noise_rate = 0.0;  // in [0, 1]
};

struct RedundancySpec {
    int base_k = 20;
    int kept = 20;  // 1 <= kept <= base_k

    double r() const { return static_cast<double>(base_k - kept) / base_k; }
};

/// True iff any normalized gold answer occurs as a substring of the
/// normalized document text.
bool label_has_answer(const Document& doc, const std::vector<std::string>& gold_answers);

/// Splits a row's documents into has-answer and noise lists, stamping labels.
LabeledPool label_pool(const DatasetRow& row);

/// Query ids whose pools hold at least min_each documents on both sides.
std::vector<std::string> filter_eligible(const std::vector<LabeledPool>& pools,
                                         int min_each = 100);

/// Mixes round(top_k * noise_rate) noise documents with has-answer documents,
/// each taken in similarity order, re-interleaved by original rank.
RetrievedSet build_noisy_set(const LabeledPool& pool, const NoiseSpec& spec);

/// Keeps the `kept` best-ranked documents and replaces the rest with backend
/// paraphrases of seeded-randomly chosen kept documents (labeled Rewritten).
RetrievedSet build_redundant_set(const RetrievedSet& top_docs, const RedundancySpec& spec,
                                 ChatBackend& backend, std::uint64_t seed);

}  // namespace edc2rag
