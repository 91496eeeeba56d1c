#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edc2rag {

enum class DocLabel { HasAnswer, Noise, Useful, Rewritten, Unlabeled };

const char* to_string(DocLabel label);
DocLabel doc_label_from_string(std::string_view s);

/// One retrieved passage. `rank` is the 1-based position by query
/// similarity in the source retrieval and must be unique within a set.
struct Document {
    std::string id;
    std::string text;
    int rank = 1;
    DocLabel label = DocLabel::Unlabeled;
};

enum class TaskKind { KQA, FactCheck, HaluEvalChoice };

const char* to_string(TaskKind task);
TaskKind task_from_string(std::string_view s);

struct Query {
    std::string id;
    std::string text;
    std::vector<std::string> gold_answers;
    TaskKind task = TaskKind::KQA;
    std::string person;  // subject of a biography statement, when known
};

/// Fixed-length dense embedding. All values must be finite.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dims() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    std::vector<double> values_;
};

/// Top-k retrieval output for one query, ordered by rank ascending.
/// Construction rejects duplicate ids, duplicate ranks, and unsorted input.
class RetrievedSet {
public:
    RetrievedSet(std::string query_id, std::vector<Document> documents);

    const std::string& query_id() const { return query_id_; }
    const std::vector<Document>& documents() const { return documents_; }
    std::size_t size() const { return documents_.size(); }
    const Document& find(const std::string& doc_id) const;

private:
    std::string query_id_;
    std::vector<Document> documents_;
};

enum class Strategy { Dynamic, Average, Random };

const char* to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

struct PipelineConfig {
    int tau = 3;
    std::optional<int> lambda = 20;  // nullopt = no cap on cluster size
    int top_k = 20;
    Strategy strategy = Strategy::Dynamic;
    std::uint64_t seed = 0;
    int parallelism = 4;
    double temperature_deterministic = 0.0;
    double temperature_sampling = 0.7;
    // Merge the final cluster into its predecessor when its planned size is
    // <= this value. 0 disables merging.
    int merge_tail_below = 0;

    void validate() const;  // throws std::invalid_argument
};

/// Cosine similarity in [-1, 1]. Throws std::invalid_argument on dimension
/// mismatch or a zero-norm operand.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

std::uint64_t fnv1a64(std::string_view bytes);

/// Splittable counter-based PRNG (splitmix64 core). Every random decision in
/// the pipeline draws from a stream derived from one seed, so a run is
/// reproducible bit-for-bit regardless of platform or standard library.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed) : state_(seed) {}

    /// Independent child stream identified by a label.
    SplitRng split(std::string_view label) const;

    std::uint64_t next_u64();
    double next_unit();  // [0, 1)
    /// Uniform draw in [0, bound), bound >= 1. Unbiased via rejection.
    std::uint64_t next_below(std::uint64_t bound);

private:
    std::uint64_t state_;
};

}  // namespace edc2rag
