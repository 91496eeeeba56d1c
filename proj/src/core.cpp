#include "edc2rag/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace edc2rag {

const char* to_string(DocLabel label) {
    switch (label) {
        case DocLabel::HasAnswer: return "has_answer";
        case DocLabel::Noise: return "noise";
        case DocLabel::Useful: return "useful";
        case DocLabel::Rewritten: return "rewritten";
        case DocLabel::Unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

DocLabel doc_label_from_string(std::string_view s) {
    if (s == "has_answer") return DocLabel::HasAnswer;
    if (s == "noise") return DocLabel::Noise;
    if (s == "useful") return DocLabel::Useful;
    if (s == "rewritten") return DocLabel::Rewritten;
    if (s == "unlabeled" || s.empty()) return DocLabel::Unlabeled;
    throw std::invalid_argument("unknown document label: " + std::string(s));
}

const char* to_string(TaskKind task) {
    switch (task) {
        case TaskKind::KQA: return "kqa";
        case TaskKind::FactCheck: return "factcheck";
        case TaskKind::HaluEvalChoice: return "halueval";
    }
    return "kqa";
}

TaskKind task_from_string(std::string_view s) {
    if (s == "kqa") return TaskKind::KQA;
    if (s == "factcheck" || s == "felm" || s == "wikibio") return TaskKind::FactCheck;
    if (s == "halueval") return TaskKind::HaluEvalChoice;
    throw std::invalid_argument("unknown task: " + std::string(s));
}

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::Dynamic: return "dynamic";
        case Strategy::Average: return "average";
        case Strategy::Random: return "random";
    }
    return "dynamic";
}

Strategy strategy_from_string(std::string_view s) {
    if (s == "dynamic") return Strategy::Dynamic;
    if (s == "average") return Strategy::Average;
    if (s == "random") return Strategy::Random;
    throw std::invalid_argument("unknown strategy: " + std::string(s));
}

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("embedding contains a non-finite value");
        }
    }
}

RetrievedSet::RetrievedSet(std::string query_id, std::vector<Document> documents)
    : query_id_(std::move(query_id)), documents_(std::move(documents)) {
    if (documents_.empty()) {
        throw std::invalid_argument("retrieved set must not be empty");
    }
    std::set<std::string> ids;
    int prev_rank = 0;
    for (const auto& doc : documents_) {
        if (doc.rank < 1) {
            throw std::invalid_argument("document rank must be >= 1: " + doc.id);
        }
        if (doc.rank <= prev_rank) {
            throw std::invalid_argument(
                "documents must be strictly ordered by rank; offending id: " + doc.id);
        }
        prev_rank = doc.rank;
        if (!ids.insert(doc.id).second) {
            throw std::invalid_argument("duplicate document id: " + doc.id);
        }
    }
}

const Document& RetrievedSet::find(const std::string& doc_id) const {
    for (const auto& doc : documents_) {
        if (doc.id == doc_id) return doc;
    }
    throw std::out_of_range("no such document in retrieved set: " + doc_id);
}

void PipelineConfig::validate() const {
    if (tau < 1) throw std::invalid_argument("tau must be >= 1");
    if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
    if (tau > top_k) throw std::invalid_argument("tau must not exceed top_k");
    if (lambda && *lambda < tau) {
        throw std::invalid_argument("lambda must be >= tau when bounded");
    }
    if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
    if (merge_tail_below < 0) throw std::invalid_argument("merge_tail_below must be >= 0");
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dims() != b.dims()) {
        throw std::invalid_argument("embedding dimension mismatch");
    }
    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.dims(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        throw std::invalid_argument("cosine similarity undefined for zero-norm vector");
    }
    double sim = dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
    return std::clamp(sim, -1.0, 1.0);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

SplitRng SplitRng::split(std::string_view label) const {
    std::uint64_t s = state_ ^ fnv1a64(label);
    return SplitRng(splitmix64(s));
}

std::uint64_t SplitRng::next_u64() { return splitmix64(state_); }

double SplitRng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SplitRng::next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("bound must be >= 1");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = next_u64();
    } while (r >= limit);
    return r % bound;
}

}  // namespace edc2rag
