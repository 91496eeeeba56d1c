#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edc2rag/core.hpp"

namespace edc2rag {

/// One cluster in formation order. `member_ids` lists the root first, then
/// the remaining members by descending similarity to the root.
struct Cluster {
    int index = 1;  // 1-based formation order
    std::string root_id;
    std::vector<std::string> member_ids;
};

struct Clustering {
    std::vector<Cluster> clusters;
    Strategy strategy = Strategy::Dynamic;
    std::string source_query_id;

    std::size_t num_clusters() const { return clusters.size(); }
};

/// The size schedule the dynamic strategy will realize: the first cluster
/// holds min(tau, n) documents and each subsequent one
/// min(2 x previous, lambda, remaining). Its length is the number of
/// compression calls a query will cost.
struct SizePlan {
    std::vector<int> sizes;

    int total() const;
};

/// merge_tail_below folds a final cluster of size <= the given value into its
/// predecessor (0 disables). lambda == nullopt means no cap.
SizePlan plan_sizes(int n, int tau, std::optional<int> lambda, int merge_tail_below = 0);

using EmbeddingMap = std::map<std::string, EmbeddingVector>;

/// Similarity-driven clustering: each round roots a new cluster at the
/// remaining document most similar to the query, then fills it with the
/// remaining documents most similar to that root. Ties break toward the
/// lower retrieval rank.
Clustering dynamic_cluster(const RetrievedSet& docs, const EmbeddingMap& doc_embeddings,
                           const EmbeddingVector& query_embedding, int tau,
                           std::optional<int> lambda, int merge_tail_below = 0);

/// Rank-ordered contiguous blocks whose sizes differ by at most one; earlier
/// blocks take the extra document. Root = lowest-rank member of the block.
Clustering average_cluster(const RetrievedSet& docs, int num_clusters);

/// Seeded uniform permutation cut into consecutive groups matching `sizes`.
Clustering random_cluster(const RetrievedSet& docs, const SizePlan& sizes, std::uint64_t seed);

/// Fraction of same-class document pairs that share a cluster. Requires at
/// least two documents carrying `target_class`.
double intra_class_consistency(const Clustering& clustering,
                               const std::map<std::string, std::string>& labels,
                               const std::string& target_class);

/// Reference value for a random assignment over the same number of clusters.
double random_baseline_consistency(int num_clusters);

nlohmann::ordered_json clustering_to_json(const Clustering& clustering);
Clustering clustering_from_json(const nlohmann::ordered_json& j);

}  // namespace edc2rag
