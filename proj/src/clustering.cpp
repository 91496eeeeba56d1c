#include "edc2rag/clustering.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace edc2rag {

int SizePlan::total() const { return std::accumulate(sizes.begin(), sizes.end(), 0); }

SizePlan plan_sizes(int n, int tau, std::optional<int> lambda, int merge_tail_below) {
    if (n < 1) throw std::invalid_argument("plan_sizes: n must be >= 1");
    if (tau < 1) throw std::invalid_argument("plan_sizes: tau must be >= 1");
    if (lambda && *lambda < 1) throw std::invalid_argument("plan_sizes: lambda must be >= 1");

    SizePlan plan;
    int remaining = n;
    int size = std::min(tau, remaining);
    while (remaining > 0) {
        plan.sizes.push_back(size);
        remaining -= size;
        size = 2 * size;
        if (lambda) size = std::min(size, *lambda);
        size = std::min(size, remaining);
    }
    if (merge_tail_below > 0 && plan.sizes.size() >= 2 &&
        plan.sizes.back() <= merge_tail_below) {
        int tail = plan.sizes.back();
        plan.sizes.pop_back();
        plan.sizes.back() += tail;
    }
    return plan;
}

namespace {

struct ScoredDoc {
    const Document* doc;
    double query_sim;
};

const EmbeddingVector& embedding_for(const EmbeddingMap& embeddings, const Document& doc) {
    auto it = embeddings.find(doc.id);
    if (it == embeddings.end()) {
        throw std::invalid_argument("missing embedding for document: " + doc.id);
    }
    return it->second;
}

}  // namespace

Clustering dynamic_cluster(const RetrievedSet& docs, const EmbeddingMap& doc_embeddings,
                           const EmbeddingVector& query_embedding, int tau,
                           std::optional<int> lambda, int merge_tail_below) {
    const int n = static_cast<int>(docs.size());
    SizePlan plan = plan_sizes(n, tau, lambda, merge_tail_below);

    std::vector<ScoredDoc> pool;
    pool.reserve(docs.size());
    for (const auto& doc : docs.documents()) {
        const auto& emb = embedding_for(doc_embeddings, doc);
        pool.push_back({&doc, cosine_similarity(query_embedding, emb)});
    }

    Clustering out;
    out.strategy = Strategy::Dynamic;
    out.source_query_id = docs.query_id();

    for (std::size_t k = 0; k < plan.sizes.size(); ++k) {
        // Root: remaining document most similar to the query, rank breaks ties.
        auto root_it = std::min_element(pool.begin(), pool.end(),
                                        [](const ScoredDoc& a, const ScoredDoc& b) {
                                            if (a.query_sim != b.query_sim)
                                                return a.query_sim > b.query_sim;
                                            return a.doc->rank < b.doc->rank;
                                        });
        ScoredDoc root = *root_it;
        pool.erase(root_it);

        const auto& root_emb = embedding_for(doc_embeddings, *root.doc);
        struct Member {
            const Document* doc;
            double root_sim;
        };
        std::vector<Member> scored;
        scored.reserve(pool.size());
        for (const auto& cand : pool) {
            scored.push_back({cand.doc, cosine_similarity(root_emb,
                                                          embedding_for(doc_embeddings, *cand.doc))});
        }
        std::sort(scored.begin(), scored.end(), [](const Member& a, const Member& b) {
            if (a.root_sim != b.root_sim) return a.root_sim > b.root_sim;
            return a.doc->rank < b.doc->rank;
        });

        Cluster cluster;
        cluster.index = static_cast<int>(k) + 1;
        cluster.root_id = root.doc->id;
        cluster.member_ids.push_back(root.doc->id);
        const int fill = plan.sizes[k] - 1;
        for (int i = 0; i < fill; ++i) {
            cluster.member_ids.push_back(scored[i].doc->id);
            auto gone = std::find_if(pool.begin(), pool.end(), [&](const ScoredDoc& d) {
                return d.doc->id == scored[i].doc->id;
            });
            pool.erase(gone);
        }
        out.clusters.push_back(std::move(cluster));
    }
    return out;
}

Clustering average_cluster(const RetrievedSet& docs, int num_clusters) {
    const int n = static_cast<int>(docs.size());
    if (num_clusters < 1 || num_clusters > n) {
        throw std::invalid_argument("average_cluster: num_clusters must be in [1, n]");
    }
    Clustering out;
    out.strategy = Strategy::Average;
    out.source_query_id = docs.query_id();

    const int base = n / num_clusters;
    const int extra = n % num_clusters;
    std::size_t pos = 0;
    for (int k = 0; k < num_clusters; ++k) {
        const int size = base + (k < extra ? 1 : 0);
        Cluster cluster;
        cluster.index = k + 1;
        for (int i = 0; i < size; ++i) {
            cluster.member_ids.push_back(docs.documents()[pos++].id);
        }
        cluster.root_id = cluster.member_ids.front();
        out.clusters.push_back(std::move(cluster));
    }
    return out;
}

Clustering random_cluster(const RetrievedSet& docs, const SizePlan& sizes, std::uint64_t seed) {
    const int n = static_cast<int>(docs.size());
    if (sizes.total() != n) {
        throw std::invalid_argument("random_cluster: plan sizes must sum to the document count");
    }
    std::vector<const Document*> order;
    order.reserve(docs.size());
    for (const auto& doc : docs.documents()) order.push_back(&doc);

    // Fisher-Yates with the project RNG keeps the permutation identical
    // across standard libraries.
    SplitRng rng = SplitRng(seed).split("random-cluster");
    for (int i = n - 1; i > 0; --i) {
        auto j = static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[j]);
    }

    Clustering out;
    out.strategy = Strategy::Random;
    out.source_query_id = docs.query_id();
    std::size_t pos = 0;
    for (std::size_t k = 0; k < sizes.sizes.size(); ++k) {
        Cluster cluster;
        cluster.index = static_cast<int>(k) + 1;
        for (int i = 0; i < sizes.sizes[k]; ++i) {
            cluster.member_ids.push_back(order[pos++]->id);
        }
        cluster.root_id = cluster.member_ids.front();
        out.clusters.push_back(std::move(cluster));
    }
    return out;
}

double intra_class_consistency(const Clustering& clustering,
                               const std::map<std::string, std::string>& labels,
                               const std::string& target_class) {
    std::map<std::string, int> cluster_of;
    for (const auto& cluster : clustering.clusters) {
        for (const auto& id : cluster.member_ids) cluster_of[id] = cluster.index;
    }

    std::vector<int> members;
    for (const auto& [id, cls] : labels) {
        if (cls != target_class) continue;
        auto it = cluster_of.find(id);
        if (it != cluster_of.end()) members.push_back(it->second);
    }
    const std::size_t m = members.size();
    if (m < 2) {
        throw std::invalid_argument(
            "intra_class_consistency needs at least 2 documents of class " + target_class);
    }
    long long same = 0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            if (members[i] == members[j]) ++same;
        }
    }
    const double pairs = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
    return static_cast<double>(same) / pairs;
}

double random_baseline_consistency(int num_clusters) {
    if (num_clusters < 1) throw std::invalid_argument("num_clusters must be >= 1");
    return 1.0 / static_cast<double>(num_clusters);
}

nlohmann::ordered_json clustering_to_json(const Clustering& clustering) {
    nlohmann::ordered_json j;
    j["query_id"] = clustering.source_query_id;
    j["strategy"] = to_string(clustering.strategy);
    j["clusters"] = nlohmann::ordered_json::array();
    for (const auto& cluster : clustering.clusters) {
        nlohmann::ordered_json c;
        c["index"] = cluster.index;
        c["root_id"] = cluster.root_id;
        c["member_ids"] = cluster.member_ids;
        j["clusters"].push_back(std::move(c));
    }
    return j;
}

Clustering clustering_from_json(const nlohmann::ordered_json& j) {
    Clustering out;
    out.source_query_id = j.at("query_id").get<std::string>();
    out.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    for (const auto& c : j.at("clusters")) {
        Cluster cluster;
        cluster.index = c.at("index").get<int>();
        cluster.root_id = c.at("root_id").get<std::string>();
        cluster.member_ids = c.at("member_ids").get<std::vector<std::string>>();
        out.clusters.push_back(std::move(cluster));
    }
    return out;
}

}  // namespace edc2rag
