#pragma once

#include <string>
#include <vector>

#include "edc2rag/backends.hpp"
#include "edc2rag/clustering.hpp"
#include "edc2rag/core.hpp"
#include "edc2rag/prompts.hpp"

namespace edc2rag {

struct ClusterSummary {
    int cluster_index = 0;
    std::string text;
    bool empty_extract = false;  // text is exactly the sentinel when set
    bool failed = false;         // backend gave up after retries
    TokenUsage usage;
};

struct CompressionOptions {
    int parallelism = 1;
    double temperature = 0.0;
};

/// Numbered "[k] text" listing of a cluster's documents in member order.
std::string cluster_docs_block(const Cluster& cluster, const RetrievedSet& docs);

/// The compression template for a task: kqa-summarize for KQA,
/// compression-wikibio when the statement names a person, else
/// compression-general.
std::string compression_template_name(const Query& query);

/// One query-aware summary per cluster, produced with at most
/// options.parallelism requests in flight and returned in formation order.
/// A cluster whose backend fails is marked failed rather than aborting the
/// batch; sentinel responses are canonicalized and flagged empty_extract.
std::vector<ClusterSummary> summarize_clusters(const Clustering& clustering, const Query& query,
                                               const RetrievedSet& docs,
                                               const TemplateLibrary& templates,
                                               ChatBackend& backend,
                                               const CompressionOptions& options);

/// Context blocks in cluster order: the summary text, or the cluster's
/// original documents whenever its summary failed, was empty, or was the
/// sentinel.
std::vector<std::string> apply_fallback(const std::vector<ClusterSummary>& summaries,
                                        const Clustering& clustering, const RetrievedSet& docs);

/// Per-document compression (the chunk baseline's first stage): one summary
/// per document in rank order, cluster_index set to the 1-based position.
std::vector<ClusterSummary> compress_documents(const Query& query, const RetrievedSet& docs,
                                               const TemplateLibrary& templates,
                                               ChatBackend& backend,
                                               const CompressionOptions& options);

}  // namespace edc2rag
