#include "edc2rag/compression.hpp"

#include <map>
#include <set>
#include <stdexcept>

#include "parallel_util.hpp"
#include "text_util.hpp"

namespace edc2rag {

std::string cluster_docs_block(const Cluster& cluster, const RetrievedSet& docs) {
    std::string block;
    int position = 1;
    for (const auto& id : cluster.member_ids) {
        block += "[" + std::to_string(position++) + "] " + docs.find(id).text + "\n";
    }
    return block;
}

std::string compression_template_name(const Query& query) {
    if (query.task == TaskKind::KQA) return "kqa-summarize";
    if (!query.person.empty()) return "compression-wikibio";
    return "compression-general";
}

namespace {

void check_partition(const Clustering& clustering, const RetrievedSet& docs) {
    std::set<std::string> seen;
    for (const auto& cluster : clustering.clusters) {
        for (const auto& id : cluster.member_ids) {
            docs.find(id);  // throws on unknown id
            if (!seen.insert(id).second) {
                throw std::invalid_argument("clustering repeats document id: " + id);
            }
        }
    }
    if (seen.size() != docs.size()) {
        throw std::invalid_argument("clustering does not cover the retrieved set");
    }
}

std::map<std::string, std::string> compression_bindings(const PromptTemplate& tmpl,
                                                        const TemplateLibrary& templates,
                                                        const Query& query,
                                                        const std::string& docs_block) {
    std::map<std::string, std::string> bindings;
    for (const auto& slot : tmpl.required_slots) {
        if (slot == "query" || slot == "statement") {
            bindings[slot] = query.text;
        } else if (slot == "question") {
            bindings[slot] = query.text;
        } else if (slot == "docs") {
            bindings[slot] = docs_block;
        } else if (slot == "few_shots") {
            bindings[slot] = templates.few_shots(tmpl.name);
        } else if (slot == "person") {
            bindings[slot] = query.person.empty() ? "the subject" : query.person;
        }
    }
    return bindings;
}

}  // namespace

std::vector<ClusterSummary> summarize_clusters(const Clustering& clustering, const Query& query,
                                               const RetrievedSet& docs,
                                               const TemplateLibrary& templates,
                                               ChatBackend& backend,
                                               const CompressionOptions& options) {
    if (options.parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
    check_partition(clustering, docs);

    const PromptTemplate& tmpl = templates.get(compression_template_name(query));
    std::vector<ClusterSummary> summaries(clustering.clusters.size());

    detail::parallel_for_indexed(
        clustering.clusters.size(), static_cast<std::size_t>(options.parallelism),
        [&](std::size_t i) {
            const Cluster& cluster = clustering.clusters[i];
            ClusterSummary summary;
            summary.cluster_index = cluster.index;
            try {
                ChatRequest request;
                request.user = render_prompt(
                    tmpl, compression_bindings(tmpl, templates, query,
                                               cluster_docs_block(cluster, docs)));
                request.temperature = options.temperature;
                const ChatResponse response = backend.chat(request);
                summary.usage = response.usage;
                if (is_empty_extract(response.text)) {
                    summary.empty_extract = true;
                    summary.text = kEmptyExtractSentinel;
                } else {
                    summary.text = textutil::trim(response.text);
                }
            } catch (const std::exception&) {
                summary.failed = true;
            }
            summaries[i] = std::move(summary);
        });
    return summaries;
}

std::vector<ClusterSummary> compress_documents(const Query& query, const RetrievedSet& docs,
                                               const TemplateLibrary& templates,
                                               ChatBackend& backend,
                                               const CompressionOptions& options) {
    if (options.parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
    const PromptTemplate& tmpl = templates.get("compression-general");
    std::vector<ClusterSummary> summaries(docs.size());

    detail::parallel_for_indexed(
        docs.size(), static_cast<std::size_t>(options.parallelism), [&](std::size_t i) {
            const Document& doc = docs.documents()[i];
            ClusterSummary summary;
            summary.cluster_index = static_cast<int>(i) + 1;
            try {
                ChatRequest request;
                request.user = render_prompt(
                    tmpl, compression_bindings(tmpl, templates, query, "[1] " + doc.text + "\n"));
                request.temperature = options.temperature;
                const ChatResponse response = backend.chat(request);
                summary.usage = response.usage;
                if (is_empty_extract(response.text)) {
                    summary.empty_extract = true;
                    summary.text = kEmptyExtractSentinel;
                } else {
                    summary.text = textutil::trim(response.text);
                }
            } catch (const std::exception&) {
                summary.failed = true;
            }
            summaries[i] = std::move(summary);
        });
    return summaries;
}

std::vector<std::string> apply_fallback(const std::vector<ClusterSummary>& summaries,
                                        const Clustering& clustering, const RetrievedSet& docs) {
    if (summaries.size() != clustering.clusters.size()) {
        throw std::invalid_argument("summaries and clusters must align");
    }
    std::vector<std::string> blocks;
    blocks.reserve(summaries.size());
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const ClusterSummary& summary = summaries[i];
        const bool poor = summary.failed || summary.empty_extract ||
                          textutil::trim(summary.text).empty();
        if (poor) {
            std::string joined;
            for (const auto& id : clustering.clusters[i].member_ids) {
                if (!joined.empty()) joined += "\n";
                joined += docs.find(id).text;
            }
            blocks.push_back(std::move(joined));
        } else {
            blocks.push_back(summary.text);
        }
    }
    return blocks;
}

}  // namespace edc2rag
