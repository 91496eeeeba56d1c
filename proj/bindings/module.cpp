#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "edc2rag/backends.hpp"
#include "edc2rag/clustering.hpp"
#include "edc2rag/corpus.hpp"
#include "edc2rag/evaluation.hpp"
#include "edc2rag/prompts.hpp"

namespace py = pybind11;
using namespace edc2rag;

namespace {

RetrievedSet set_from_ids(const std::vector<std::string>& ids) {
    std::vector<Document> docs;
    int rank = 1;
    for (const auto& id : ids) {
        Document doc;
        doc.id = id;
        doc.rank = rank++;
        docs.push_back(std::move(doc));
    }
    return RetrievedSet("query", std::move(docs));
}

py::list clustering_to_py(const Clustering& clustering) {
    py::list out;
    for (const auto& cluster : clustering.clusters) {
        py::dict d;
        d["index"] = cluster.index;
        d["root_id"] = cluster.root_id;
        d["member_ids"] = cluster.member_ids;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dynamic clustering-based retrieval compression: core operations";

    m.def(
        "cosine_similarity",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return cosine_similarity(EmbeddingVector(a), EmbeddingVector(b));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "plan_sizes",
        [](int n, int tau, std::optional<int> lambda, int merge_tail_below) {
            return plan_sizes(n, tau, lambda, merge_tail_below).sizes;
        },
        py::arg("n"), py::arg("tau"), py::arg("lambda_") = std::nullopt,
        py::arg("merge_tail_below") = 0,
        "Cluster size schedule; lambda_=None disables the size cap.");

    m.def(
        "dynamic_cluster",
        [](const std::vector<std::string>& doc_ids,
           const std::map<std::string, std::vector<double>>& embeddings,
           const std::vector<double>& query_embedding, int tau, std::optional<int> lambda,
           int merge_tail_below) {
            EmbeddingMap emap;
            for (const auto& [id, values] : embeddings) {
                emap.emplace(id, EmbeddingVector(values));
            }
            return clustering_to_py(dynamic_cluster(set_from_ids(doc_ids), emap,
                                                    EmbeddingVector(query_embedding), tau,
                                                    lambda, merge_tail_below));
        },
        py::arg("doc_ids"), py::arg("embeddings"), py::arg("query_embedding"), py::arg("tau"),
        py::arg("lambda_") = std::nullopt, py::arg("merge_tail_below") = 0,
        "doc_ids are in retrieval-rank order; returns clusters in formation order.");

    m.def(
        "average_cluster",
        [](const std::vector<std::string>& doc_ids, int num_clusters) {
            return clustering_to_py(average_cluster(set_from_ids(doc_ids), num_clusters));
        },
        py::arg("doc_ids"), py::arg("num_clusters"));

    m.def(
        "random_cluster",
        [](const std::vector<std::string>& doc_ids, const std::vector<int>& sizes,
           std::uint64_t seed) {
            SizePlan plan;
            plan.sizes = sizes;
            return clustering_to_py(random_cluster(set_from_ids(doc_ids), plan, seed));
        },
        py::arg("doc_ids"), py::arg("sizes"), py::arg("seed"));

    m.def(
        "intra_class_consistency",
        [](const std::vector<std::vector<std::string>>& clusters,
           const std::map<std::string, std::string>& labels, const std::string& target_class) {
            Clustering clustering;
            int index = 1;
            for (const auto& members : clusters) {
                Cluster c;
                c.index = index++;
                c.member_ids = members;
                c.root_id = members.empty() ? "" : members.front();
                clustering.clusters.push_back(std::move(c));
            }
            return intra_class_consistency(clustering, labels, target_class);
        },
        py::arg("clusters"), py::arg("labels"), py::arg("target_class"));

    m.def("random_baseline_consistency", &random_baseline_consistency, py::arg("num_clusters"));

    m.def("normalize_answer", &normalize_answer, py::arg("text"));

    m.def(
        "token_f1",
        [](const std::string& prediction, const std::vector<std::string>& gold_answers) {
            const QAScore score = token_f1(prediction, gold_answers);
            py::dict d;
            d["f1"] = score.f1;
            d["precision"] = score.precision;
            d["recall"] = score.recall;
            return d;
        },
        py::arg("prediction"), py::arg("gold_answers"));

    m.def(
        "balanced_accuracy",
        [](long long tp, long long fp, long long tn, long long fn) {
            return balanced_accuracy(ConfusionCounts{tp, fp, tn, fn});
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));

    m.def(
        "accuracy",
        [](long long tp, long long fp, long long tn, long long fn) {
            return accuracy(ConfusionCounts{tp, fp, tn, fn});
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));

    m.def(
        "compute_cost",
        [](double avg_input_tokens, double avg_output_tokens, double input_usd_per_million,
           double output_usd_per_million, std::optional<double> baseline_cost_usd) {
            const CostReport report =
                compute_cost(avg_input_tokens, avg_output_tokens,
                             PriceSchedule{input_usd_per_million, output_usd_per_million},
                             baseline_cost_usd);
            py::dict d;
            d["avg_input_tokens"] = report.avg_input_tokens;
            d["avg_output_tokens"] = report.avg_output_tokens;
            d["api_cost_usd"] = report.api_cost_usd;
            if (report.relative_cost) d["relative_cost"] = *report.relative_cost;
            return d;
        },
        py::arg("avg_input_tokens"), py::arg("avg_output_tokens"),
        py::arg("input_usd_per_million"), py::arg("output_usd_per_million"),
        py::arg("baseline_cost_usd") = std::nullopt);

    m.def(
        "label_has_answer",
        [](const std::string& text, const std::vector<std::string>& gold_answers) {
            Document doc;
            doc.id = "doc";
            doc.text = text;
            return label_has_answer(doc, gold_answers);
        },
        py::arg("text"), py::arg("gold_answers"));

    m.def(
        "render_prompt",
        [](const std::string& body, const std::map<std::string, std::string>& bindings) {
            return render_prompt(PromptTemplate::from_body("inline", body), bindings);
        },
        py::arg("body"), py::arg("bindings"));

    m.def("is_empty_extract", &is_empty_extract, py::arg("response"));

    m.def(
        "hash_embed",
        [](const std::vector<std::string>& texts, std::uint64_t seed, std::size_t dims) {
            HashEmbeddingBackend backend(seed, dims);
            std::vector<std::vector<double>> out;
            for (const auto& v : backend.embed(texts)) out.push_back(v.values());
            return out;
        },
        py::arg("texts"), py::arg("seed") = 0, py::arg("dims") = 256);
}
