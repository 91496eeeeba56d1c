#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edc2rag/compression.hpp"

using namespace edc2rag;

#ifndef EDC2RAG_SOURCE_DIR
#error "EDC2RAG_SOURCE_DIR must be defined by the build"
#endif

namespace {

const TemplateLibrary& templates() {
    static const TemplateLibrary lib =
        TemplateLibrary::load(std::filesystem::path(EDC2RAG_SOURCE_DIR) / "prompts");
    return lib;
}

Query kqa_query(const std::string& text) {
    Query q;
    q.id = "q";
    q.text = text;
    q.gold_answers = {"answer"};
    q.task = TaskKind::KQA;
    return q;
}

RetrievedSet fixture_docs() {
    auto doc = [](const char* id, int rank, const char* text) {
        Document d;
        d.id = id;
        d.rank = rank;
        d.text = text;
        return d;
    };
    return RetrievedSet(
        "q", {doc("d1", 1, "The lanterns of velmora burn veldrite. Ledgers list repairs."),
              doc("d2", 2, "Veldrite powers every lantern in velmora. Nights are long."),
              doc("d3", 3, "Bakers proof rye dough before dawn. Carts arrive early."),
              doc("d4", 4, "The regatta crews paint their hulls. Ropes need tar.")});
}

Clustering two_clusters() {
    Clustering c;
    c.source_query_id = "q";
    c.clusters.push_back({1, "d1", {"d1", "d2"}});
    c.clusters.push_back({2, "d3", {"d3", "d4"}});
    return c;
}

}  // namespace

TEST_CASE("summaries come back in cluster order with one call per cluster") {
    ExtractiveMockChatBackend backend;
    const auto summaries =
        summarize_clusters(two_clusters(), kqa_query("What powers the lanterns of velmora?"),
                           fixture_docs(), templates(), backend, {1, 0.0});
    REQUIRE(summaries.size() == 2);
    CHECK(backend.call_count() == 2);
    CHECK(summaries[0].cluster_index == 1);
    CHECK(summaries[1].cluster_index == 2);
    CHECK(summaries[0].text.find("veldrite") != std::string::npos);
    CHECK_FALSE(summaries[0].empty_extract);
    CHECK(summaries[1].empty_extract);  // rye dough cluster shares nothing with the query
    CHECK(summaries[1].text == std::string(kEmptyExtractSentinel));
}

TEST_CASE("parallelism does not change the result") {
    ExtractiveMockChatBackend a, b;
    const Query query = kqa_query("What powers the lanterns of velmora?");
    const auto seq =
        summarize_clusters(two_clusters(), query, fixture_docs(), templates(), a, {1, 0.0});
    const auto par =
        summarize_clusters(two_clusters(), query, fixture_docs(), templates(), b, {8, 0.0});
    REQUIRE(seq.size() == par.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        CHECK(seq[i].text == par[i].text);
        CHECK(seq[i].empty_extract == par[i].empty_extract);
    }
}

TEST_CASE("sentinel variants are canonicalized") {
    ScriptedChatBackend backend;
    backend.set_default_reply("  no CONTENT to extract!  ");
    const auto summaries =
        summarize_clusters(two_clusters(), kqa_query("anything"), fixture_docs(), templates(),
                           backend, {1, 0.0});
    for (const auto& s : summaries) {
        CHECK(s.empty_extract);
        CHECK(s.text == std::string(kEmptyExtractSentinel));
    }
}

TEST_CASE("a failing cluster is marked failed without touching the others") {
    // fails on the first call only; the second cluster still succeeds
    struct FailFirst : ChatBackend {
        std::atomic<int> n{0};

    protected:
        ChatResponse do_chat(const ChatRequest& request) override {
            if (n.fetch_add(1) == 0) throw BackendError("boom", 1, true, 500);
            ChatResponse r;
            r.text = "fine: " + std::to_string(request.user.size());
            return r;
        }
    } backend;
    const auto summaries =
        summarize_clusters(two_clusters(), kqa_query("anything"), fixture_docs(), templates(),
                           backend, {1, 0.0});
    REQUIRE(summaries.size() == 2);
    CHECK(summaries[0].failed);
    CHECK_FALSE(summaries[1].failed);
}

TEST_CASE("summarize rejects a clustering that does not partition the set") {
    Clustering broken = two_clusters();
    broken.clusters[1].member_ids = {"d3"};  // d4 missing
    ExtractiveMockChatBackend backend;
    CHECK_THROWS_AS(summarize_clusters(broken, kqa_query("x"), fixture_docs(), templates(),
                                       backend, {1, 0.0}),
                    std::invalid_argument);
}

TEST_CASE("fallback substitutes original documents for poor summaries") {
    const RetrievedSet docs = fixture_docs();
    const Clustering clustering = two_clusters();

    std::vector<ClusterSummary> summaries(2);
    summaries[0] = {1, "good summary", false, false, {}};
    summaries[1] = {2, std::string(kEmptyExtractSentinel), true, false, {}};

    const auto blocks = apply_fallback(summaries, clustering, docs);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0] == "good summary");
    CHECK(blocks[1] == docs.find("d3").text + "\n" + docs.find("d4").text);
}

TEST_CASE("all-sentinel fallback reproduces the original documents cluster by cluster") {
    const RetrievedSet docs = fixture_docs();
    const Clustering clustering = two_clusters();
    std::vector<ClusterSummary> summaries(2);
    summaries[0] = {1, std::string(kEmptyExtractSentinel), true, false, {}};
    summaries[1] = {2, "", false, true, {}};  // failed cluster falls back too

    const auto blocks = apply_fallback(summaries, clustering, docs);
    CHECK(blocks[0] == docs.find("d1").text + "\n" + docs.find("d2").text);
    CHECK(blocks[1] == docs.find("d3").text + "\n" + docs.find("d4").text);
    for (const auto& block : blocks) CHECK_FALSE(block.empty());
}

TEST_CASE("fallback requires aligned summaries") {
    std::vector<ClusterSummary> one(1);
    CHECK_THROWS_AS(apply_fallback(one, two_clusters(), fixture_docs()),
                    std::invalid_argument);
}

TEST_CASE("compression never grows the context when no fallback fires") {
    ExtractiveMockChatBackend backend;
    const Query query = kqa_query("What powers the lanterns of velmora?");
    const RetrievedSet docs = fixture_docs();
    Clustering clustering;
    clustering.source_query_id = "q";
    clustering.clusters.push_back({1, "d1", {"d1", "d2"}});

    RetrievedSet front("q", {docs.documents()[0], docs.documents()[1]});
    const auto summaries =
        summarize_clusters(clustering, query, front, templates(), backend, {1, 0.0});
    REQUIRE_FALSE(summaries[0].empty_extract);
    const auto blocks = apply_fallback(summaries, clustering, front);
    std::size_t original = 0;
    for (const auto& doc : front.documents()) original += doc.text.size();
    std::size_t compressed = 0;
    for (const auto& block : blocks) compressed += block.size();
    CHECK(compressed <= original);
}

TEST_CASE("per-document compression visits every document once") {
    ExtractiveMockChatBackend backend;
    const auto summaries = compress_documents(kqa_query("What powers the lanterns of velmora?"),
                                              fixture_docs(), templates(), backend, {2, 0.0});
    REQUIRE(summaries.size() == 4);
    CHECK(backend.call_count() == 4);
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        CHECK(summaries[i].cluster_index == static_cast<int>(i) + 1);
    }
    CHECK_FALSE(summaries[0].empty_extract);
    CHECK(summaries[2].empty_extract);  // rye dough document is unrelated
}
