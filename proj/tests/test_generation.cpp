#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edc2rag/generation.hpp"

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
    q.gold_answers = {"veldrite"};
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

// records every prompt it forwards
struct CapturingBackend : ChatBackend {
    explicit CapturingBackend(ChatBackend& inner) : inner_(inner) {}
    std::vector<std::string> prompts;
    bool deterministic() const override { return inner_.deterministic(); }

protected:
    ChatResponse do_chat(const ChatRequest& request) override {
        prompts.push_back(request.user);
        return inner_.chat(request);
    }

private:
    ChatBackend& inner_;
};

}  // namespace

TEST_CASE("parse_selected_answer extracts the line remainder verbatim") {
    CHECK(*parse_selected_answer("Reasoning: because\nSelected_Answer: Paris") == "Paris");
    CHECK(*parse_selected_answer("Selected_Answer:   spaced out  ") == "spaced out");
    CHECK(!parse_selected_answer("no marker at all"));
    CHECK(*parse_selected_answer("Selected_Answer: a: b: c") == "a: b: c");
}

TEST_CASE("candidate refusals are recognized") {
    GenerationOptions options;
    CHECK(is_refusal("I cannot answer this question.", options));
    CHECK(is_refusal("No content to extract", options));
    CHECK(is_refusal("", options));
    CHECK_FALSE(is_refusal("veldrite", options));
}

TEST_CASE("kqa per-cluster answering keeps gold evidence and drops noise clusters") {
    ExtractiveMockChatBackend backend;
    GenerationOptions options;
    const auto candidates =
        kqa_answer_clusters(two_clusters(), kqa_query("What powers the lanterns of velmora?"),
                            fixture_docs(), templates(), backend, options);
    REQUIRE(candidates.size() == 1);  // the rye/regatta cluster is unanswerable
    CHECK(candidates[0].cluster_index == 1);
    CHECK(candidates[0].answer_text.find("veldrite") != std::string::npos);
    CHECK(backend.call_count() == 2);
}

TEST_CASE("kqa answering fails only when every cluster is unanswerable") {
    ExtractiveMockChatBackend backend;
    GenerationOptions options;
    CHECK_THROWS_AS(kqa_answer_clusters(two_clusters(),
                                        kqa_query("completely unrelated wording"),
                                        fixture_docs(), templates(), backend, options),
                    std::runtime_error);

    Query not_kqa = kqa_query("x");
    not_kqa.task = TaskKind::FactCheck;
    CHECK_THROWS_AS(kqa_answer_clusters(two_clusters(), not_kqa, fixture_docs(), templates(),
                                        backend, options),
                    std::invalid_argument);
}

TEST_CASE("kqa selection picks the consensus answer") {
    ExtractiveMockChatBackend backend;
    GenerationOptions options;
    auto candidate = [](int index, const char* text) {
        return CandidateAnswer{index, text, ""};
    };

    const std::vector<CandidateAnswer> paris = {
        candidate(1, "Paris"), candidate(2, "The capital is Paris"), candidate(3, "France"),
        candidate(4, "paris"), candidate(5, "It's Paris in France")};
    CHECK(kqa_select(paris, kqa_query("What is the capital of France?"), templates(), backend,
                     options)
              .selected == "Paris");

    const std::vector<CandidateAnswer> majority = {candidate(1, "A"), candidate(2, "A"),
                                                   candidate(3, "B")};
    CHECK(kqa_select(majority, kqa_query("which letter?"), templates(), backend, options)
              .selected == "A");
}

TEST_CASE("kqa selection: single candidate wins without a backend call") {
    ExtractiveMockChatBackend backend;
    GenerationOptions options;
    const std::vector<CandidateAnswer> one = {{1, "only answer", ""}};
    CHECK(kqa_select(one, kqa_query("q"), templates(), backend, options).selected ==
          "only answer");
    CHECK(backend.call_count() == 0);
    CHECK_THROWS_AS(kqa_select({}, kqa_query("q"), templates(), backend, options),
                    std::invalid_argument);
}

TEST_CASE("kqa selection re-prompts once on an unparseable response, then errors") {
    ScriptedChatBackend backend;
    backend.set_default_reply("no marker in this response");
    GenerationOptions options;
    const std::vector<CandidateAnswer> two = {{1, "A", ""}, {2, "B", ""}};
    CHECK_THROWS_AS(kqa_select(two, kqa_query("q"), templates(), backend, options),
                    std::runtime_error);
    CHECK(backend.call_count() == 2);
}

TEST_CASE("factcheck verdict parses the Answer field") {
    ScriptedChatBackend always_factual;
    always_factual.set_default_reply("Reasoning: fine\nAnswer: Factual");
    GenerationOptions options;
    Query statement;
    statement.id = "s1";
    statement.text = "The tower stands in Paris.";
    statement.task = TaskKind::FactCheck;

    const Verdict v = factcheck_verdict(statement, {"The tower stands in Paris."},
                                        templates(), always_factual, FactVariant::FELM, options);
    CHECK(v.kind == VerdictKind::Factual);

    ExtractiveMockChatBackend containment;
    const Verdict supported = factcheck_verdict(statement, {"The tower stands in Paris."},
                                                templates(), containment, FactVariant::FELM,
                                                options);
    CHECK(supported.kind == VerdictKind::Factual);

    Query wrong = statement;
    wrong.text = "The tower stands in Berlin.";
    const Verdict contradicted = factcheck_verdict(wrong, {"The tower stands in Paris."},
                                                   templates(), containment, FactVariant::FELM,
                                                   options);
    CHECK(contradicted.kind == VerdictKind::Nonfactual);

    // empty context still renders and returns a verdict
    const Verdict empty_context =
        factcheck_verdict(wrong, {}, templates(), containment, FactVariant::FELM, options);
    CHECK(empty_context.kind == VerdictKind::Nonfactual);
}

TEST_CASE("wikibio verdict uses the person-aware template") {
    ExtractiveMockChatBackend backend;
    GenerationOptions options;
    Query statement;
    statement.id = "s1";
    statement.text = "Alan Turing was born in 1912.";
    statement.person = "Alan Turing";
    statement.task = TaskKind::FactCheck;
    const Verdict v = factcheck_verdict(statement, {"Alan Turing was born in 1912."},
                                        templates(), backend, FactVariant::WikiBio, options);
    CHECK(v.kind == VerdictKind::Factual);
}

TEST_CASE("halueval choice stays in the two-answer domain") {
    ExtractiveMockChatBackend backend;
    GenerationOptions options;
    const std::string knowledge = "The byway can be accessed by U.S. Highway 60.";
    const std::string question = "Which U.S. Highway gives access?";

    const Verdict first = halueval_choice(knowledge, question, "U.S. Highway 60",
                                          "U.S. Highway 70", templates(), backend, options);
    CHECK(first.kind == VerdictKind::Answer1);

    const Verdict swapped = halueval_choice(knowledge, question, "U.S. Highway 70",
                                            "U.S. Highway 60", templates(), backend, options);
    CHECK(swapped.kind == VerdictKind::Answer2);

    const Verdict identical = halueval_choice(knowledge, question, "U.S. Highway 60",
                                              "U.S. Highway 60", templates(), backend, options);
    CHECK((identical.kind == VerdictKind::Answer1 || identical.kind == VerdictKind::Answer2));

    CHECK_THROWS_AS(halueval_choice(knowledge, question, "", "x", templates(), backend, options),
                    std::invalid_argument);

    ScriptedChatBackend garbled;
    garbled.set_default_reply("#Choice#: \"Answer 3\"");
    CHECK_THROWS_AS(halueval_choice(knowledge, question, "a", "b", templates(), garbled,
                                    options),
                    std::runtime_error);
    CHECK(garbled.call_count() == 2);  // one re-prompt
}

TEST_CASE("vanilla makes exactly one call over all documents in rank order") {
    ExtractiveMockChatBackend inner;
    CapturingBackend backend(inner);
    GenerationOptions options;
    const FinalAnswer answer = vanilla_ralm(kqa_query("What powers the lanterns of velmora?"),
                                            fixture_docs(), templates(), backend, options);
    CHECK(backend.call_count() == 1);
    CHECK(answer.selected.find("veldrite") != std::string::npos);
    REQUIRE(backend.prompts.size() == 1);
    const auto& prompt = backend.prompts[0];
    CHECK(prompt.find("[1] The lanterns") < prompt.find("[4] The regatta"));

    ScriptedChatBackend empty;
    empty.set_default_reply("   ");
    CHECK_THROWS_AS(vanilla_ralm(kqa_query("q"), fixture_docs(), templates(), empty, options),
                    std::runtime_error);
}

TEST_CASE("chunk compression makes k+1 calls") {
    ExtractiveMockChatBackend backend;
    GenerationOptions options;
    const FinalAnswer answer =
        chunk_compression(kqa_query("What powers the lanterns of velmora?"), fixture_docs(),
                          templates(), backend, options);
    CHECK(backend.call_count() == 5);  // 4 documents + 1 answer call
    CHECK(answer.selected.find("veldrite") != std::string::npos);
}

TEST_CASE("chunk compression with all-sentinel responses answers over the vanilla context") {
    ExtractiveMockChatBackend inner;
    CapturingBackend chunk_backend(inner);
    GenerationOptions options;
    const Query query = kqa_query("zz unmatched wording zz");
    chunk_compression(query, fixture_docs(), templates(), chunk_backend, options);

    // With every per-document response being the sentinel, the final answer
    // prompt must carry the original documents, i.e. the vanilla context.
    REQUIRE(chunk_backend.prompts.size() == 5);
    const std::string& final_prompt = chunk_backend.prompts.back();
    const RetrievedSet docs = fixture_docs();
    for (const auto& doc : docs.documents()) {
        CHECK(final_prompt.find(doc.text) != std::string::npos);
    }
}
