#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edc2rag/prompts.hpp"

using namespace edc2rag;

#ifndef EDC2RAG_SOURCE_DIR
#error "EDC2RAG_SOURCE_DIR must be defined by the build"
#endif

static const std::filesystem::path kPrompts =
    std::filesystem::path(EDC2RAG_SOURCE_DIR) / "prompts";

TEST_CASE("render replaces slots") {
    const auto tmpl = PromptTemplate::from_body("t", "Q: {query}");
    CHECK(render_prompt(tmpl, {{"query", "x"}}) == "Q: x");
}

TEST_CASE("render reports the missing slot by name") {
    const auto tmpl = PromptTemplate::from_body("t", "Q: {query}\nD: {docs}");
    CHECK_THROWS_WITH_AS(render_prompt(tmpl, {{"query", "x"}}), "unbound slot: docs",
                         std::invalid_argument);
}

TEST_CASE("render rejects bindings for slots the template does not have") {
    const auto tmpl = PromptTemplate::from_body("t", "Q: {query}");
    CHECK_THROWS_WITH_AS(render_prompt(tmpl, {{"query", "x"}, {"docs", "y"}}),
                         "unknown slot: docs", std::invalid_argument);
}

TEST_CASE("every occurrence of a slot is replaced and values are not rescanned") {
    const auto tmpl = PromptTemplate::from_body("t", "{query} and {query}");
    CHECK(render_prompt(tmpl, {{"query", "a"}}) == "a and a");
    // a slot marker inside a bound value stays literal
    CHECK(render_prompt(tmpl, {{"query", "{docs}"}}) == "{docs} and {docs}");
}

TEST_CASE("slot extraction") {
    const auto slots = extract_slots("{query} {docs} {query} {not a slot} {few_shots}");
    CHECK(slots == std::set<std::string>{"query", "docs", "few_shots"});
}

TEST_CASE("shipped templates load and render") {
    const TemplateLibrary lib = TemplateLibrary::load(kPrompts);
    for (const char* name : {"compression-general", "compression-wikibio", "kqa-summarize",
                             "kqa-select", "halueval-eval", "wikibio-eval", "felm-eval"}) {
        CHECK(lib.has(name));
    }

    const std::string prompt = render_prompt(
        lib.get("kqa-summarize"),
        {{"question", "What powers the lanterns?"}, {"docs", "[1] one\n[2] two\n"}});
    CHECK(prompt.find("providing supporting evidence") != std::string::npos);
    CHECK(prompt.find("[2] two") != std::string::npos);
    CHECK(prompt.find('{') == std::string::npos);

    CHECK(lib.get("compression-general").body.find("No content to extract") !=
          std::string::npos);
    CHECK(lib.get("kqa-select").body.find("Selected_Answer") != std::string::npos);
    CHECK(lib.get("halueval-eval").body.find("\"Answer 1\" or \"Answer 2\"") !=
          std::string::npos);
    CHECK(lib.get("wikibio-eval").body.find("Nonfactual") != std::string::npos);
    CHECK(!lib.few_shots("compression-general").empty());
}

TEST_CASE("template library errors") {
    CHECK_THROWS(TemplateLibrary::load("/nonexistent/prompt/dir"));
    const TemplateLibrary lib = TemplateLibrary::load(kPrompts);
    CHECK_THROWS_AS(lib.get("no-such-template"), std::out_of_range);
}

TEST_CASE("sentinel detection tolerates case and punctuation") {
    CHECK(is_empty_extract("No content to extract"));
    CHECK(is_empty_extract("no content to extract"));
    CHECK(is_empty_extract("  NO CONTENT TO EXTRACT.  "));
    CHECK(is_empty_extract("**No content to extract.**"));
    CHECK(is_empty_extract("\"No content to extract\"\n"));
    CHECK_FALSE(is_empty_extract("No content to extract here"));
    CHECK_FALSE(is_empty_extract("There is content to extract"));
    CHECK_FALSE(is_empty_extract(""));
}
