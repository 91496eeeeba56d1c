#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edc2rag/backends.hpp"
#include "edc2rag/prompts.hpp"

using namespace edc2rag;

TEST_CASE("echo backend returns the prompt and reports usage") {
    EchoChatBackend backend;
    const ChatResponse r = backend.chat({"", "hello there", 0.0, std::nullopt});
    CHECK(r.text == "hello there");
    CHECK(r.usage.source == UsageSource::BackendReported);
    CHECK(r.usage.prompt_tokens == approx_token_count("hello there"));
    CHECK(backend.call_count() == 1);
    CHECK(backend.deterministic());
}

TEST_CASE("scripted backend replays canned responses") {
    ScriptedChatBackend backend;
    backend.add_reply("ping", "pong");
    CHECK(backend.chat({"", "ping", 0.0, std::nullopt}).text == "pong");
    CHECK_THROWS_AS(backend.chat({"", "unknown", 0.0, std::nullopt}), BackendError);
    backend.set_default_reply("fallback");
    CHECK(backend.chat({"", "unknown", 0.0, std::nullopt}).text == "fallback");
}

TEST_CASE("hash embeddings are deterministic and text-sensitive") {
    HashEmbeddingBackend a(42), b(42), other(43);
    const auto va = a.embed({"a", "b", "a"});
    const auto vb = b.embed({"a", "b", "a"});
    REQUIRE(va.size() == 3);
    CHECK(va[0].values() == vb[0].values());
    CHECK(va[0].values() == va[2].values());       // identical text, identical vector
    CHECK(va[0].values() != va[1].values());       // distinct text, distinct vector
    CHECK(va[0].values() != other.embed({"a"})[0].values());  // seed matters
    CHECK(cosine_similarity(va[0], va[0]) == doctest::Approx(1.0));
}

TEST_CASE("texts sharing vocabulary embed closer than disjoint texts") {
    HashEmbeddingBackend backend(7);
    const auto vs = backend.embed({"the quartz lantern glows in the harbor",
                                   "a quartz lantern lights the harbor wall",
                                   "bakers proof rye dough before dawn"});
    CHECK(cosine_similarity(vs[0], vs[1]) > cosine_similarity(vs[0], vs[2]) + 0.2);
}

TEST_CASE("embedding batching makes ceil(n / batch) upstream calls") {
    HashEmbeddingBackend backend(1);
    std::vector<std::string> texts(1000, "word");
    for (std::size_t i = 0; i < texts.size(); ++i) texts[i] += std::to_string(i);
    const auto vectors = backend.embed(texts);
    CHECK(vectors.size() == 1000);
    CHECK(backend.upstream_calls() == 16);  // batch size 64
    CHECK_THROWS_AS(backend.embed({}), std::invalid_argument);
}

TEST_CASE("retry succeeds after transient failures and reports attempts") {
    FaultInjectingChatBackend flaky(2, "recovered");
    ProviderConfig config;
    config.max_retries = 3;
    config.backoff_base_ms = 100;
    VirtualClock clock;
    RetryingChatBackend retrying(flaky, config, clock, 5);

    const ChatResponse r = retrying.chat({"", "x", 0.0, std::nullopt});
    CHECK(r.text == "recovered");
    CHECK(retrying.last_attempts() == 3);

    const auto sleeps = clock.sleeps();
    REQUIRE(sleeps.size() == 2);
    // sleep before retry r is base * 2^(r-1), jittered by at most 25%
    CHECK(sleeps[0] >= 75);
    CHECK(sleeps[0] <= 125);
    CHECK(sleeps[1] >= 150);
    CHECK(sleeps[1] <= 250);
}

TEST_CASE("retry gives up with a typed error carrying the attempt count") {
    FaultInjectingChatBackend flaky(100);
    ProviderConfig config;
    config.max_retries = 2;
    config.backoff_base_ms = 10;
    VirtualClock clock;
    RetryingChatBackend retrying(flaky, config, clock, 5);

    try {
        retrying.chat({"", "x", 0.0, std::nullopt});
        FAIL("expected BackendError");
    } catch (const BackendError& err) {
        CHECK(err.attempts == 3);  // first attempt + 2 retries
        CHECK(err.transient);
    }
}

TEST_CASE("non-transient errors are not retried") {
    struct Hard : ChatBackend {
    protected:
        ChatResponse do_chat(const ChatRequest&) override {
            throw BackendError("bad request", 1, false, 400);
        }
    } hard;
    ProviderConfig config;
    config.max_retries = 5;
    VirtualClock clock;
    RetryingChatBackend retrying(hard, config, clock);
    try {
        retrying.chat({"", "x", 0.0, std::nullopt});
        FAIL("expected BackendError");
    } catch (const BackendError& err) {
        CHECK(err.attempts == 1);
        CHECK_FALSE(err.transient);
        CHECK(err.http_status == 400);
    }
    CHECK(clock.sleeps().empty());
}

TEST_CASE("rate limiter spaces out acquisitions on the clock") {
    VirtualClock clock;
    RateLimiter limiter(2.0, clock);  // 2 requests per second
    limiter.acquire();                // the initial token is free
    CHECK(clock.sleeps().empty());
    limiter.acquire();
    limiter.acquire();
    CHECK(clock.sleeps().size() >= 2);
    CHECK(clock.now_ms() >= 1000);  // two extra tokens at 2 rps need ~1s
}

TEST_CASE("extractive mock: compression prompts extract overlapping sentences") {
    ExtractiveMockChatBackend mock;
    const std::string prompt =
        "##Statement##:\nWhat is the capital of France?\n"
        "##Documents##:\n[1] Paris is the capital of France. The river Seine flows there.\n"
        "[2] Bakers proof rye dough before dawn.\n"
        "##Extracted Information##:\n";
    const ChatResponse r = mock.chat({"", prompt, 0.0, std::nullopt});
    CHECK(r.text.find("Paris is the capital of France.") != std::string::npos);
    CHECK(r.text.find("rye dough") == std::string::npos);
}

TEST_CASE("extractive mock keeps dotted abbreviations inside one sentence") {
    ExtractiveMockChatBackend mock;
    const std::string prompt =
        "##Statement##:\nWhich highway reaches the byway?\n"
        "##Documents##:\n[1] The byway can be accessed by U.S. Highway 60. It is nine miles "
        "long.\n"
        "##Extracted Information##:\n";
    const ChatResponse r = mock.chat({"", prompt, 0.0, std::nullopt});
    CHECK(r.text.find("U.S. Highway 60") != std::string::npos);
    CHECK(r.text.find("nine miles") == std::string::npos);
}

TEST_CASE("extractive mock: disjoint documents produce the exact sentinel") {
    ExtractiveMockChatBackend mock;
    const std::string prompt =
        "##Statement##:\nWhat is the capital of France?\n"
        "##Documents##:\n[1] Bakers proof rye dough before dawn.\n"
        "##Extracted Information##:\n";
    const ChatResponse r = mock.chat({"", prompt, 0.0, std::nullopt});
    CHECK(r.text == std::string(kEmptyExtractSentinel));
    CHECK(is_empty_extract(r.text));
}

TEST_CASE("extractive mock: selection returns the modal candidate") {
    ExtractiveMockChatBackend mock;
    const std::string prompt =
        "##Candidate Answers##:\n[\"A\", \"A\", \"B\"]\n##Question##:\nwhich letter?\n";
    const ChatResponse r = mock.chat({"", prompt, 0.0, std::nullopt});
    CHECK(r.text.find("Selected_Answer: A") != std::string::npos);

    const std::string paris =
        "##Candidate Answers##:\n[\"Paris\", \"The capital is Paris\", \"France\", \"paris\", "
        "\"It's Paris in France\"]\n##Question##:\nWhat is the capital of France?\n";
    const ChatResponse r2 = mock.chat({"", paris, 0.0, std::nullopt});
    CHECK(r2.text.find("Selected_Answer: Paris") != std::string::npos);
}

TEST_CASE("extractive mock: choice prompts check containment in the knowledge") {
    ExtractiveMockChatBackend mock;
    const std::string base =
        "##Knowledge##:\nThe nine-mile byway can be accessed by U.S. Highway 60.\n"
        "##Question##:\nWhat U.S. Highway gives access to Zilpo Road?\n";
    const ChatResponse r1 = mock.chat(
        {"", base + "##Answer 1##:\nU.S. Highway 60\n##Answer 2##:\nU.S. Highway 70\n", 0.0,
         std::nullopt});
    CHECK(r1.text.find("#Choice#: \"Answer 1\"") != std::string::npos);

    const ChatResponse r2 = mock.chat(
        {"", base + "##Answer 1##:\nU.S. Highway 70\n##Answer 2##:\nU.S. Highway 60\n", 0.0,
         std::nullopt});
    CHECK(r2.text.find("#Choice#: \"Answer 2\"") != std::string::npos);
}

TEST_CASE("extractive mock: verdict prompts judge by containment") {
    ExtractiveMockChatBackend mock;
    const std::string supported =
        "##Statement##:\nThe tower stands in Paris.\n"
        "##Reference docs##:\n[1] Everyone agrees the tower stands in Paris.\n##Output##:\n";
    CHECK(mock.chat({"", supported, 0.0, std::nullopt}).text.find("Answer: Factual") !=
          std::string::npos);

    const std::string unsupported =
        "##Statement##:\nThe tower stands in Berlin.\n"
        "##Reference docs##:\n[1] The tower stands in Paris.\n##Output##:\n";
    CHECK(mock.chat({"", unsupported, 0.0, std::nullopt}).text.find("Answer: Nonfactual") !=
          std::string::npos);
}

TEST_CASE("extractive mock rejects unknown prompt shapes") {
    ExtractiveMockChatBackend mock;
    CHECK_THROWS_AS(mock.chat({"", "free-form text with no sections", 0.0, std::nullopt}),
                    BackendError);
}

TEST_CASE("usage tap labels calls with the current phase") {
    EchoChatBackend inner;
    UsageTapChatBackend tap(inner);
    tap.set_phase("compress");
    tap.chat({"", "one", 0.0, std::nullopt});
    tap.set_phase("select");
    tap.chat({"", "two", 0.0, std::nullopt});
    const auto entries = tap.entries();
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].purpose == "compress");
    CHECK(entries[1].purpose == "select");
}
